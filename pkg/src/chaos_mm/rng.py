"""Counter-based uniform generator for reproducible ensembles.

Candidates are keyed purely by (master_seed, path_index, draw_index), so any
path's draws can be regenerated in isolation, in any order, on any worker,
with bit-identical results.  The mixing function is the SplitMix64 finaliser,
implemented on Python integers to stay platform-independent.  This is a
simulation-quality generator, not a cryptographic one.
"""

from __future__ import annotations

__all__ = ["counter_hash", "uniforms"]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _finalize(z: int) -> int:
    z &= _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


def counter_hash(*parts: int) -> int:
    """Collapse a tuple of integers into one well-mixed 64-bit value."""
    h = _GOLDEN
    for p in parts:
        h = _finalize((h + (p & _MASK64)) & _MASK64)
    return h


def uniforms(master_seed: int, path_index: int, draw_index: int, n: int
             ) -> list[float]:
    """``n`` doubles in [0, 1) for one (seed, path, draw) counter triple."""
    s = counter_hash(master_seed, path_index, draw_index)
    out = []
    for _ in range(n):
        s = (s + _GOLDEN) & _MASK64
        out.append((_finalize(s) >> 11) * 2.0 ** -53)
    return out
