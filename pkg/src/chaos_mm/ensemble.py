"""Energy-targeted initial-condition sampling and reproducible path ensembles.

Initial conditions are drawn uniformly from an explicit box by rejection
until the energy lands inside the target window, with every candidate keyed
by (master_seed, path_index, draw_index).  Ensembles therefore produce
identical output for any worker count: the per-path computations share no
state, paths are grouped into fixed-size batches independent of concurrency,
and aggregation is ordered by path index.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _batch, rng
from .analysis import (
    DEFAULT_RENORM_EVERY,
    DEFAULT_ZERO_THRESHOLD,
    CrossingPoint,
    LyapunovSpectrum,
    PoincareSection,
    _spectrum_from_raw,
)
from .integrate import Trajectory, integrate
from .models import ModelKind, ModelParams, PhaseState, energy

__all__ = [
    "SamplingExhaustedError",
    "SamplingBox",
    "EnsembleConfig",
    "PathResult",
    "EnsembleResult",
    "default_sampling_box",
    "sample_initial_condition",
    "run_ensemble",
    "run_lyapunov_sweep",
]

ANALYSES = ("poincare", "lyapunov", "trajectory")


class SamplingExhaustedError(RuntimeError):
    """No candidate hit the energy window within the draw budget."""


@dataclass(frozen=True)
class SamplingBox:
    """Per-coordinate bounds (lo, hi) for candidate draws."""

    q1: tuple[float, float]
    q2: tuple[float, float]
    p1: tuple[float, float]
    p2: tuple[float, float]

    def __post_init__(self) -> None:
        for name in ("q1", "q2", "p1", "p2"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"sampling box {name} bounds must be finite with lo < hi")

    def contains_equilibrium(self, params: ModelParams) -> bool:
        lo1, hi1 = self.q1
        lo2, hi2 = self.q2
        lop1, hip1 = self.p1
        lop2, hip2 = self.p2
        return (lo1 <= params.x_0 <= hi1 and lo2 <= 0.0 <= hi2
                and lop1 <= 0.0 <= hip1 and lop2 <= 0.0 <= hip2)


def default_sampling_box(params: ModelParams, energy_target: float) -> SamplingBox:
    """Positions within x_0 +/- 6 and [-6, 6]; momentum bounds wide enough
    that kinetic energy alone can reach the target."""
    m1, m2 = params.mass_pair
    p1_max = math.sqrt(2.0 * m1 * (energy_target + 1.0))
    p2_max = math.sqrt(2.0 * m2 * (energy_target + 1.0))
    return SamplingBox(
        q1=(params.x_0 - 6.0, params.x_0 + 6.0),
        q2=(-6.0, 6.0),
        p1=(-p1_max, p1_max),
        p2=(-p2_max, p2_max),
    )


@dataclass(frozen=True)
class EnsembleConfig:
    params: ModelParams
    energy_target: float
    n_paths: int
    master_seed: int
    dt: float
    n_steps: int
    scheme: str = "yoshida4"
    energy_tol: float = 0.01
    sampling_box: SamplingBox | None = None
    max_draws: int = 1_000_000

    def __post_init__(self) -> None:
        if not self.energy_tol > 0.0:
            raise ValueError("energy_tol must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        box = self.resolved_box()
        if not box.contains_equilibrium(self.params):
            raise ValueError("sampling box must contain the equilibrium point")

    def resolved_box(self) -> SamplingBox:
        if self.sampling_box is not None:
            return self.sampling_box
        return default_sampling_box(self.params, self.energy_target)


def sample_initial_condition(config: EnsembleConfig, path_index: int) -> PhaseState:
    """First uniformly drawn candidate whose energy lands within the window.

    Identical (master_seed, path_index) always reproduce the same state,
    bit for bit.  Raises :class:`SamplingExhaustedError` after
    ``config.max_draws`` rejected candidates.
    """
    box = config.resolved_box()
    bounds = (box.q1, box.q2, box.p1, box.p2)
    params = config.params
    target = config.energy_target
    tol = config.energy_tol
    for draw in range(config.max_draws):
        us = rng.uniforms(config.master_seed, path_index, draw, 4)
        vals = [lo + (hi - lo) * u for (lo, hi), u in zip(bounds, us)]
        state = PhaseState(vals[0], vals[1], vals[2], vals[3], 0.0)
        if abs(energy(params, state) - target) <= tol:
            return state
    raise SamplingExhaustedError(
        f"no candidate within |H - {target}| <= {tol} after {config.max_draws} draws; "
        "the energy target may be unreachable inside the sampling box"
    )


@dataclass
class PathResult:
    """Outcome of one ensemble path; exactly one payload field is set when
    ``error`` is None."""

    path_index: int
    ic: PhaseState | None = None
    error: str | None = None
    trajectory: Trajectory | None = None
    spectrum: LyapunovSpectrum | None = None
    crossings: list[CrossingPoint] = field(default_factory=list)
    status: object | None = None


@dataclass
class EnsembleResult:
    config: EnsembleConfig
    analysis: str
    paths: list[PathResult]

    @property
    def n_failed(self) -> int:
        return sum(1 for p in self.paths if p.error is not None)

    def poincare_section(self) -> PoincareSection:
        points: list[CrossingPoint] = []
        statuses = []
        for p in self.paths:
            points.extend(p.crossings)
            statuses.append(p.status)
        return PoincareSection(params=self.config.params, points=points,
                               path_statuses=statuses,
                               energy_target=self.config.energy_target)

    def spectra(self) -> list[LyapunovSpectrum]:
        return [p.spectrum for p in self.paths if p.spectrum is not None]

    def h_ks_stats(self) -> tuple[float, float, float]:
        """(min, max, mean) entropy-rate estimate over succeeded paths."""
        hs = [p.spectrum.h_ks for p in self.paths if p.spectrum is not None]
        if not hs:
            raise ValueError("no succeeded paths to aggregate")
        return min(hs), max(hs), math.fsum(hs) / len(hs)


def _sample_paths(config: EnsembleConfig) -> list[PathResult]:
    results = []
    for idx in range(config.n_paths):
        try:
            ic = sample_initial_condition(config, idx)
            results.append(PathResult(path_index=idx, ic=ic))
        except SamplingExhaustedError as exc:
            results.append(PathResult(path_index=idx, error=str(exc)))
    return results


def _run_chunks(chunks, worker, workers: int):
    if workers <= 1 or len(chunks) <= 1:
        return [worker(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, chunks))


def run_ensemble(config: EnsembleConfig, analysis: str, workers: int = 1,
                 record_every: int = 1,
                 renorm_every: int = DEFAULT_RENORM_EVERY,
                 zero_threshold: float = DEFAULT_ZERO_THRESHOLD) -> EnsembleResult:
    """Sample every path's initial condition and run the requested analysis.

    ``analysis`` is one of ``"poincare"``, ``"lyapunov"``, ``"trajectory"``.
    Per-path sampling failures are recorded on the path result and never
    abort the ensemble.  Results are ordered by path index and independent
    of ``workers``.
    """
    if analysis not in ANALYSES:
        raise ValueError(f"analysis must be one of {ANALYSES}")
    if analysis == "poincare" and config.params.model_kind is not ModelKind.STATIC_RISK:
        raise ValueError("section extraction is defined for the static model")

    results = _sample_paths(config)
    ok = [r for r in results if r.error is None]
    chunks = [ok[i:i + _batch.CHUNK_SIZE] for i in range(0, len(ok), _batch.CHUNK_SIZE)]

    if analysis == "trajectory":
        def worker(chunk):
            out = []
            for r in chunk:
                traj = integrate(config.params, r.ic, config.dt, config.n_steps,
                                 scheme=config.scheme, record_every=record_every)
                out.append((traj, traj.status))
            return out

        for chunk, payloads in zip(chunks, _run_chunks(chunks, worker, workers)):
            for r, (traj, status) in zip(chunk, payloads):
                r.trajectory = traj
                r.status = status

    elif analysis == "poincare":
        def worker(chunk):
            arr = np.array([r.ic.as_tuple() for r in chunk])
            t0s = np.array([r.ic.t for r in chunk])
            return _batch.run_orbit_crossings(config.params, arr, t0s,
                                              config.dt, config.n_steps,
                                              config.scheme)

        for chunk, (crossings, statuses) in zip(chunks, _run_chunks(chunks, worker, workers)):
            for r, per_path, status in zip(chunk, crossings, statuses):
                r.crossings = [CrossingPoint(r.path_index, t, x, px)
                               for (t, x, px) in per_path]
                r.status = status

    else:
        def worker(chunk):
            arr = np.array([r.ic.as_tuple() for r in chunk])
            return _batch.run_lyapunov(config.params, arr, config.dt,
                                       config.n_steps, renorm_every,
                                       scheme=config.scheme)

        for chunk, raws in zip(chunks, _run_chunks(chunks, worker, workers)):
            for r, raw in zip(chunk, raws):
                r.spectrum = _spectrum_from_raw(raw, renorm_every, zero_threshold)
                r.status = raw.status

    return EnsembleResult(config=config, analysis=analysis, paths=results)


def run_lyapunov_sweep(config: EnsembleConfig, epsilons, workers: int = 1,
                       renorm_every: int = DEFAULT_RENORM_EVERY,
                       zero_threshold: float = DEFAULT_ZERO_THRESHOLD
                       ) -> list[EnsembleResult]:
    """Lyapunov ensembles over a grid of coupling strengths, batched together.

    Equivalent to one ``run_ensemble(..., "lyapunov")`` per epsilon (same
    seeds, bit-identical spectra), but all paths of the sweep share the
    fixed-size batches, which is considerably faster for the few-paths-per-
    epsilon grids the entropy-trend experiments use.
    """
    sweep = []
    for eps in epsilons:
        cfg = dataclasses.replace(config,
                                  params=dataclasses.replace(config.params,
                                                             epsilon=eps))
        sweep.append((eps, cfg, _sample_paths(cfg)))

    flat = [(cfg, r) for _, cfg, results in sweep
            for r in results if r.error is None]
    chunks = [flat[i:i + _batch.CHUNK_SIZE]
              for i in range(0, len(flat), _batch.CHUNK_SIZE)]

    def worker(chunk):
        arr = np.array([r.ic.as_tuple() for _, r in chunk])
        eps_lanes = np.array([cfg.params.epsilon for cfg, _ in chunk])
        return _batch.run_lyapunov(config.params, arr, config.dt,
                                   config.n_steps, renorm_every,
                                   scheme=config.scheme, eps_lanes=eps_lanes)

    for chunk, raws in zip(chunks, _run_chunks(chunks, worker, workers)):
        for (_, r), raw in zip(chunk, raws):
            r.spectrum = _spectrum_from_raw(raw, renorm_every, zero_threshold)
            r.status = raw.status

    return [EnsembleResult(config=cfg, analysis="lyapunov", paths=results)
            for _, cfg, results in sweep]
