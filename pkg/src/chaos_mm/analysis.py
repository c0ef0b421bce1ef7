"""Orbit diagnostics: surface-of-section extraction, Lyapunov spectra and
the entropy-rate estimate they imply, spectral frequency measurement, and
series utilities for the subsampling experiments.

The section surface is fixed at v = 0 crossed upwards (vdot > 0); crossing
times are refined on cubic Hermite interpolants of the recorded step
endpoints, so stored points satisfy |v| <= 1e-8 without shrinking the step
size.  Lyapunov exponents come from tangent-space propagation with repeated
modified Gram-Schmidt orthonormalisation; the entropy rate is the sum of the
exponents above a zero threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _batch
from .integrate import TerminationStatus
from .models import ModelKind, ModelParams, PhaseState, price_inventory

__all__ = [
    "NoPeakError",
    "CrossingPoint",
    "PoincareSection",
    "LyapunovSpectrum",
    "poincare_section",
    "lyapunov_spectrum",
    "ks_entropy",
    "dominant_frequency",
    "subsample",
    "histogram",
    "ellipse_residual",
    "DEFAULT_RENORM_EVERY",
    "DEFAULT_ZERO_THRESHOLD",
]

DEFAULT_RENORM_EVERY = 10
DEFAULT_ZERO_THRESHOLD = 1e-3


class NoPeakError(ValueError):
    """The spectrum has no non-DC peak (flat or constant series)."""


@dataclass(frozen=True)
class CrossingPoint:
    path_id: int
    t: float
    x: float
    p_x: float


@dataclass
class PoincareSection:
    """Refined v = 0 up-crossings of an ensemble of paths.

    ``condition`` documents the section surface: coordinate, level and
    crossing direction.
    """

    params: ModelParams
    points: list[CrossingPoint]
    path_statuses: list[TerminationStatus]
    energy_target: float | None = None
    condition: tuple[str, float, str] = ("v", 0.0, "up")

    @property
    def n_paths(self) -> int:
        return len(self.path_statuses)

    def points_for(self, path_id: int) -> list[CrossingPoint]:
        return [p for p in self.points if p.path_id == path_id]

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        ids = np.array([p.path_id for p in self.points])
        ts = np.array([p.t for p in self.points])
        xs = np.array([p.x for p in self.points])
        pxs = np.array([p.p_x for p in self.points])
        return ids, ts, xs, pxs


@dataclass
class LyapunovSpectrum:
    """Converged exponent estimates with their convergence history.

    ``exponents`` are sorted descending; ``h_ks`` is the sum of those above
    ``zero_threshold`` (the entropy-rate estimate).  ``history`` holds
    running estimates at checkpoint times in tangent-frame order, kept so
    stabilisation can be asserted.  ``t_span`` is the time actually
    accumulated; it is shorter than requested when the orbit terminated.
    """

    exponents: np.ndarray
    renorm_interval: int
    history_t: np.ndarray
    history: np.ndarray
    h_ks: float
    zero_threshold: float
    t_span: float
    status: TerminationStatus = field(default_factory=TerminationStatus.completed)


def poincare_section(params: ModelParams, ics: list[PhaseState], dt: float,
                     n_steps: int, scheme: str = "yoshida4",
                     energy_target: float | None = None) -> PoincareSection:
    """Integrate each initial condition and collect refined up-crossings.

    Between consecutive steps where the inventory changes sign from negative
    to non-negative, the crossing time is bisected to 1e-12 on the cubic
    Hermite interpolant of v(t) and (x, p_x) are read off the matching
    interpolants.  Paths that terminate contribute crossings up to their
    final step.
    """
    if params.model_kind is not ModelKind.STATIC_RISK:
        raise ValueError("section extraction is defined for the static model")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")

    points: list[CrossingPoint] = []
    statuses: list[TerminationStatus] = []
    for start in range(0, len(ics), _batch.CHUNK_SIZE):
        chunk = ics[start:start + _batch.CHUNK_SIZE]
        arr = np.array([s.as_tuple() for s in chunk])
        t0s = np.array([s.t for s in chunk])
        crossings, st = _batch.run_orbit_crossings(params, arr, t0s, dt,
                                                   n_steps, scheme)
        for local, per_path in enumerate(crossings):
            pid = start + local
            for (t_cross, x_at, px_at) in per_path:
                points.append(CrossingPoint(pid, t_cross, x_at, px_at))
        statuses.extend(st)
    return PoincareSection(params=params, points=points, path_statuses=statuses,
                           energy_target=energy_target)


def _spectrum_from_raw(raw: _batch.RawLyapunov, renorm_every: int,
                       zero_threshold: float) -> LyapunovSpectrum:
    t_span = raw.t_span
    if t_span > 0.0:
        lams = [s / t_span for s in raw.log_sums]
    else:
        lams = [0.0, 0.0, 0.0, 0.0]
    exponents = np.array(sorted(lams, reverse=True))
    h = ks_entropy_from_values(exponents, zero_threshold)
    return LyapunovSpectrum(
        exponents=exponents,
        renorm_interval=renorm_every,
        history_t=np.array(raw.history_t),
        history=np.array(raw.history) if raw.history else np.empty((0, 4)),
        h_ks=h,
        zero_threshold=zero_threshold,
        t_span=t_span,
        status=raw.status,
    )


def lyapunov_spectrum(params: ModelParams, ic: PhaseState, dt: float,
                      n_steps: int, renorm_every: int = DEFAULT_RENORM_EVERY,
                      zero_threshold: float = DEFAULT_ZERO_THRESHOLD,
                      scheme: str = "yoshida4") -> LyapunovSpectrum:
    """Estimate all four Lyapunov exponents along one orbit.

    The reference orbit and four tangent vectors are co-integrated under the
    variational dynamics (tangent kicks use the exact potential Hessian, so
    the tangent map is the Jacobian of the numerical flow).  Early orbit
    termination shortens the accumulated span, reported in ``t_span``.
    """
    if renorm_every < 1:
        raise ValueError("renorm_every must be at least 1")
    raw = _batch.run_lyapunov(params, np.array([ic.as_tuple()]), dt, n_steps,
                              renorm_every, scheme=scheme)[0]
    return _spectrum_from_raw(raw, renorm_every, zero_threshold)


def ks_entropy_from_values(exponents, zero_threshold: float) -> float:
    total = 0.0
    for lam in exponents:
        if lam > zero_threshold:
            total += float(lam)
    return total


def ks_entropy(spectrum: LyapunovSpectrum, zero_threshold: float | None = None
               ) -> float:
    """Entropy-rate estimate: the sum of exponents above the threshold."""
    thr = spectrum.zero_threshold if zero_threshold is None else zero_threshold
    return ks_entropy_from_values(spectrum.exponents, thr)


def dominant_frequency(series, dt: float) -> float:
    """Angular frequency of the strongest non-DC spectral line.

    The series is mean-subtracted, Hann-windowed and transformed; the peak
    bin is refined by quadratic interpolation of log magnitudes, giving
    roughly 1e-3 bin-widths of bias for a clean line.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or y.size < 64:
        raise ValueError("series must be one-dimensional with at least 64 samples")
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    n = y.size
    w = np.hanning(n)
    spec = np.abs(np.fft.rfft((y - y.mean()) * w))
    if spec.size < 3:
        raise NoPeakError("spectrum too short")
    k = 1 + int(np.argmax(spec[1:]))
    # flat series leave only mean-subtraction roundoff; reject peaks at that scale
    dust = 64.0 * np.finfo(float).eps * n * float(np.max(np.abs(y), initial=0.0))
    if spec[k] <= dust or not np.isfinite(spec[k]):
        raise NoPeakError("series has no spectral peak")
    delta = 0.0
    if 1 <= k < spec.size - 1 and spec[k - 1] > 0.0 and spec[k + 1] > 0.0:
        lm = math.log(spec[k - 1])
        l0 = math.log(spec[k])
        lp = math.log(spec[k + 1])
        denom = lm + lp - 2.0 * l0
        if denom != 0.0:
            delta = (lm - lp) / (2.0 * denom)
    return 2.0 * math.pi * (k + delta) / (n * dt)


def subsample(traj, every_n: int, component: str = "x") -> np.ndarray:
    """Every ``every_n``-th sample of one trajectory component, starting at
    index 0.  Component ``v`` is reconstructed as u/x for the models kept in
    price/risk-position coordinates."""
    if every_n < 1:
        raise ValueError("every_n must be at least 1")
    if component == "energy":
        return np.asarray(traj.energies)[::every_n].copy()
    states = traj.states[::every_n]
    if component in ("x", "q1"):
        return np.array([s.q1 for s in states])
    if component in ("p_x", "p1"):
        return np.array([s.p1 for s in states])
    if component in ("p_v", "p2"):
        return np.array([s.p2 for s in states])
    if component == "q2":
        return np.array([s.q2 for s in states])
    if component == "v":
        return np.array([price_inventory(traj.params, s)[1] for s in states])
    if component == "t":
        return np.array([s.t for s in states])
    raise ValueError(f"unknown component {component!r}")


def histogram(series, n_bins: int, value_range: tuple[float, float] | None = None
              ) -> tuple[np.ndarray, np.ndarray]:
    """Uniform-bin histogram: right-open bins with the last bin closed.

    Returns (bin_edges, counts); the default range is [min, max] of the
    series, under which the counts sum to the series length.
    """
    y = np.asarray(series, dtype=float)
    if y.size == 0:
        raise ValueError("cannot histogram an empty series")
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    counts, edges = np.histogram(y, bins=n_bins, range=value_range)
    return edges, counts


def ellipse_residual(xs, ys) -> float:
    """Max radial deviation of points from their best-fit ellipse, relative
    to the semi-major axis.

    Fits a general conic by least squares (smallest singular vector of the
    design matrix), recentres it, and measures |r - r_ellipse| along each
    point's ray from the centre.  Returns ``inf`` when the fit is not an
    ellipse, so non-closed point sets fail any small-threshold test.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size != y.size or x.size < 8:
        raise ValueError("need at least 8 points to fit an ellipse")
    # isotropic normalisation for conditioning
    cx, cy = x.mean(), y.mean()
    scale = max(x.std(), y.std())
    if scale == 0.0:
        return math.inf
    u = (x - cx) / scale
    w = (y - cy) / scale
    M = np.column_stack([u * u, u * w, w * w, u, w, np.ones_like(u)])
    _, _, vt = np.linalg.svd(M, full_matrices=False)
    a, b, c, d, e, f = vt[-1]
    det = 4.0 * a * c - b * b
    if det <= 0.0:
        return math.inf
    uc = (b * e - 2.0 * c * d) / det
    wc = (b * d - 2.0 * a * e) / det
    g = -(a * uc * uc + b * uc * wc + c * wc * wc + d * uc + e * wc + f)
    if g < 0.0:
        a, b, c, g = -a, -b, -c, -g
    quad = np.array([[a, 0.5 * b], [0.5 * b, c]])
    eigs = np.linalg.eigvalsh(quad)
    if eigs[0] <= 0.0 or g <= 0.0:
        return math.inf
    semi_major = math.sqrt(g / eigs[0])
    du = u - uc
    dw = w - wc
    r = np.hypot(du, dw)
    if np.any(r == 0.0):
        return math.inf
    cu = du / r
    cw = dw / r
    q = a * cu * cu + b * cu * cw + c * cw * cw
    if np.any(q <= 0.0):
        return math.inf
    r_ell = np.sqrt(g / q)
    return float(np.max(np.abs(r - r_ell)) / semi_major)
