"""Vectorised multi-path kernels behind the ensemble and analysis modules.

The kernels advance many independent paths side by side as numpy arrays.
Every update is an elementwise +,-,*,/ or sqrt, whose IEEE-754 results do not
depend on array length or lane position, so a path computed here is
bit-identical to the same path stepped by the scalar integrator, and results
never depend on how paths are grouped into batches or spread over workers.
Transcendental functions are kept out of the stepping loop; the only log
calls happen per path on fixed-size data.

Expression trees intentionally mirror ``integrate._make_force`` and
``models.hessian_potential`` term by term.  Do not "simplify" them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrate import BLOWUP_THRESHOLD, SCHEMES, TerminationStatus, _make_force
from .models import ModelKind, ModelParams, Quadratic

# Paths are processed in fixed-size batches.  The constant never changes with
# worker count or call site, which keeps every execution plan identical.
CHUNK_SIZE = 128


def _make_batch_force(params: ModelParams, eps_lanes=None):
    """Batched potential gradient; ``eps_lanes`` (B,) overrides the scalar
    coupling per lane (elementwise results are unchanged for equal values)."""
    kx = params.k_x
    x0 = params.x_0
    eps = params.epsilon if eps_lanes is None else eps_lanes
    kind = params.model_kind
    f = params.inventory_potential

    if kind is ModelKind.STATIC_RISK:
        if f is None:
            def force(q1, q2):
                a = eps * (q2 * q2)
                b = eps * (q1 * q1)
                return kx * (q1 - x0) + a * q1, b * q2
        elif isinstance(f, Quadratic):
            kv = f.k_v

            def force(q1, q2):
                a = eps * (q2 * q2)
                b = eps * (q1 * q1)
                return kx * (q1 - x0) + a * q1, b * q2 + kv * q2
        else:
            kv = f.k_v
            vmax = f.v_max

            def force(q1, q2):
                a = eps * (q2 * q2)
                b = eps * (q1 * q1)
                fp = np.where(q2 > vmax, kv, np.where(q2 < -vmax, -kv, 0.0))
                return kx * (q1 - x0) + a * q1, b * q2 + fp
        return force

    if kind is ModelKind.DYNAMIC_RISK:
        def force(q1, q2):
            return kx * (q1 - x0), eps * q2
        return force

    if isinstance(f, Quadratic):
        kv = f.k_v

        def fprime(w):
            return kv * w
    else:
        kv = f.k_v
        vmax = f.v_max

        def fprime(w):
            return np.where(w > vmax, kv, np.where(w < -vmax, -kv, 0.0))

    def force(q1, q2):
        fp = fprime(q2 / q1)
        return kx * (q1 - x0) - fp * (q2 / (q1 * q1)), eps * q2 + fp / q1

    return force


def _make_batch_hessian(params: ModelParams, eps_lanes=None):
    """Closure returning (H11, H12, H22) of the potential, batched."""
    kx = params.k_x
    eps = params.epsilon if eps_lanes is None else eps_lanes
    kind = params.model_kind
    f = params.inventory_potential

    if kind is ModelKind.STATIC_RISK:
        fpp = f.k_v if isinstance(f, Quadratic) else 0.0

        def hess(q1, q2):
            h11 = kx + eps * (q2 * q2)
            h12 = (2.0 * eps) * (q1 * q2)
            h22 = eps * (q1 * q1) + fpp
            return h11, h12, h22
        return hess

    if kind is ModelKind.DYNAMIC_RISK:
        def hess(q1, q2):
            z = np.zeros_like(q1)
            return kx + z, z, eps + z
        return hess

    if isinstance(f, Quadratic):
        kv = f.k_v

        def fderivs(w):
            return kv * w, np.full_like(w, kv)
    else:
        kv = f.k_v
        vmax = f.v_max

        def fderivs(w):
            fp = np.where(w > vmax, kv, np.where(w < -vmax, -kv, 0.0))
            return fp, np.zeros_like(w)

    def hess(q1, q2):
        w = q2 / q1
        fp, fpp = fderivs(w)
        x2 = q1 * q1
        x3 = x2 * q1
        x4 = x2 * x2
        h11 = kx + fpp * (q2 * q2) / x4 + (2.0 * fp) * q2 / x3
        h12 = -(fpp * q2) / x3 - fp / x2
        h22 = eps + fpp / x2
        return h11, h12, h22

    return hess


def _scaled_stages(scheme: str, dt: float, m1: float, m2: float):
    return tuple((kc * dt, (dc * dt) / m1, (dc * dt) / m2)
                 for kc, dc in SCHEMES[scheme])


# Cubic Hermite basis on s in [0, 1]; derivatives are per unit s.

def _hermite(s, f0, d0, f1, d1, dt):
    s2 = s * s
    s3 = s2 * s
    return ((2.0 * s3 - 3.0 * s2 + 1.0) * f0 + (s3 - 2.0 * s2 + s) * (dt * d0)
            + (-2.0 * s3 + 3.0 * s2) * f1 + (s3 - s2) * (dt * d1))


def _hermite_deriv(s, f0, d0, f1, d1, dt):
    s2 = s * s
    ds = ((6.0 * s2 - 6.0 * s) * f0 + (3.0 * s2 - 4.0 * s + 1.0) * (dt * d0)
          + (-6.0 * s2 + 6.0 * s) * f1 + (3.0 * s2 - 2.0 * s) * (dt * d1))
    return ds / dt


@dataclass
class _Endpoints:
    """Step-bracketing states and their time derivatives for interpolation."""

    q1_0: float; q2_0: float; p1_0: float; p2_0: float
    q1_1: float; q2_1: float; p1_1: float; p2_1: float
    dq1_0: float; dq2_0: float; dp1_0: float
    dq1_1: float; dq2_1: float; dp1_1: float


def refine_crossing(ends: _Endpoints, dt: float, tol_t: float = 1e-12
                    ) -> tuple[float, float, float, float, float] | None:
    """Locate the v = 0 up-crossing inside one step by bisecting the cubic
    Hermite interpolant of v(t).

    Returns (s, v, vdot, x, p_x) at the refined crossing with s in [0, 1],
    or None when the crossing is not upward (vdot <= 0 there).
    """
    v0, dv0 = ends.q2_0, ends.dq2_0
    v1, dv1 = ends.q2_1, ends.dq2_1
    a, b = 0.0, 1.0
    tol_s = tol_t / dt
    for _ in range(200):
        if (b - a) <= tol_s:
            break
        mid = 0.5 * (a + b)
        if _hermite(mid, v0, dv0, v1, dv1, dt) < 0.0:
            a = mid
        else:
            b = mid
    s = 0.5 * (a + b)
    v_at = _hermite(s, v0, dv0, v1, dv1, dt)
    vdot_at = _hermite_deriv(s, v0, dv0, v1, dv1, dt)
    if not vdot_at > 0.0:
        return None
    x_at = _hermite(s, ends.q1_0, ends.dq1_0, ends.q1_1, ends.dq1_1, dt)
    px_at = _hermite(s, ends.p1_0, ends.dp1_0, ends.p1_1, ends.dp1_1, dt)
    return s, v_at, vdot_at, x_at, px_at


BLOW = 1
SINGULAR = 2


def _status_from_flags(kind: int, step: int) -> TerminationStatus:
    if kind == 0:
        return TerminationStatus.completed()
    if kind == BLOW:
        return TerminationStatus.blow_up(step)
    return TerminationStatus.singularity_exit(step)


def run_orbit_crossings(params: ModelParams, ics: np.ndarray, t0s: np.ndarray,
                        dt: float, n_steps: int, scheme: str
                        ) -> tuple[list[list[tuple[float, float, float]]],
                                   list[TerminationStatus]]:
    """Step a batch of paths, collecting refined v = 0 up-crossings.

    ``ics`` is (B, 4) in integration coordinates.  Returns per-path crossing
    lists of (t_cross, x, p_x) plus per-path termination statuses.  Paths
    contribute crossings only up to termination.
    """
    B = ics.shape[0]
    m1, m2 = params.mass_pair
    force = _make_batch_force(params)
    scalar_force = _make_force(params)
    stages = _scaled_stages(scheme, dt, m1, m2)
    check_price = params.coordinates_are_price_risk
    limited = params.model_kind is ModelKind.LIMITED_DEPTH
    guard = params.singularity_threshold
    thr = BLOWUP_THRESHOLD

    Q1 = ics[:, 0].copy(); Q2 = ics[:, 1].copy()
    P1 = ics[:, 2].copy(); P2 = ics[:, 3].copy()
    Q1p = Q1.copy(); Q2p = Q2.copy(); P1p = P1.copy(); P2p = P2.copy()
    alive = np.ones(B, dtype=bool)
    flag_kind = np.zeros(B, dtype=np.int64)
    flag_step = np.zeros(B, dtype=np.int64)
    crossings: list[list[tuple[float, float, float]]] = [[] for _ in range(B)]

    with np.errstate(all="ignore"):
        for i in range(1, n_steps + 1):
            np.copyto(Q1p, Q1); np.copyto(Q2p, Q2)
            np.copyto(P1p, P1); np.copyto(P2p, P2)
            for kdt, d1, d2 in stages:
                if limited:
                    sing = alive & (np.abs(Q1) < guard)
                    if sing.any():
                        flag_kind[sing] = SINGULAR
                        flag_step[sing] = i
                        alive &= ~sing
                G1, G2 = force(Q1, Q2)
                P1 -= kdt * G1
                P2 -= kdt * G2
                Q1 += d1 * P1
                Q2 += d2 * P2
            bad = alive & ((np.abs(Q1) > thr) | (np.abs(Q2) > thr)
                           | (np.abs(P1) > thr) | (np.abs(P2) > thr))
            if bad.any():
                flag_kind[bad] = BLOW
                flag_step[bad] = i
                alive &= ~bad
            if check_price:
                sing = alive & ((np.abs(Q1) < guard) | ((Q1 > 0.0) != (Q1p > 0.0)))
                if sing.any():
                    flag_kind[sing] = SINGULAR
                    flag_step[sing] = i
                    alive &= ~sing
            crossed = alive & (Q2p < 0.0) & (Q2 >= 0.0)
            if crossed.any():
                for b in np.nonzero(crossed)[0]:
                    b = int(b)
                    g1_0, g2_0 = scalar_force(float(Q1p[b]), float(Q2p[b]))
                    g1_1, g2_1 = scalar_force(float(Q1[b]), float(Q2[b]))
                    ends = _Endpoints(
                        q1_0=float(Q1p[b]), q2_0=float(Q2p[b]),
                        p1_0=float(P1p[b]), p2_0=float(P2p[b]),
                        q1_1=float(Q1[b]), q2_1=float(Q2[b]),
                        p1_1=float(P1[b]), p2_1=float(P2[b]),
                        dq1_0=float(P1p[b]) / m1, dq2_0=float(P2p[b]) / m2,
                        dp1_0=-g1_0,
                        dq1_1=float(P1[b]) / m1, dq2_1=float(P2[b]) / m2,
                        dp1_1=-g1_1,
                    )
                    hit = refine_crossing(ends, dt)
                    if hit is None:
                        continue
                    s, _v_at, _vdot_at, x_at, px_at = hit
                    t_cross = (float(t0s[b]) + (i - 1) * dt) + s * dt
                    crossings[b].append((t_cross, x_at, px_at))
            if not alive.any():
                break

    statuses = [_status_from_flags(int(flag_kind[b]), int(flag_step[b]))
                for b in range(B)]
    return crossings, statuses


@dataclass
class RawLyapunov:
    """Per-path output of the batched tangent-space propagation."""

    log_sums: list[float]
    t_span: float
    status: TerminationStatus
    history_t: list[float]
    history: list[list[float]]


def run_lyapunov(params: ModelParams, ics: np.ndarray, dt: float, n_steps: int,
                 renorm_every: int, scheme: str = "yoshida4",
                 n_checkpoints: int = 512, eps_lanes=None) -> list[RawLyapunov]:
    """Co-integrate reference orbits and 4 tangent vectors per path.

    The tangent frame is advanced by the exact Jacobian of each kick/drift
    stage (kick: dp -= dt_k * Hess(q) dq, drift: dq += dt_d * M^-1 dp), i.e.
    the variational equations are split exactly like the orbit.  Every
    ``renorm_every`` steps the frame is re-orthonormalised by modified
    Gram-Schmidt and the log norms accumulate into the exponent estimates.

    ``eps_lanes`` lets paths of a coupling sweep share one batch; a lane's
    arithmetic is identical to a scalar-coupling run with that epsilon.
    """
    B = ics.shape[0]
    m1, m2 = params.mass_pair
    force = _make_batch_force(params, eps_lanes)
    hess = _make_batch_hessian(params, eps_lanes)
    stages = _scaled_stages(scheme, dt, m1, m2)
    check_price = params.coordinates_are_price_risk
    limited = params.model_kind is ModelKind.LIMITED_DEPTH
    guard = params.singularity_threshold
    thr = BLOWUP_THRESHOLD

    Q1 = ics[:, 0].copy(); Q2 = ics[:, 1].copy()
    P1 = ics[:, 2].copy(); P2 = ics[:, 3].copy()
    # T[b, c, j]: component c of tangent vector j for path b.
    T = np.tile(np.eye(4), (B, 1, 1))
    alive = np.ones(B, dtype=bool)
    flag_kind = np.zeros(B, dtype=np.int64)
    flag_step = np.zeros(B, dtype=np.int64)
    S = [[0.0, 0.0, 0.0, 0.0] for _ in range(B)]
    acc_step = [0] * B
    hist_t: list[list[float]] = [[] for _ in range(B)]
    hist: list[list[list[float]]] = [[] for _ in range(B)]

    n_renorms = n_steps // renorm_every
    ckpt_stride = max(1, n_renorms // max(1, n_checkpoints))
    renorm_count = 0

    def renorm_and_accumulate(step_idx: int) -> None:
        nonlocal renorm_count
        renorm_count += 1
        norms = np.empty((B, 4))
        for j in range(4):
            w = T[:, :, j]
            for k in range(j):
                q = T[:, :, k]
                d = (w[:, 0] * q[:, 0] + w[:, 1] * q[:, 1]
                     + w[:, 2] * q[:, 2] + w[:, 3] * q[:, 3])
                w -= d[:, None] * q
            n2 = (w[:, 0] * w[:, 0] + w[:, 1] * w[:, 1]
                  + w[:, 2] * w[:, 2] + w[:, 3] * w[:, 3])
            nj = np.sqrt(n2)
            w /= nj[:, None]
            norms[:, j] = nj
        record = (renorm_count % ckpt_stride == 0) or (step_idx == n_steps)
        for b in range(B):
            if not alive[b]:
                continue
            row = norms[b]
            Sb = S[b]
            Sb[0] += math.log(row[0])
            Sb[1] += math.log(row[1])
            Sb[2] += math.log(row[2])
            Sb[3] += math.log(row[3])
            acc_step[b] = step_idx
            if record:
                t_el = step_idx * dt
                hist_t[b].append(t_el)
                hist[b].append([Sb[0] / t_el, Sb[1] / t_el,
                                Sb[2] / t_el, Sb[3] / t_el])

    with np.errstate(all="ignore"):
        for i in range(1, n_steps + 1):
            Q1p = Q1.copy()
            for kdt, d1, d2 in stages:
                if limited:
                    sing = alive & (np.abs(Q1) < guard)
                    if sing.any():
                        flag_kind[sing] = SINGULAR
                        flag_step[sing] = i
                        alive &= ~sing
                G1, G2 = force(Q1, Q2)
                H11, H12, H22 = hess(Q1, Q2)
                P1 -= kdt * G1
                P2 -= kdt * G2
                T[:, 2, :] -= kdt * (H11[:, None] * T[:, 0, :] + H12[:, None] * T[:, 1, :])
                T[:, 3, :] -= kdt * (H12[:, None] * T[:, 0, :] + H22[:, None] * T[:, 1, :])
                Q1 += d1 * P1
                Q2 += d2 * P2
                T[:, 0, :] += d1 * T[:, 2, :]
                T[:, 1, :] += d2 * T[:, 3, :]
            bad = alive & ((np.abs(Q1) > thr) | (np.abs(Q2) > thr)
                           | (np.abs(P1) > thr) | (np.abs(P2) > thr))
            if bad.any():
                flag_kind[bad] = BLOW
                flag_step[bad] = i
                alive &= ~bad
            if check_price:
                sing = alive & ((np.abs(Q1) < guard) | ((Q1 > 0.0) != (Q1p > 0.0)))
                if sing.any():
                    flag_kind[sing] = SINGULAR
                    flag_step[sing] = i
                    alive &= ~sing
            if i % renorm_every == 0 or i == n_steps:
                renorm_and_accumulate(i)
            if not alive.any():
                break

    out = []
    for b in range(B):
        status = _status_from_flags(int(flag_kind[b]), int(flag_step[b]))
        out.append(RawLyapunov(log_sums=S[b], t_span=acc_step[b] * dt,
                               status=status, history_t=hist_t[b], history=hist[b]))
    return out
