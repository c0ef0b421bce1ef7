"""Fixed-step integrators and trajectory recording.

The Hamiltonians of all three models are separable, H = T(p) + V(q), so the
workhorse schemes are splitting methods: the second-order Stoermer-Verlet
leapfrog and its fourth-order triple-jump composition.  A classical
non-symplectic Runge-Kutta integrator for the second-order price/inventory
equations provides an independent cross-check route.

Integration halts early when a state component exceeds ``BLOWUP_THRESHOLD``
in magnitude, or, for the models that reconstruct v = u/x, when the price
crosses or approaches zero.  Abnormal termination is recorded in the
trajectory status rather than raised.

Bit-reproducibility note: every arithmetic expression here is mirrored
operation-for-operation by the vectorised ensemble kernels, so single-path
and batched runs of the same configuration produce identical doubles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import (
    ModelKind,
    ModelParams,
    PhaseState,
    Quadratic,
    SingularityError,
    energy,
    el_rhs,
)

__all__ = [
    "BLOWUP_THRESHOLD",
    "YOSHIDA_W0",
    "YOSHIDA_W1",
    "TerminationStatus",
    "Trajectory",
    "SecondOrderTrajectory",
    "step_leapfrog",
    "step_yoshida4",
    "integrate",
    "integrate_el_rk4",
]

BLOWUP_THRESHOLD = 1e12

# Triple-jump composition coefficients: w1 = 1/(2 - 2^(1/3)), w0 = 1 - 2 w1.
YOSHIDA_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
YOSHIDA_W0 = 1.0 - 2.0 * YOSHIDA_W1

# Kick/drift stage tables as (kick_coefficient, drift_coefficient) pairs.
# Adjacent half-kicks of the composed leapfrog substeps are merged, which
# leaves the palindromic 4-kick/3-drift sequence below.
_LEAPFROG_STAGES = ((0.5, 1.0), (0.5, 0.0))
_YOSHIDA4_STAGES = (
    (YOSHIDA_W1 / 2.0, YOSHIDA_W1),
    ((YOSHIDA_W0 + YOSHIDA_W1) / 2.0, YOSHIDA_W0),
    ((YOSHIDA_W0 + YOSHIDA_W1) / 2.0, YOSHIDA_W1),
    (YOSHIDA_W1 / 2.0, 0.0),
)

SCHEMES = {"leapfrog": _LEAPFROG_STAGES, "yoshida4": _YOSHIDA4_STAGES}


@dataclass(frozen=True)
class TerminationStatus:
    """How a trajectory ended: normally, by blow-up, or by domain exit."""

    kind: str
    step: int | None = None

    @property
    def is_completed(self) -> bool:
        return self.kind == "completed"

    @classmethod
    def completed(cls) -> "TerminationStatus":
        return cls("completed")

    @classmethod
    def blow_up(cls, step: int) -> "TerminationStatus":
        return cls("blow_up", step)

    @classmethod
    def singularity_exit(cls, step: int) -> "TerminationStatus":
        return cls("singularity_exit", step)


@dataclass
class Trajectory:
    """Uniformly sampled orbit with its energy record.

    ``dt`` is the sample spacing ``record_every * step_dt``, so that
    ``states[i].t == t0 + i * dt`` up to one rounding.  On abnormal
    termination the samples stop before the flagged step; the flagged state
    itself is never recorded.
    """

    dt: float
    step_dt: float
    record_every: int
    params: ModelParams
    states: list[PhaseState]
    energies: np.ndarray
    status: TerminationStatus

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def component(self, name: str) -> np.ndarray:
        """Extract one raw phase-space component across samples."""
        return np.array([getattr(s, name) for s in self.states])


@dataclass
class SecondOrderTrajectory:
    """Record of a second-order (x, v, xdot, vdot) integration."""

    dt: float
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    xdot: np.ndarray
    vdot: np.ndarray
    status: TerminationStatus


def _make_force(params: ModelParams):
    """Scalar force closure returning the potential gradient at (q1, q2).

    The expression trees here deliberately match ``models.grad_potential``
    and the batched kernels term for term.
    """
    kx = params.k_x
    x0 = params.x_0
    eps = params.epsilon
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
                fp = kv if q2 > vmax else (-kv if q2 < -vmax else 0.0)
                return kx * (q1 - x0) + a * q1, b * q2 + fp
        return force

    if kind is ModelKind.DYNAMIC_RISK:
        def force(q1, q2):
            return kx * (q1 - x0), eps * q2
        return force

    guard = params.singularity_threshold
    if isinstance(f, Quadratic):
        kv = f.k_v

        def fprime(w):
            return kv * w
    else:
        kv = f.k_v
        vmax = f.v_max

        def fprime(w):
            return kv if w > vmax else (-kv if w < -vmax else 0.0)

    def force(q1, q2):
        if abs(q1) < guard:
            raise SingularityError("price too close to zero for inventory forces")
        fp = fprime(q2 / q1)
        return kx * (q1 - x0) - fp * (q2 / (q1 * q1)), eps * q2 + fp / q1

    return force


def _apply_stages(force, m1, m2, q1, q2, p1, p2, dt, stages):
    for kc, dc in stages:
        g1, g2 = force(q1, q2)
        kdt = kc * dt
        p1 = p1 - kdt * g1
        p2 = p2 - kdt * g2
        d1 = (dc * dt) / m1
        d2 = (dc * dt) / m2
        q1 = q1 + d1 * p1
        q2 = q2 + d2 * p2
    return q1, q2, p1, p2


def step_leapfrog(params: ModelParams, state: PhaseState, dt: float) -> PhaseState:
    """One kick-drift-kick leapfrog step: half-kick the momenta with the
    potential gradient, drift the positions, half-kick again."""
    m1, m2 = params.mass_pair
    force = _make_force(params)
    q1, q2, p1, p2 = _apply_stages(force, m1, m2, state.q1, state.q2,
                                   state.p1, state.p2, dt, _LEAPFROG_STAGES)
    return PhaseState(q1, q2, p1, p2, state.t + dt)


def step_yoshida4(params: ModelParams, state: PhaseState, dt: float) -> PhaseState:
    """One fourth-order step: leapfrog substeps of sizes w1*dt, w0*dt, w1*dt
    with the interior half-kicks merged."""
    m1, m2 = params.mass_pair
    force = _make_force(params)
    q1, q2, p1, p2 = _apply_stages(force, m1, m2, state.q1, state.q2,
                                   state.p1, state.p2, dt, _YOSHIDA4_STAGES)
    return PhaseState(q1, q2, p1, p2, state.t + dt)


def integrate(params: ModelParams, ic: PhaseState, dt: float, n_steps: int,
              scheme: str = "yoshida4", record_every: int = 1) -> Trajectory:
    """Integrate an orbit, recording every ``record_every``-th step.

    Returns a :class:`Trajectory`; blow-up and domain exit truncate the
    recording and are reported through ``status``, never raised.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if record_every < 1:
        raise ValueError("record_every must be at least 1")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")

    m1, m2 = params.mass_pair
    force = _make_force(params)
    scaled = tuple((kc * dt, (dc * dt) / m1, (dc * dt) / m2)
                   for kc, dc in SCHEMES[scheme])
    check_price = params.coordinates_are_price_risk
    guard = params.singularity_threshold
    thr = BLOWUP_THRESHOLD

    q1, q2, p1, p2 = ic.q1, ic.q2, ic.p1, ic.p2
    t0 = ic.t
    states = [ic]
    energies = [energy(params, ic)]
    status = TerminationStatus.completed()

    for i in range(1, n_steps + 1):
        q1_prev = q1
        try:
            for kdt, d1, d2 in scaled:
                g1, g2 = force(q1, q2)
                p1 = p1 - kdt * g1
                p2 = p2 - kdt * g2
                q1 = q1 + d1 * p1
                q2 = q2 + d2 * p2
        except SingularityError:
            status = TerminationStatus.singularity_exit(i)
            break
        if abs(q1) > thr or abs(q2) > thr or abs(p1) > thr or abs(p2) > thr:
            status = TerminationStatus.blow_up(i)
            break
        if check_price and (abs(q1) < guard or (q1 > 0.0) != (q1_prev > 0.0)):
            status = TerminationStatus.singularity_exit(i)
            break
        if i % record_every == 0:
            s = PhaseState(q1, q2, p1, p2, t0 + i * dt)
            states.append(s)
            energies.append(energy(params, s))

    return Trajectory(dt=dt * record_every, step_dt=dt, record_every=record_every,
                      params=params, states=states,
                      energies=np.array(energies), status=status)


def integrate_el_rk4(params: ModelParams, ic: tuple[float, float, float, float],
                     dt: float, n_steps: int, x_min: float | None = None
                     ) -> SecondOrderTrajectory:
    """Classical 4-stage Runge-Kutta on the second-order price/inventory
    equations, reduced to first order.

    ``x_min`` sets the price magnitude below which the dynamic/limited
    models are declared out of domain; it defaults to the reconstruction
    guard of ``params``.  A sign change of the price between steps exits
    for the same reason.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    check_price = params.coordinates_are_price_risk
    if x_min is None:
        x_min = params.singularity_threshold
    thr = BLOWUP_THRESHOLD

    x = np.empty(n_steps + 1)
    v = np.empty(n_steps + 1)
    xd = np.empty(n_steps + 1)
    vd = np.empty(n_steps + 1)
    x[0], v[0], xd[0], vd[0] = ic

    def rhs(y):
        ax, av = el_rhs(params, y[0], y[1], y[2], y[3])
        return (y[2], y[3], ax, av)

    half = 0.5 * dt
    sixth = dt / 6.0
    y = tuple(float(c) for c in ic)
    status = TerminationStatus.completed()
    n_done = 0
    for i in range(1, n_steps + 1):
        x_prev = y[0]
        try:
            k1 = rhs(y)
            k2 = rhs(tuple(y[j] + half * k1[j] for j in range(4)))
            k3 = rhs(tuple(y[j] + half * k2[j] for j in range(4)))
            k4 = rhs(tuple(y[j] + dt * k3[j] for j in range(4)))
        except SingularityError:
            status = TerminationStatus.singularity_exit(i)
            break
        y = tuple(y[j] + sixth * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j])
                  for j in range(4))
        if any(abs(c) > thr for c in y):
            status = TerminationStatus.blow_up(i)
            break
        if check_price and (abs(y[0]) <= x_min or (y[0] > 0.0) != (x_prev > 0.0)):
            status = TerminationStatus.singularity_exit(i)
            break
        x[i], v[i], xd[i], vd[i] = y
        n_done = i

    n = n_done + 1
    t = np.arange(n) * dt
    return SecondOrderTrajectory(dt=dt, t=t, x=x[:n], v=v[:n],
                                 xdot=xd[:n], vdot=vd[:n], status=status)
