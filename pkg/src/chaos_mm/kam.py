"""Action-angle machinery for the uncoupled static model and first-order
averaging of the risk coupling.

With both potentials quadratic the uncoupled system is a pair of harmonic
oscillators with angular frequencies omega = sqrt(k/m).  The canonical
transform used here,

    xi = sqrt(2 I / (m omega)) sin(theta),  p = sqrt(2 I m omega) cos(theta),

preserves Hamilton's equations exactly ({x, p_x} = 1, verified numerically by
:func:`canonicality_check`), and gives the uncoupled energy omega_x I_x +
omega_v I_v.  Averaging the coupling eps (x v)^2 / 2 over both angles yields
a closed form in the actions, from which the first-order frequency shifts
follow by differentiation.  :func:`averaged_perturbation` recomputes the
average by quadrature on every call and refuses to return if the two
disagree, keeping the closed form honest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import ModelKind, ModelParams, PhaseState, Quadratic

__all__ = [
    "ActionAngle",
    "FrequencyReport",
    "to_action_angle",
    "from_action_angle",
    "averaged_perturbation",
    "predicted_frequencies",
    "canonicality_check",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ActionAngle:
    """Actions and angles of the two uncoupled oscillators; angles are
    wrapped to [0, 2*pi)."""

    i_x: float
    theta_x: float
    i_v: float
    theta_v: float

    def __post_init__(self) -> None:
        if self.i_x < 0.0 or self.i_v < 0.0:
            raise ValueError("actions must be non-negative")
        object.__setattr__(self, "theta_x", self.theta_x % TWO_PI)
        object.__setattr__(self, "theta_v", self.theta_v % TWO_PI)


@dataclass(frozen=True)
class FrequencyReport:
    """Unperturbed and first-order-shifted angular frequencies."""

    omega_x: float
    omega_v: float
    omega_x_pred: float
    omega_v_pred: float
    resonance_distance: float


def _oscillator_constants(params: ModelParams) -> tuple[float, float, float, float]:
    """(m_x omega_x, omega_x, m_v omega_v, omega_v) with validation."""
    if params.model_kind is not ModelKind.STATIC_RISK:
        raise ValueError("action-angle variables apply to the static model")
    f = params.inventory_potential
    if not isinstance(f, Quadratic):
        raise ValueError("action-angle variables require a quadratic inventory potential")
    if not (params.k_x > 0.0 and f.k_v > 0.0):
        raise ValueError("zero stiffness leaves the oscillation angle undefined")
    omega_x = math.sqrt(params.k_x / params.m_x)
    omega_v = math.sqrt(f.k_v / params.m_v)
    return params.m_x * omega_x, omega_x, params.m_v * omega_v, omega_v


def to_action_angle(params: ModelParams, state: PhaseState) -> ActionAngle:
    """Map a phase-space point to oscillator actions and angles."""
    mwx, _, mwv, _ = _oscillator_constants(params)
    xi = state.q1 - params.x_0
    i_x = 0.5 * (state.p1 * state.p1 / mwx + mwx * xi * xi)
    theta_x = math.atan2(mwx * xi, state.p1) % TWO_PI
    i_v = 0.5 * (state.p2 * state.p2 / mwv + mwv * state.q2 * state.q2)
    theta_v = math.atan2(mwv * state.q2, state.p2) % TWO_PI
    return ActionAngle(i_x=i_x, theta_x=theta_x, i_v=i_v, theta_v=theta_v)


def from_action_angle(params: ModelParams, aa: ActionAngle) -> PhaseState:
    """Inverse of :func:`to_action_angle`; the returned state has t = 0."""
    mwx, _, mwv, _ = _oscillator_constants(params)
    xi = math.sqrt(2.0 * aa.i_x / mwx) * math.sin(aa.theta_x)
    p1 = math.sqrt(2.0 * aa.i_x * mwx) * math.cos(aa.theta_x)
    q2 = math.sqrt(2.0 * aa.i_v / mwv) * math.sin(aa.theta_v)
    p2 = math.sqrt(2.0 * aa.i_v * mwv) * math.cos(aa.theta_v)
    return PhaseState(q1=params.x_0 + xi, q2=q2, p1=p1, p2=p2, t=0.0)


def averaged_perturbation(params: ModelParams, i_x: float, i_v: float,
                          quadrature_nodes: int = 64) -> float:
    """Double angle-average of the coupling energy eps (x v)^2 / 2 at fixed
    actions, normalised by (2 pi)^2.

    Closed form: (eps/2) (x_0^2 + I_x / (m_x omega_x)) I_v / (m_v omega_v).
    The same average is recomputed by trapezoid quadrature through
    :func:`from_action_angle` and must agree to 1e-10, otherwise an
    ArithmeticError is raised.
    """
    if i_x < 0.0 or i_v < 0.0:
        raise ValueError("actions must be non-negative")
    if quadrature_nodes < 64:
        raise ValueError("use at least 64 quadrature nodes per angle")
    mwx, omega_x, mwv, omega_v = _oscillator_constants(params)
    eps = params.epsilon
    x0 = params.x_0
    closed = 0.5 * eps * (x0 * x0 + i_x / mwx) * (i_v / mwv)

    thetas = np.linspace(0.0, TWO_PI, quadrature_nodes + 1)
    vals = np.empty((thetas.size, thetas.size))
    for ix, tx in enumerate(thetas):
        for iv, tv in enumerate(thetas):
            s = from_action_angle(params, ActionAngle(i_x, tx, i_v, tv))
            xv = s.q1 * s.q2
            vals[ix, iv] = 0.5 * eps * xv * xv
    inner = np.trapezoid(vals, thetas, axis=1)
    quad = np.trapezoid(inner, thetas) / (TWO_PI * TWO_PI)

    if abs(quad - closed) > 1e-10 * max(1.0, abs(closed)):
        raise ArithmeticError(
            f"angle-average quadrature {quad!r} disagrees with closed form {closed!r}"
        )
    return closed


def predicted_frequencies(params: ModelParams, i_x: float, i_v: float
                          ) -> FrequencyReport:
    """First-order perturbed frequencies from the averaged coupling.

    omega'_x = omega_x + (eps/2) I_v / (m_x omega_x m_v omega_v) and
    omega'_v = omega_v + (eps/2) (x_0^2 + I_x/(m_x omega_x)) / (m_v omega_v),
    the action derivatives of the averaged coupling energy.
    """
    if i_x < 0.0 or i_v < 0.0:
        raise ValueError("actions must be non-negative")
    mwx, omega_x, mwv, omega_v = _oscillator_constants(params)
    eps = params.epsilon
    x0 = params.x_0
    shift_x = 0.5 * eps * i_v / (mwx * mwv)
    shift_v = 0.5 * eps * (x0 * x0 + i_x / mwx) / mwv
    return FrequencyReport(
        omega_x=omega_x,
        omega_v=omega_v,
        omega_x_pred=omega_x + shift_x,
        omega_v_pred=omega_v + shift_v,
        resonance_distance=abs(omega_x - omega_v),
    )


def canonicality_check(params: ModelParams, n_samples: int = 100,
                       mode: str = "standard", seed: int = 0,
                       step: float = 1e-6) -> float:
    """Numerically verify the price oscillator's transform is canonical.

    Estimates the Poisson bracket {x, p_x} with respect to (theta_x, I_x) by
    central finite differences of the transform and returns the maximum
    |bracket - 1| over random samples.  ``mode`` selects the transform:

    * ``"standard"`` -- the transform used throughout this module;
    * ``"unscaled"`` -- the variant x = sqrt(2 I / m) sin(theta),
      p = sqrt(2 I k) cos(theta), which drops the frequency factor from the
      amplitudes and is canonical only when k = m (its exact bracket is
      sqrt(k/m)).
    """
    if mode not in ("standard", "unscaled"):
        raise ValueError("mode must be 'standard' or 'unscaled'")
    mwx, _, _, _ = _oscillator_constants(params)
    m_x, k_x = params.m_x, params.k_x

    if mode == "standard":
        def transform(i, th):
            xi = math.sqrt(2.0 * i / mwx) * math.sin(th)
            p = math.sqrt(2.0 * i * mwx) * math.cos(th)
            return xi, p
    else:
        def transform(i, th):
            xi = math.sqrt(2.0 * i / m_x) * math.sin(th)
            p = math.sqrt(2.0 * i * k_x) * math.cos(th)
            return xi, p

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        i = 0.1 + rng.random()
        th = TWO_PI * rng.random()
        h_i = step * i
        h_t = step
        x_ip, p_ip = transform(i + h_i, th)
        x_im, p_im = transform(i - h_i, th)
        x_tp, p_tp = transform(i, th + h_t)
        x_tm, p_tm = transform(i, th - h_t)
        dx_di = (x_ip - x_im) / (2.0 * h_i)
        dp_di = (p_ip - p_im) / (2.0 * h_i)
        dx_dt = (x_tp - x_tm) / (2.0 * h_t)
        dp_dt = (p_tp - p_tm) / (2.0 * h_t)
        bracket = dx_dt * dp_di - dx_di * dp_dt
        worst = max(worst, abs(bracket - 1.0))
    return worst
