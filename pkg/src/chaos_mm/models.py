"""Market-maker oscillator models.

Three conservative models of a traded price x coupled to the market makers'
holdings, all sharing a linear restoring force K_x pulling the price towards
its consensus value x_0 and a risk-aversion coupling of strength epsilon
penalising the squared risk position (x*v)^2:

* ``StaticRisk``   -- price x and inventory v are both dynamic, giving the
  Hamiltonian H = p_x^2/2M_x + p_v^2/2M_v + K_x(x-x_0)^2/2 + eps(xv)^2/2 + f(v).
  This is a pair of oscillators with a quartic cross coupling.
* ``DynamicRisk``  -- the risk position u = x*v is itself the dynamic variable.
  In (x, u) coordinates the system separates into two independent harmonic
  oscillators; the inventory is recovered as v = u/x.
* ``LimitedDepth`` -- like DynamicRisk but the inventory is confined by a
  potential f(v) = f(u/x), which couples the oscillators and is singular
  at x = 0.

All functions in this module are pure.  States whose evaluation would require
dividing by a near-zero price raise :class:`SingularityError`, which callers
treat as the trajectory leaving the model's domain of applicability.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SingularityError",
    "ModelKind",
    "Quadratic",
    "Kick",
    "ModelParams",
    "PhaseState",
    "PotentialGrid",
    "energy",
    "grad_potential",
    "hessian_potential",
    "eom_rhs",
    "el_rhs",
    "dynamic_closed_form",
    "price_inventory",
    "potential_grid",
]


class SingularityError(ValueError):
    """Evaluation needed v = u/x with the price too close to zero."""


class ModelKind(enum.Enum):
    STATIC_RISK = "static_risk"
    DYNAMIC_RISK = "dynamic_risk"
    LIMITED_DEPTH = "limited_depth"


@dataclass(frozen=True)
class Quadratic:
    """Inventory potential f(v) = k_v v^2 / 2 (linear restoring force)."""

    k_v: float

    def value(self, v: float) -> float:
        return 0.5 * self.k_v * v * v

    def deriv(self, v: float) -> float:
        return self.k_v * v

    def second(self, v: float) -> float:
        return self.k_v


@dataclass(frozen=True)
class Kick:
    """Inventory potential that is flat inside |v| < v_max and grows linearly
    outside, f(v) = k_v (|v| - v_max), applying a restoring kick of constant
    magnitude k_v once the inventory hits its maximum level.

    The derivative exactly at |v| = v_max takes the inside branch (zero), a
    measure-zero tie-break fixed for reproducibility.
    """

    k_v: float
    v_max: float

    def value(self, v: float) -> float:
        av = abs(v)
        if av >= self.v_max:
            return self.k_v * (av - self.v_max)
        return 0.0

    def deriv(self, v: float) -> float:
        if v > self.v_max:
            return self.k_v
        if v < -self.v_max:
            return -self.k_v
        return 0.0

    def second(self, v: float) -> float:
        return 0.0


InventoryPotential = Quadratic | Kick | None


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of one model instance.

    ``m_v`` is the inventory inertia used by the static model, ``m_u`` the
    risk-position inertia used by the dynamic/limited models; the unused one
    is simply ignored.
    """

    model_kind: ModelKind
    m_x: float = 1.0
    m_v: float = 1.0
    m_u: float = 1.0
    k_x: float = 0.0
    x_0: float = 0.0
    epsilon: float = 0.0
    inventory_potential: InventoryPotential = None

    def __post_init__(self) -> None:
        for name in ("m_x", "m_v", "m_u"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.k_x < 0.0:
            raise ValueError("k_x must be non-negative")
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")
        f = self.inventory_potential
        if isinstance(f, (Quadratic, Kick)):
            if f.k_v < 0.0:
                raise ValueError("k_v must be non-negative")
            if isinstance(f, Kick) and not f.v_max > 0.0:
                raise ValueError("v_max must be strictly positive")
        if self.model_kind is ModelKind.DYNAMIC_RISK and f is not None:
            raise ValueError("DynamicRisk requires inventory_potential=None")
        if self.model_kind is ModelKind.LIMITED_DEPTH and f is None:
            raise ValueError("LimitedDepth requires a Quadratic or Kick inventory potential")

    @classmethod
    def static_risk(cls, m_x=1.0, m_v=1.0, k_x=0.0, x_0=0.0, epsilon=0.0,
                    inventory_potential: InventoryPotential = None) -> "ModelParams":
        return cls(ModelKind.STATIC_RISK, m_x=m_x, m_v=m_v, k_x=k_x, x_0=x_0,
                   epsilon=epsilon, inventory_potential=inventory_potential)

    @classmethod
    def dynamic_risk(cls, m_x=1.0, m_u=1.0, k_x=0.0, x_0=0.0, epsilon=0.0) -> "ModelParams":
        return cls(ModelKind.DYNAMIC_RISK, m_x=m_x, m_u=m_u, k_x=k_x, x_0=x_0,
                   epsilon=epsilon, inventory_potential=None)

    @classmethod
    def limited_depth(cls, m_x=1.0, m_u=1.0, k_x=0.0, x_0=0.0, epsilon=0.0,
                      inventory_potential: InventoryPotential = None) -> "ModelParams":
        return cls(ModelKind.LIMITED_DEPTH, m_x=m_x, m_u=m_u, k_x=k_x, x_0=x_0,
                   epsilon=epsilon, inventory_potential=inventory_potential)

    @property
    def mass_pair(self) -> tuple[float, float]:
        """Inertia of (q1, q2): (m_x, m_v) static, (m_x, m_u) otherwise."""
        if self.model_kind is ModelKind.STATIC_RISK:
            return self.m_x, self.m_v
        return self.m_x, self.m_u

    @property
    def singularity_threshold(self) -> float:
        """Prices with |x| below this cannot support v = u/x reconstruction."""
        return 1e-6 * max(1.0, abs(self.x_0))

    @property
    def coordinates_are_price_risk(self) -> bool:
        """True when (q1, q2) mean (x, u) rather than (x, v)."""
        return self.model_kind is not ModelKind.STATIC_RISK


@dataclass(frozen=True)
class PhaseState:
    """One point of the 4-dimensional phase space at time t.

    (q1, q2) are (x, v) for the static model and (x, u) for the dynamic and
    limited models; (p1, p2) are the conjugate momenta.
    """

    q1: float
    q2: float
    p1: float
    p2: float
    t: float = 0.0

    def __post_init__(self) -> None:
        for name in ("q1", "q2", "p1", "p2", "t"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"PhaseState.{name} must be finite")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.q1, self.q2, self.p1, self.p2)


@dataclass(frozen=True)
class PotentialGrid:
    """Potential energy sampled on the Cartesian product of two axes.

    ``values[i, j]`` is the potential at ``(x_values[i], v_values[j])``.
    """

    x_values: np.ndarray
    v_values: np.ndarray
    values: np.ndarray


def _f_value(params: ModelParams, v: float) -> float:
    f = params.inventory_potential
    return f.value(v) if f is not None else 0.0


def _f_deriv(params: ModelParams, v: float) -> float:
    f = params.inventory_potential
    return f.deriv(v) if f is not None else 0.0


def _f_second(params: ModelParams, v: float) -> float:
    f = params.inventory_potential
    return f.second(v) if f is not None else 0.0


def _check_price(params: ModelParams, q1: float) -> None:
    if abs(q1) < params.singularity_threshold:
        raise SingularityError(
            f"price magnitude {abs(q1):.3e} below domain threshold "
            f"{params.singularity_threshold:.3e}; v = u/x undefined"
        )


def potential_value(params: ModelParams, q1: float, q2: float) -> float:
    """Potential part of the Hamiltonian at positions (q1, q2)."""
    dx = q1 - params.x_0
    if params.model_kind is ModelKind.STATIC_RISK:
        xv = q1 * q2
        return 0.5 * params.k_x * dx * dx + 0.5 * params.epsilon * xv * xv + _f_value(params, q2)
    base = 0.5 * params.k_x * dx * dx + 0.5 * params.epsilon * q2 * q2
    if params.model_kind is ModelKind.LIMITED_DEPTH:
        _check_price(params, q1)
        base += _f_value(params, q2 / q1)
    return base


def energy(params: ModelParams, state: PhaseState) -> float:
    """Total energy H of a phase-space point."""
    m1, m2 = params.mass_pair
    kinetic = 0.5 * state.p1 * state.p1 / m1 + 0.5 * state.p2 * state.p2 / m2
    return kinetic + potential_value(params, state.q1, state.q2)


def grad_potential(params: ModelParams, q1: float, q2: float) -> tuple[float, float]:
    """Gradient (dV/dq1, dV/dq2) of the potential."""
    kx, x0, eps = params.k_x, params.x_0, params.epsilon
    if params.model_kind is ModelKind.STATIC_RISK:
        a = eps * (q2 * q2)
        g1 = kx * (q1 - x0) + a * q1
        b = eps * (q1 * q1)
        g2 = b * q2 + _f_deriv(params, q2)
        return g1, g2
    g1 = kx * (q1 - x0)
    g2 = eps * q2
    if params.model_kind is ModelKind.LIMITED_DEPTH:
        _check_price(params, q1)
        fp = _f_deriv(params, q2 / q1)
        g1 = g1 - fp * (q2 / (q1 * q1))
        g2 = g2 + fp / q1
    return g1, g2


def hessian_potential(params: ModelParams, q1: float, q2: float) -> np.ndarray:
    """Exact 2x2 Hessian of the potential at (q1, q2)."""
    kx, eps = params.k_x, params.epsilon
    if params.model_kind is ModelKind.STATIC_RISK:
        h11 = kx + eps * (q2 * q2)
        h12 = (2.0 * eps) * (q1 * q2)
        h22 = eps * (q1 * q1) + _f_second(params, q2)
        return np.array([[h11, h12], [h12, h22]])
    if params.model_kind is ModelKind.DYNAMIC_RISK:
        return np.array([[kx, 0.0], [0.0, eps]])
    _check_price(params, q1)
    w = q2 / q1
    fp = _f_deriv(params, w)
    fpp = _f_second(params, w)
    x2 = q1 * q1
    x3 = x2 * q1
    x4 = x2 * x2
    h11 = kx + fpp * (q2 * q2) / x4 + (2.0 * fp) * q2 / x3
    h12 = -(fpp * q2) / x3 - fp / x2
    h22 = eps + fpp / x2
    return np.array([[h11, h12], [h12, h22]])


def eom_rhs(params: ModelParams, state: PhaseState) -> tuple[float, float, float, float]:
    """Hamilton's equations: (dq1, dq2, dp1, dp2)/dt at the given state."""
    m1, m2 = params.mass_pair
    g1, g2 = grad_potential(params, state.q1, state.q2)
    return (state.p1 / m1, state.p2 / m2, -g1, -g2)


def el_rhs(params: ModelParams, x: float, v: float, xdot: float, vdot: float
           ) -> tuple[float, float]:
    """Second-order accelerations (x.., v..) in price/inventory coordinates.

    For the dynamic and limited models this is the reduced Euler-Lagrange
    form in (x, v), which is singular at x = 0; the static model's form is
    equivalent to Hamilton's equations everywhere.
    """
    kx, x0, eps = params.k_x, params.x_0, params.epsilon
    if params.model_kind is ModelKind.STATIC_RISK:
        m_x, m_v = params.m_x, params.m_v
        ax = -((kx + eps * v * v) / m_x) * x + (kx / m_x) * x0
        av = -(eps * x * x * v + _f_deriv(params, v)) / m_v
        return ax, av
    _check_price(params, x)
    m_x, m_u = params.m_x, params.m_u
    ax = -(kx / m_x) * (x - x0)
    av = -2.0 * (xdot / x) * vdot - (eps / m_u - kx * (x - x0) / (m_x * x)) * v
    if params.model_kind is ModelKind.LIMITED_DEPTH:
        fp = _f_deriv(params, v)
        ax = ax + (v / x) * fp
        av = av - (1.0 + v / x) * fp
    return ax, av


def _harmonic_evolve(xi0: float, xidot0: float, omega: float, t: float
                     ) -> tuple[float, float]:
    """Evolve a 1-d harmonic displacement; omega = 0 degenerates to drift."""
    if omega == 0.0:
        return xi0 + xidot0 * t, xidot0
    c = math.cos(omega * t)
    s = math.sin(omega * t)
    return xi0 * c + (xidot0 / omega) * s, -xi0 * omega * s + xidot0 * c


def dynamic_closed_form(params: ModelParams, ic: tuple[float, float, float, float],
                        t: float) -> tuple[float, float, float]:
    """Exact solution (x, u, v) of the dynamic model at time t.

    ``ic`` is (x(0), xdot(0), u(0), udot(0)).  The price and the risk
    position evolve as independent harmonic oscillators with angular
    frequencies sqrt(k_x/m_x) and sqrt(epsilon/m_u); the inventory is the
    reconstruction v = u/x, undefined where the price crosses zero.
    """
    if params.model_kind is not ModelKind.DYNAMIC_RISK:
        raise ValueError("closed form applies to the DynamicRisk model only")
    x0, xdot0, u0, udot0 = ic
    omega_x = math.sqrt(params.k_x / params.m_x)
    omega_u = math.sqrt(params.epsilon / params.m_u)
    xi, _ = _harmonic_evolve(x0 - params.x_0, xdot0, omega_x, t)
    x = params.x_0 + xi
    u, _ = _harmonic_evolve(u0, udot0, omega_u, t)
    _check_price(params, x)
    return x, u, u / x


def price_inventory(params: ModelParams, state: PhaseState) -> tuple[float, float]:
    """Market coordinates (x, v) of a state, reconstructing v = u/x when the
    state is kept in price/risk-position coordinates."""
    if params.model_kind is ModelKind.STATIC_RISK:
        return state.q1, state.q2
    _check_price(params, state.q1)
    return state.q1, state.q2 / state.q1


def potential_grid(params: ModelParams, x_range: tuple[float, float],
                   v_range: tuple[float, float], n: int) -> PotentialGrid:
    """Sample the potential on an n-by-n grid of (price, inventory) values.

    The grid is always expressed in (x, v) coordinates; for the dynamic and
    limited models the coupling term is epsilon*(x*v)^2/2 via u = x*v.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    x_lo, x_hi = x_range
    v_lo, v_hi = v_range
    if not (x_hi > x_lo and v_hi > v_lo):
        raise ValueError("grid ranges must be non-degenerate")
    x_values = np.linspace(x_lo, x_hi, n)
    v_values = np.linspace(v_lo, v_hi, n)
    x = x_values[:, None]
    v = v_values[None, :]
    dx = x - params.x_0
    xv = x * v
    values = np.zeros((n, n))
    values += 0.5 * params.k_x * dx * dx
    values += 0.5 * params.epsilon * xv * xv
    f = params.inventory_potential
    if isinstance(f, Quadratic):
        values += 0.5 * f.k_v * v * v
    elif isinstance(f, Kick):
        av = np.abs(v)
        values += np.where(av >= f.v_max, f.k_v * (av - f.v_max), 0.0)
    return PotentialGrid(x_values=x_values, v_values=v_values, values=values)
