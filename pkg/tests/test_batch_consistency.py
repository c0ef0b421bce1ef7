"""Bit-level agreement between the scalar integrator and the vectorised
ensemble kernels.

The ensemble kernels promise that batching never changes any path's doubles.
These tests step identical initial conditions through both lanes and require
exact equality, for every model and both schemes.
"""

import numpy as np
import pytest

from chaos_mm import Kick, ModelParams, PhaseState, Quadratic, step_yoshida4, step_leapfrog
from chaos_mm._batch import _make_batch_force, _scaled_stages
from chaos_mm.integrate import SCHEMES, _make_force


def batch_step_sequence(params, ics, dt, n_steps, scheme):
    force = _make_batch_force(params)
    m1, m2 = params.mass_pair
    stages = _scaled_stages(scheme, dt, m1, m2)
    q1 = ics[:, 0].copy(); q2 = ics[:, 1].copy()
    p1 = ics[:, 2].copy(); p2 = ics[:, 3].copy()
    with np.errstate(all="ignore"):
        for _ in range(n_steps):
            for kdt, d1, d2 in stages:
                g1, g2 = force(q1, q2)
                p1 -= kdt * g1
                p2 -= kdt * g2
                q1 += d1 * p1
                q2 += d2 * p2
    return np.column_stack([q1, q2, p1, p2])


MODELS = [
    ModelParams.static_risk(k_x=0.11, x_0=3.0, epsilon=0.01,
                            inventory_potential=Quadratic(0.1)),
    ModelParams.static_risk(k_x=0.3, x_0=-1.0, epsilon=0.05),
    ModelParams.static_risk(k_x=0.11, x_0=3.0, epsilon=0.02,
                            inventory_potential=Kick(0.2, 1.5)),
    ModelParams.dynamic_risk(k_x=0.11, x_0=3.0, epsilon=0.05),
    ModelParams.limited_depth(k_x=0.11, x_0=3.0, epsilon=0.05,
                              inventory_potential=Quadratic(0.1)),
    ModelParams.limited_depth(k_x=0.11, x_0=3.0, epsilon=0.05,
                              inventory_potential=Kick(0.2, 0.8)),
]


@pytest.mark.parametrize("scheme", ["leapfrog", "yoshida4"])
@pytest.mark.parametrize("params", MODELS, ids=lambda p: f"{p.model_kind.value}-{type(p.inventory_potential).__name__}")
def test_scalar_and_batch_steps_are_bit_identical(params, scheme, rng):
    B, n_steps, dt = 7, 300, 0.01
    # keep prices away from zero so every lane stays in-domain
    ics = np.column_stack([
        3.0 + rng.uniform(-0.8, 0.8, B),
        rng.uniform(-0.9, 0.9, B),
        rng.uniform(-0.4, 0.4, B),
        rng.uniform(-0.4, 0.4, B),
    ])
    batch = batch_step_sequence(params, ics, dt, n_steps, scheme)

    step = step_leapfrog if scheme == "leapfrog" else step_yoshida4
    for b in range(B):
        s = PhaseState(*ics[b], 0.0)
        for _ in range(n_steps):
            s = step(params, s, dt)
        assert (s.q1, s.q2, s.p1, s.p2) == tuple(batch[b]), f"lane {b} diverged"


@pytest.mark.parametrize("params", MODELS,
                         ids=lambda p: f"{p.model_kind.value}-{type(p.inventory_potential).__name__}")
def test_forces_match_bitwise_on_random_points(params, rng):
    scalar_force = _make_force(params)
    batch_force = _make_batch_force(params)
    q1 = 3.0 + rng.uniform(-1.5, 1.5, 64)
    q2 = rng.uniform(-2.0, 2.0, 64)
    G1, G2 = batch_force(q1, q2)
    for i in range(64):
        g1, g2 = scalar_force(float(q1[i]), float(q2[i]))
        assert g1 == G1[i]
        assert g2 == G2[i]


def test_batch_size_does_not_change_lanes(rng):
    params = MODELS[0]
    ics = np.column_stack([
        3.0 + rng.uniform(-0.8, 0.8, 9),
        rng.uniform(-0.9, 0.9, 9),
        rng.uniform(-0.4, 0.4, 9),
        rng.uniform(-0.4, 0.4, 9),
    ])
    full = batch_step_sequence(params, ics, 0.01, 500, "yoshida4")
    frontthree = batch_step_sequence(params, ics[:3], 0.01, 500, "yoshida4")
    single = batch_step_sequence(params, ics[4:5], 0.01, 500, "yoshida4")
    assert np.array_equal(full[:3], frontthree)
    assert np.array_equal(full[4:5], single)


def test_stage_tables_sum_to_unit_step():
    for scheme, stages in SCHEMES.items():
        assert sum(k for k, _ in stages) == pytest.approx(1.0, abs=1e-14)
        assert sum(d for _, d in stages) == pytest.approx(1.0, abs=1e-14)
