import warnings

import numpy as np
import pytest

from dgshock.experiments import advection_smooth_problem, burgers_problem, with_periodic
from dgshock.timestep import (SolverAbort, cfl_limit, oracle_rhs, oracle_solve, ssprk2_step,
                              step_sizes)
from dgshock.weakform import (BCSpec, apply_dirichlet, dirichlet, discretize, element_means, outflow,
                              project, total_mass, total_variation)

from conftest import make_case


def test_ssprk2_decay_example():
    seen = []

    def rhs(y, t):
        seen.append(y)
        return -y

    out = ssprk2_step(rhs, np.array(1.0), 0.0, 0.1)
    assert abs(seen[1] - 0.9) < 1e-15
    assert abs(out - 0.905) < 1e-15


def test_ssprk2_fixed_point_and_constant_rate(rng):
    u = rng.normal(size=(6, 2))
    np.testing.assert_array_equal(ssprk2_step(lambda y, t: np.zeros_like(y), u, 0.0, 0.3), u)
    c = rng.normal(size=(6, 2))
    np.testing.assert_allclose(ssprk2_step(lambda y, t: c, u, 0.0, 0.25), u + 0.25 * c, atol=1e-15)


def test_ssprk2_applies_post_to_both_stages():
    calls = []

    def post(y, t):
        calls.append(t)
        return y * 0 + 1.0

    out = ssprk2_step(lambda y, t: y, np.array(0.0), 0.0, 0.5, post)
    assert calls == [0.5, 0.5]
    assert out == 1.0


def test_ssprk2_errors():
    with pytest.raises(ValueError):
        ssprk2_step(lambda y, t: y, np.ones(2), 0.0, 0.0)
    with pytest.raises(SolverAbort):
        ssprk2_step(lambda y, t: y * np.nan, np.ones(2), 0.0, 0.1)


def test_step_sizes_hit_target_exactly():
    steps = list(step_sizes(0.0, 1.0, 0.3))
    assert len(steps) == 4
    assert abs(sum(steps) - 1.0) < 1e-15
    assert abs(steps[-1] - 0.1) < 1e-12
    assert len(list(step_sizes(0.0, 1.0, 0.004))) == 250
    assert list(step_sizes(0.5, 0.5, 0.1)) == []


def test_oracle_rhs_constant_state_is_steady():
    import dataclasses
    exp, disc = make_case("advection-smooth")
    prob = dataclasses.replace(exp.problem, bc=BCSpec(dirichlet(0.4), outflow()))
    u = np.full(disc.mesh.shape, 0.4)
    assert np.abs(oracle_rhs(u, prob, 0.0, disc)).max() <= 1e-13


def test_oracle_rhs_static_source():
    exp = make_case("static-discontinuity")[0]
    prob = exp.problem
    from dgshock.basis import node_sides
    errs = []
    for K in (64, 128, 256):
        disc = discretize(-2, 2, K)
        rate = prob.analytic(disc.nodes, 1.0, node_sides(disc.mesh)) - prob.analytic(disc.nodes, 0.0, node_sides(disc.mesh))
        errs.append(np.abs(oracle_rhs(project(prob, disc), prob, 0.0, disc) - rate).max())
    assert errs[1] <= 2e-2
    assert errs[0] > errs[1] > errs[2]


def test_advection_accuracy():
    exp, disc = make_case("advection-smooth")
    (u,) = oracle_solve(exp.problem, disc, 0.004, 1.0)
    from dgshock.experiments import error_metrics
    assert error_metrics(u, exp.problem.analytic, disc, 1.0)["L2"] <= 5e-3


def test_initial_snapshot_is_projection():
    exp, disc = make_case("advection-jump")
    first, _ = oracle_solve(exp.problem, disc, 0.004, 0.1, snapshot_times=(0.0, 0.1))
    np.testing.assert_array_equal(first, project(exp.problem, disc))


def test_snapshot_validation():
    exp, disc = make_case("burgers", K=16)
    with pytest.raises(ValueError):
        oracle_solve(exp.problem, disc, 0.01, 0.5, snapshot_times=(0.7,))


def test_burgers_stays_odd():
    exp, disc = make_case("burgers")
    (u,) = oracle_solve(exp.problem, disc, 0.004, 0.5)
    # node (k, n) mirrors node (K-1-k, N_p-1-n)
    assert np.abs(u + u[::-1, ::-1]).max() <= 1e-10


def test_periodic_mass_conservation():
    exp, disc = make_case("advection-smooth")
    prob = with_periodic(exp.problem)
    m0 = total_mass(project(prob, disc), disc)
    (u,) = oracle_solve(prob, disc, 0.004, 4.0)
    assert abs(total_mass(u, disc) - m0) < 1e-10


def test_blow_up_beyond_cfl():
    exp, disc = make_case("advection-smooth", K=32)
    prob = with_periodic(exp.problem)
    h = disc.mesh.h
    stable = cfl_limit(prob, project(prob, disc), disc)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        oracle_solve(prob, disc, stable, 200 * stable)
    dt = 2 * h  # well past the explicit stability limit of P1 DG with SSP-RK2
    with pytest.warns(UserWarning, match="CFL"), pytest.raises(SolverAbort):
        oracle_solve(prob, disc, dt, 2000 * dt)


def test_on_step_callback_counts():
    exp, disc = make_case("burgers", K=16)
    times = []
    oracle_solve(exp.problem, disc, 0.01, 0.2, snapshot_times=(0.05,), on_step=lambda u, t: times.append(t))
    assert len(times) == 20
    assert abs(times[-1] - 0.2) < 1e-12


def test_dirichlet_held_during_march():
    exp, disc = make_case("advection-jump")
    (u,) = oracle_solve(exp.problem, disc, 0.004, 0.2)
    assert u[0, 0] == 0.25
