import types

import numpy as np
import pytest

from exochemo import kernels
from exochemo.errors import LinearSolveFailure, PositivityViolation, StepperError, StepSizeError
from exochemo.evolution import (SchemeParams, State, evolve, make_initial_data, reference_for,
                                stable_dt, step_parabolic, step_pde_ode)
from exochemo.grid import Grid, integrate, trapezoid_weights
from exochemo.stationary import ModelParams


@pytest.mark.parametrize("kw", [dict(dt=0, T=1), dict(dt=1e-3, T=-1), dict(dt=1e-3, T=1, sample_every=0),
                                dict(dt=1e-3, T=1, cfl_safety=1.5), dict(dt=1e-3, T=1, face="upwind")])
def test_scheme_validation(kw):
    with pytest.raises(ValueError):
        SchemeParams(**kw)


def test_nsteps_rounds_up():
    assert SchemeParams(1e-4, 20).nsteps == 200000
    assert SchemeParams(0.3, 1.0).nsteps == 4


def test_initial_data_zero_eps_is_reference(stat01):
    u0, v0 = make_initial_data(stat01, 0.0)
    assert np.array_equal(u0.values, stat01.u_bar.values)
    assert np.array_equal(v0.values, stat01.v_bar.values)


def test_initial_data_preserves_mass(stat01):
    u0, v0 = make_initial_data(stat01, 0.01)
    assert abs(integrate(u0) - integrate(stat01.u_bar)) <= 4 * np.finfo(float).eps
    assert v0.values[0] == v0.values[-1] == 1.0
    u2, _ = make_initial_data(stat01, 0.01, "cosine2")
    assert abs(integrate(u2) - integrate(stat01.u_bar)) <= 4 * np.finfo(float).eps


def test_initial_data_d0(grid401):
    ref = reference_for(ModelParams(0.0), grid401)
    u0, v0 = make_initial_data(ref, 0.01)
    assert abs(integrate(u0) - 1.0) <= 4 * np.finfo(float).eps
    assert v0.min() >= 0.0
    np.testing.assert_allclose(v0.values, 0.01 * (1 + np.sin(np.pi * grid401.x)), atol=1e-17)


def test_initial_data_positivity(stat01):
    with pytest.raises(PositivityViolation):
        make_initial_data(stat01, 10.0)
    with pytest.raises(ValueError):
        make_initial_data(stat01, 0.01, "gaussian")


def test_stable_dt_rejects_large_steps(stat01, model01):
    lim = stable_dt(stat01.v_bar)
    assert 1e-4 < lim < 1.0
    state = State(0.0, stat01.u_bar, stat01.v_bar)
    with pytest.raises(StepSizeError):
        step_parabolic(state, model01, SchemeParams(2 * lim / 0.9, 1.0))


def test_stationary_state_persists_1000_steps(stat01, model01):
    s = State(0.0, stat01.u_bar, stat01.v_bar)
    scheme = SchemeParams(1e-4, 0.1)
    for _ in range(1000):
        s = step_parabolic(s, model01, scheme)
    assert np.max(np.abs(s.u.values - stat01.u_bar.values)) <= 1e-6
    assert abs(s.t - 0.1) < 1e-12


def test_single_step_mass(stat01, model01):
    u0, v0 = make_initial_data(stat01, 0.01)
    s = step_parabolic(State(0.0, u0, v0), model01, SchemeParams(1e-3, 1.0))
    assert abs(integrate(s.u) - integrate(u0)) <= 1e-13
    assert s.v.values[0] == s.v.values[-1] == 1.0


def test_zero_boundary_constant_state_fixed():
    g = Grid(101)
    m = ModelParams(0.1, v_star=0.0, M=1.0)
    s = State(0.0, g.constant(1.0), g.zeros())
    for _ in range(100):
        s = step_parabolic(s, m, SchemeParams(1e-3, 1.0))
    assert np.all(s.u.values == 1.0) and np.all(s.v.values == 0.0)


def test_pde_ode_constant_exponential():
    g = Grid(51)
    m = ModelParams(0.0, M=2.0)
    s = State(0.0, g.constant(2.0), g.constant(0.3))
    sc = SchemeParams(1e-3, 1.0)
    for _ in range(10):
        prev = s.v.values
        s = step_pde_ode(s, m, sc)
        assert np.all(s.u.values == 2.0)
        np.testing.assert_allclose(s.v.values, prev * np.exp(-2e-3), rtol=2e-16)
        assert abs(integrate(s.u) - 2.0) <= 1e-13 * 2.0


def test_stepper_family_mismatch(stat01, model01):
    s = State(0.0, stat01.u_bar, stat01.v_bar)
    with pytest.raises(ValueError):
        step_pde_ode(s, model01, SchemeParams(1e-4, 1))
    with pytest.raises(ValueError):
        step_parabolic(s, ModelParams(0.0), SchemeParams(1e-4, 1))


def test_evolve_bookkeeping(stat01, model01):
    u0, v0 = make_initial_data(stat01, 0.01)
    sc = SchemeParams(1e-3, 0.5, sample_every=7)
    tr = evolve(u0, v0, model01, sc, stat01, keep_states=True)
    t = tr.times
    assert t[0] == 0.0 and np.all(np.diff(t) > 0) and t[-1] >= sc.T - sc.dt
    assert len(tr.states) == len(tr.samples)
    assert tr.final.t == t[-1]
    assert np.all(np.isfinite(tr.column("E_weighted")))
    assert np.all(tr.column("min_u") > 0)


def test_evolve_without_reference_has_no_errors(stat01, model01):
    u0, v0 = make_initial_data(stat01, 0.01)
    tr = evolve(u0, v0, model01, SchemeParams(1e-3, 0.05))
    assert np.all(np.isnan(tr.column("linf_u_err")))
    assert np.all(np.isfinite(tr.column("mass")))


def test_evolve_grid_mismatch(stat01, model01):
    with pytest.raises(ValueError):
        evolve(stat01.u_bar, Grid(11).zeros(), model01, SchemeParams(1e-3, 1))
    with pytest.raises(ValueError):
        evolve(Grid(11).constant(1.0), Grid(11).zeros(), model01, SchemeParams(1e-3, 1), stat01)


def test_evolve_stationary_persistence(stat01, model01):
    tr = evolve(stat01.u_bar, stat01.v_bar, model01, SchemeParams(1e-4, 10.0, 1000), stat01)
    assert np.max(tr.column("linf_u_err")) <= 1e-6


def test_evolve_wraps_failures_with_time(stat01, model01):
    calls = {"n": 0}

    def failing(u, v, nsteps, *a, **k):
        calls["n"] += 1
        if calls["n"] == 3:
            raise LinearSolveFailure("boom")
        kernels.advance_parabolic(u, v, nsteps, *a, **k)

    fake = types.SimpleNamespace(advance_parabolic=failing, advance_pde_ode=None)
    u0, v0 = make_initial_data(stat01, 0.01)
    with pytest.raises(StepperError) as info:
        evolve(u0, v0, model01, SchemeParams(1e-3, 1.0, 10), stat01, backend=fake)
    assert info.value.t == pytest.approx(0.02)
    assert "t=0.02" in str(info.value)


@pytest.mark.parametrize("name", sorted(kernels.available_backends()))
def test_backends_give_same_trajectory(stat01, model01, name):
    u0, v0 = make_initial_data(stat01, 0.01)
    sc = SchemeParams(1e-4, 0.05, 100)
    ref = evolve(u0, v0, model01, sc, stat01)
    tr = evolve(u0, v0, model01, sc, stat01, backend=kernels.available_backends()[name])
    np.testing.assert_allclose(tr.final.u.values, ref.final.u.values, rtol=1e-12)
    np.testing.assert_allclose(tr.final.v.values, ref.final.v.values, rtol=1e-12)


def test_maximum_principle_for_v(stat01, model01):
    u0, v0 = make_initial_data(stat01, 0.01)
    tr = evolve(u0, v0, model01, SchemeParams(1e-4, 1.0, 100), stat01, keep_states=True)
    cap = max(v0.max(), model01.v_star)
    assert all(s.v.max() <= cap + 1e-15 for s in tr.states)


def test_per_step_mass_both_steppers(grid401):
    w = trapezoid_weights(grid401)
    for m in (ModelParams(0.1), ModelParams(0.0)):
        from exochemo.stationary import solve_stationary
        ref = solve_stationary(m, grid401) if m.D > 0 else reference_for(m, grid401)
        u0, v0 = make_initial_data(ref, 0.01)
        s = State(0.0, u0, v0)
        step = step_parabolic if m.D > 0 else step_pde_ode
        for _ in range(20):
            s2 = step(s, m, SchemeParams(1e-4, 1))
            assert abs(w @ s2.u.values - w @ s.u.values) <= 1e-12 * m.M
            s = s2
