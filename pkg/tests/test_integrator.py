import math

import numpy as np
import pytest

from funnelfilter.errors import BarrierError
from funnelfilter.integrator import (
    OdeProblem,
    StepRecord,
    dense_eval,
    fixed_step_solve,
    integrate,
    rk45_step,
)

REL, ABS = 1e-8, 1e-6


def decay(t, x):
    return -x


def oscillator(t, x):
    return np.array([x[1], -x[0]])


def forced(t, x):
    # x' = -2x + sin t, x(0) = 1
    return -2.0 * x + math.sin(t)


def forced_exact(t):
    return (6.0 / 5.0) * math.exp(-2 * t) + (2 * math.sin(t) - math.cos(t)) / 5.0


def solve(rhs, x0, t_end, **kw):
    kw.setdefault("rel_tol", REL)
    kw.setdefault("abs_tol", ABS)
    return integrate(OdeProblem(rhs, np.atleast_1d(np.asarray(x0, float)), 0.0, t_end, **kw))


# --- rk45_step -------------------------------------------------------------


def test_step_on_constant_field():
    res = rk45_step(lambda t, x: np.zeros_like(x), 0.0, np.array([1.5, -2.0]), 0.7)
    assert res.x_next.tolist() == [1.5, -2.0]
    assert res.error == 0.0


def test_step_decay():
    res = rk45_step(decay, 0.0, np.array([1.0]), 0.1)
    assert abs(res.x_next[0] - math.exp(-0.1)) <= 1e-8
    assert res.error <= 1.0


def test_step_blowup_is_rejected():
    # x' = x^2, x(0) = 1 has x(t) = 1 / (1 - t)
    res = rk45_step(lambda t, x: x * x, 0.0, np.array([1.0]), 0.9)
    assert res.error > 1.0


def test_step_propagates_barrier():
    def rhs(t, x):
        if x[0] > 1.0:
            raise BarrierError("above one", t)
        return np.ones(1)

    with pytest.raises(BarrierError):
        rk45_step(rhs, 0.0, np.array([0.95]), 0.1)


# --- integrate -------------------------------------------------------------


def test_decay_final_value():
    traj = solve(decay, 1.0, 1.0)
    assert traj.status.completed
    assert abs(traj.states[-1, 0] - math.exp(-1.0)) <= 1e-7


def test_output_grid_shape():
    traj = solve(decay, 1.0, 20.0)
    assert len(traj) == 2001
    assert traj.times[0] == 0.0 and traj.times[-1] == 20.0
    assert np.all(np.diff(traj.times) > 0)
    assert np.all(np.isfinite(traj.states))


def test_grid_with_ragged_end():
    traj = solve(decay, 1.0, 0.105, output_dt=0.01)
    assert traj.times[-1] == 0.105
    assert traj.states[-1, 0] == pytest.approx(math.exp(-0.105), abs=1e-7)


def test_oscillator_returns_after_one_period():
    # at the default absolute tolerance the return error is ~1.2e-6;
    # one decade tighter brings it well under 1e-6
    traj = solve(oscillator, [1.0, 0.0], 2 * math.pi, abs_tol=1e-7)
    assert np.abs(traj.states[-1] - [1.0, 0.0]).max() <= 1e-6


def test_oscillator_energy_drift():
    traj = solve(oscillator, [1.0, 0.0], 2 * math.pi)
    energy = 0.5 * (traj.states**2).sum(axis=1)
    assert np.abs(energy - 0.5).max() <= 1e-5


def test_fixed_step_convergence_order():
    exact = math.exp(-1.0)
    errs = [abs(fixed_step_solve(decay, 0.0, [1.0], 1.0, n)[0] - exact) for n in (10, 20, 40)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 4.5


def test_determinism():
    a = solve(oscillator, [1.0, 0.0], 10.0)
    b = solve(oscillator, [1.0, 0.0], 10.0)
    assert a.times.tobytes() == b.times.tobytes()
    assert a.states.tobytes() == b.states.tobytes()
    assert (a.n_accepted, a.n_rejected) == (b.n_accepted, b.n_rejected)


LINEAR_SET = [
    (decay, [1.0], 5.0, lambda t: [math.exp(-t)]),
    (oscillator, [1.0, 0.0], 10.0, lambda t: [math.cos(t), -math.sin(t)]),
    (forced, [1.0], 10.0, lambda t: [forced_exact(t)]),
]


@pytest.mark.parametrize("rhs,x0,t_end,exact", LINEAR_SET, ids=["decay", "oscillator", "forced"])
def test_tightening_rel_tol_does_not_increase_error(rhs, x0, t_end, exact):
    errs = []
    for rel in (1e-6, 1e-8):
        traj = solve(rhs, x0, t_end, rel_tol=rel, abs_tol=1e-12)
        errs.append(np.abs(traj.states[-1] - exact(t_end)).max())
    assert errs[1] <= errs[0]


def test_problem_validation():
    with pytest.raises(ValueError):
        OdeProblem(decay, [1.0], 1.0, 1.0)
    with pytest.raises(ValueError):
        OdeProblem(decay, [1.0], 0.0, 1.0, rel_tol=0.0)
    with pytest.raises(ValueError):
        OdeProblem(decay, [math.nan], 0.0, 1.0)
    with pytest.raises(ValueError):
        OdeProblem(decay, [1.0], 0.0, 1.0, h_min=0.1, output_dt=0.01)


# --- barriers --------------------------------------------------------------


def test_inadmissible_start_reports_breach():
    def rhs(t, x):
        raise BarrierError("never admissible", t)

    traj = solve(rhs, 0.0, 1.0)
    assert traj.status.kind == "barrier-breach"
    assert traj.status.t == 0.0 and len(traj) == 0


def test_barrier_reached_by_exact_solution():
    # x' = 1 from 0 hits the wall x < 1 at t = 1
    def rhs(t, x):
        if not x[0] < 1.0:
            raise BarrierError("wall", t)
        return np.ones(1)

    traj = solve(rhs, 0.0, 3.0)
    assert traj.status.kind == "barrier-breach"
    assert traj.status.t == pytest.approx(1.0, abs=1e-9)
    assert np.all(traj.states[:, 0] < 1.0)
    assert traj.times[-1] <= 1.0


def test_barrier_near_miss_is_integrated_through():
    # x' = (1 - x): exact solution approaches but never reaches the wall
    def rhs(t, x):
        if not x[0] < 1.0:
            raise BarrierError("wall", t)
        return 1.0 - x

    traj = solve(rhs, 0.0, 30.0)
    assert traj.status.completed
    assert np.all(traj.states[:, 0] < 1.0)


def test_sample_check_rejects_steps_with_inadmissible_samples():
    # admissible set is x < 0.5 except in a narrow window the solver's stages would skip
    calls = []

    def rhs(t, x):
        calls.append(t)
        if 0.3049 < t < 0.3051:
            raise BarrierError("window", t)
        return np.zeros(1)

    traj = solve(rhs, 0.0, 1.0, output_dt=0.005)
    assert traj.status.kind == "barrier-breach"
    assert traj.times[-1] < 0.3049 + 1e-12


def test_blowup_ends_in_underflow_or_breach():
    traj = solve(lambda t, x: x * x, 1.0, 2.0)
    assert not traj.status.completed
    assert traj.status.t < 1.0 + 1e-6
    assert np.all(np.isfinite(traj.states))


# --- dense output ----------------------------------------------------------


def one_step(h, rhs=decay, x0=(1.0,)):
    x = np.array(x0, dtype=float)
    res = rk45_step(rhs, 0.0, x, h)
    return StepRecord.from_step(0.0, h, x, res)


def test_dense_endpoints_are_exact():
    step = one_step(0.3)
    assert dense_eval(step, 0.0).tobytes() == step.x0.tobytes()
    assert dense_eval(step, 0.3).tobytes() == step.x1.tobytes()


def test_dense_endpoint_derivatives():
    h = 0.3
    step = one_step(h)
    d = 1e-6
    left = (dense_eval(step, d) - dense_eval(step, 0.0)) / d
    right = (dense_eval(step, h) - dense_eval(step, h - d)) / d
    assert left[0] == pytest.approx(-step.x0[0], abs=1e-5)
    assert right[0] == pytest.approx(-step.x1[0], abs=1e-5)


def test_dense_outside_step_raises():
    step = one_step(0.1)
    with pytest.raises(ValueError):
        dense_eval(step, 0.11)
    with pytest.raises(ValueError):
        dense_eval(step, -1e-9)


def test_dense_midpoint_error_is_fourth_order():
    hs = [0.4, 0.2, 0.1]
    errs = [abs(dense_eval(one_step(h), h / 2)[0] - math.exp(-h / 2)) for h in hs]
    for h, e in zip(hs, errs):
        assert e <= 1e-2 * h**4
    assert math.log2(errs[0] / errs[1]) >= 4.0 - 0.2
    assert math.log2(errs[1] / errs[2]) >= 4.0 - 0.2
