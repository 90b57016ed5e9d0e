"""Closed-loop assembly, runs, metrics, sweeps and side-by-side comparisons."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..controllers import (
    FeasibilityReport,
    FilterControllerParams,
    check_feasibility,
    comparison_control_output,
    filter_control_output,
)
from ..integrator import OdeProblem, Status, Trajectory, integrate
from ..plant import plant_rhs
from .scenario import Scenario


class InfeasibleScenario(Exception):
    """The filter controller's start conditions do not hold."""

    def __init__(self, report: FeasibilityReport):
        super().__init__(report.summary())
        self.report = report


class PreconditionError(ValueError):
    """Two scenarios cannot be compared."""


@dataclass(frozen=True)
class Metrics:
    max_funnel_occupancy: float
    max_theta_ratio: Optional[float]
    sup_u: float
    tv_u: float
    final_abs_error: float
    # filter-bound check: max |xi|, max |xi*| over samples and |xi0|
    max_xi_norm: Optional[float] = None
    max_xi_star_norm: Optional[float] = None
    xi0_norm: Optional[float] = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class RunResult:
    scenario: Scenario
    trajectory: Trajectory
    feasibility: Optional[FeasibilityReport]
    columns: dict = field(default_factory=dict)  # name -> (n_samples,) or (n_samples, k)
    metrics: Optional[Metrics] = None

    @property
    def status(self) -> Status:
        return self.trajectory.status

    @property
    def completed(self) -> bool:
        return self.status.completed

    @property
    def times(self) -> np.ndarray:
        return self.trajectory.times

    @property
    def y(self) -> np.ndarray:
        return self.columns["y"]


class ClosedLoop:
    """State layout ``[y, y', controller state, operator state]``."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.plant = scenario.plant()
        self.operator = self.plant.new_operator()
        self.params = scenario.controller_params()
        self.funnel = scenario.funnel()
        self.reference = self.params.y_ref
        self.is_filter = isinstance(self.params, FilterControllerParams)
        m = self.m = self.plant.m
        k = m if self.is_filter else 2 * m
        self.n_ctrl = k
        self.i_ctrl = 2 * m
        self.i_op = 2 * m + k

    def x0(self) -> np.ndarray:
        p = self.plant
        if self.is_filter:
            ctrl = self.params.xi0
        else:
            ctrl = np.concatenate([self.params.z1_0, self.params.z2_0])
        return np.concatenate([p.y0, p.ydot0, ctrl, self.operator.initial_state()])

    def split(self, x):
        m, i, j = self.m, self.i_ctrl, self.i_op
        return x[:m], x[m:i], x[i:j], x[j:]

    def control(self, t, x):
        y, _, c, _ = self.split(x)
        if self.is_filter:
            return filter_control_output(self.params, c, y, t)
        m = self.m
        return comparison_control_output(self.params, c[:m], c[m:], y, t)

    def rhs(self, t, x):
        y, yd, c, eta = self.split(x)
        out = self.control(t, x)
        u = out.u
        if self.is_filter:
            c_dot = u - c
        else:
            pr = self.params
            innov = y - c[: self.m]
            z2_dot = (pr.q2 + pr.p2 * out.k2) * innov + pr.Gamma_tilde @ u
            c_dot = np.concatenate([out.z1_dot, z2_dot])
        w = self.operator.output(t, y, yd, eta)
        y_dot, yd_dot = plant_rhs(self.plant, t, y, yd, u, w)
        eta_dot = self.operator.state_deriv(t, y, yd, eta)
        return np.concatenate([y_dot, yd_dot, c_dot, eta_dot])

    def problem(self) -> OdeProblem:
        sim = self.scenario.sim
        m = self.m
        op = self.operator
        return OdeProblem(
            rhs=self.rhs,
            x0=self.x0(),
            t0=0.0,
            t_end=sim["t_end"],
            rel_tol=sim["rel_tol"],
            abs_tol=sim["abs_tol"],
            output_dt=sim["output_dt"],
            max_step=op.max_step(),
            on_accept=lambda step: op.record(step, slice(0, m)),
        )

    def columns(self, traj: Trajectory) -> dict:
        """Recompute controller outputs at every sample of ``traj``."""
        m, n = self.m, len(traj)
        X = traj.states
        cols = {
            "y": X[:, :m],
            "ydot": X[:, m : 2 * m],
            "ctrl": X[:, self.i_ctrl : self.i_op],
            "eta": X[:, self.i_op :],
        }
        u = np.empty((n, m))
        e = np.empty((n, m))
        phi = np.empty(n)
        extra = np.empty((n, 1 if self.is_filter else 3))
        xi_star = np.empty((n, m)) if self.is_filter else None
        for k in range(n):
            t = float(traj.times[k])
            out = self.control(t, X[k])
            u[k] = out.u
            e[k] = X[k, :m] - self.reference.eval(t)
            phi[k] = self.funnel.eval(t)
            if self.is_filter:
                extra[k, 0] = math.sqrt(float(np.dot(out.theta, out.theta)))
                xi_star[k] = out.xi_star
            else:
                extra[k] = (out.k0, out.k1, out.k2)
        cols.update(u=u, e=e, phi=phi)
        if self.is_filter:
            cols["theta_norm"] = extra[:, 0]
            cols["xi_star"] = xi_star
        else:
            cols["gains"] = extra
        return cols


def compute_metrics(cl: ClosedLoop, cols: dict) -> Metrics:
    e, u, phi = cols["e"], cols["u"], cols["phi"]
    if len(phi) == 0:
        nan = math.nan
        return Metrics(nan, nan if cl.is_filter else None, nan, nan, nan)
    e_norm = np.linalg.norm(e, axis=1)
    u_norm = np.linalg.norm(u, axis=1)
    occupancy = phi * e_norm
    tv = float(np.linalg.norm(np.diff(u, axis=0), axis=1).sum()) if len(u) > 1 else 0.0
    kw = {}
    theta_ratio = None
    if cl.is_filter:
        theta_ratio = float(cols["theta_norm"].max() / cl.params.theta_hat)
        kw = dict(
            max_xi_norm=float(np.linalg.norm(cols["ctrl"], axis=1).max()),
            max_xi_star_norm=float(np.linalg.norm(cols["xi_star"], axis=1).max()),
            xi0_norm=float(np.linalg.norm(cl.params.xi0)),
        )
    return Metrics(
        max_funnel_occupancy=float(occupancy.max()),
        max_theta_ratio=theta_ratio,
        sup_u=float(u_norm.max()),
        tv_u=tv,
        final_abs_error=float(e_norm[-1]),
        **kw,
    )


def feasibility(scenario: Scenario) -> Optional[FeasibilityReport]:
    """Start-condition report for filter scenarios, ``None`` otherwise."""
    params = scenario.controller_params()
    if not isinstance(params, FilterControllerParams):
        return None
    return check_feasibility(params, scenario.plant().y0, 0.0)


def run_scenario(scenario: Scenario, allow_infeasible: bool = False) -> RunResult:
    """Run one closed loop.

    Raises :class:`InfeasibleScenario` for filter scenarios whose start
    conditions fail, unless ``allow_infeasible`` is set.
    """
    report = feasibility(scenario)
    if report is not None and not report.feasible and not allow_infeasible:
        raise InfeasibleScenario(report)
    cl = ClosedLoop(scenario)
    traj = integrate(cl.problem())
    cols = cl.columns(traj)
    return RunResult(scenario, traj, report, cols, compute_metrics(cl, cols))


# ---------------------------------------------------------------------------
# sweeps and comparisons
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    value: float
    status: str
    metrics: Optional[Metrics]
    sup_distance: Optional[float]  # sup_t |y(t) - y_first(t)|
    error: Optional[str] = None


def _sweep_member(args):
    scenario, allow_infeasible = args
    try:
        return run_scenario(scenario, allow_infeasible), None
    except InfeasibleScenario as exc:
        return None, f"infeasible: violates {exc.report.hypothesis}"
    except Exception as exc:  # noqa: BLE001 - recorded per row
        return None, f"{type(exc).__name__}: {exc}"


def output_distance(a: RunResult, b: RunResult) -> float:
    """Sup-norm distance between the sampled outputs on the common grid."""
    n = min(len(a.times), len(b.times))
    if n == 0:
        return math.nan
    if not np.array_equal(a.times[:n], b.times[:n]):
        raise PreconditionError("runs are sampled on different grids")
    return float(np.linalg.norm(a.y[:n] - b.y[:n], axis=1).max())


def sweep(
    scenario: Scenario,
    param_path: str,
    values: Sequence[float],
    allow_infeasible: bool = False,
    workers: int = 1,
) -> tuple[list[SweepRow], list[Optional[RunResult]]]:
    """One run per value, in order; failures are recorded, not raised."""
    members = [(scenario.with_value(param_path, v), allow_infeasible) for v in values]
    if workers > 1 and len(members) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_member, members))
    else:
        outcomes = [_sweep_member(mb) for mb in members]
    runs = [r for r, _ in outcomes]
    first = runs[0] if runs else None
    rows = []
    for v, (res, err) in zip(values, outcomes):
        if res is None:
            rows.append(SweepRow(float(v), "refused", None, None, err))
            continue
        dist = output_distance(res, first) if first is not None else None
        rows.append(SweepRow(float(v), str(res.status), res.metrics, dist))
    return rows, runs


@dataclass
class Comparison:
    a: RunResult
    b: RunResult
    # both errors stay inside the common funnel 1/phi at every sample
    shared_funnel_ok: bool


def compare(a: Scenario, b: Scenario, allow_infeasible: bool = False) -> Comparison:
    da, db = a.data, b.data
    if a.m != b.m:
        raise PreconditionError("scenarios differ in output dimension m")
    if da["plant"] != db["plant"]:
        raise PreconditionError("scenarios use different plants")
    if da["funnel"] != db["funnel"]:
        raise PreconditionError("scenarios are judged against different funnels")
    if da["reference"] != db["reference"]:
        raise PreconditionError("scenarios track different references")
    if da["sim"]["t_end"] != db["sim"]["t_end"] or da["sim"]["output_dt"] != db["sim"]["output_dt"]:
        raise PreconditionError("scenarios have different time spans or output grids")
    ra = run_scenario(a, allow_infeasible)
    rb = run_scenario(b, allow_infeasible)
    ok = all(
        r.completed and r.metrics.max_funnel_occupancy < 1.0 for r in (ra, rb)
    )
    return Comparison(ra, rb, ok)
