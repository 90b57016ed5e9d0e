"""Dormand-Prince 5(4) integration with barrier-aware step control.

The right-hand side may raise :class:`~funnelfilter.errors.BarrierError`
when evaluated outside its admissible set. Such an attempt is rejected and
the step halved; the error-estimate controller is bypassed for that attempt.
Results are sampled onto a uniform output grid using the standard
continuous extension of the pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import BarrierError

__all__ = [
    "OdeProblem",
    "Status",
    "StepRecord",
    "StepResult",
    "Trajectory",
    "dense_eval",
    "fixed_step_solve",
    "integrate",
    "rk45_step",
]

# Dormand-Prince tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# 5th-order weights minus embedded 4th-order weights
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)
# continuous extension
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0
PI_BETA = 0.04
PI_EXPO = 0.2 - 0.75 * PI_BETA

Rhs = Callable[[float, np.ndarray], np.ndarray]


def _rms(v: np.ndarray) -> float:
    return math.sqrt(float(np.dot(v, v)) / v.size)


class StepResult(NamedTuple):
    x_next: np.ndarray
    error: float
    k: tuple  # stage derivatives k1..k7; k7 = f(t + h, x_next)


def rk45_step(
    rhs: Rhs,
    t: float,
    x: np.ndarray,
    h: float,
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-6,
    f0: Optional[np.ndarray] = None,
) -> StepResult:
    """Take one Dormand-Prince step of size ``h`` from ``(t, x)``.

    ``error`` is the RMS of the embedded difference weighted by
    ``abs_tol + rel_tol * max(|x|, |x_next|)``; a value <= 1 means the step
    meets the tolerances. ``f0`` reuses a known ``rhs(t, x)`` (FSAL).
    A ``BarrierError`` from any stage propagates to the caller.
    """
    k1 = rhs(t, x) if f0 is None else f0
    k2 = rhs(t + C2 * h, x + h * (A21 * k1))
    k3 = rhs(t + C3 * h, x + h * (A31 * k1 + A32 * k2))
    k4 = rhs(t + C4 * h, x + h * (A41 * k1 + A42 * k2 + A43 * k3))
    k5 = rhs(t + C5 * h, x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
    k6 = rhs(t + h, x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
    x_next = x + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
    k7 = rhs(t + h, x_next)
    err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
    scale = abs_tol + rel_tol * np.maximum(np.abs(x), np.abs(x_next))
    return StepResult(x_next, _rms(err_vec / scale), (k1, k2, k3, k4, k5, k6, k7))


@dataclass(frozen=True)
class StepRecord:
    """An accepted step with its continuous extension."""

    t0: float
    t1: float
    x0: np.ndarray
    x1: np.ndarray
    rcont: tuple

    @classmethod
    def from_step(cls, t, h, x, res: StepResult, t1=None):
        k1, _, k3, k4, k5, k6, k7 = res.k
        dx = res.x_next - x
        r3 = h * k1 - dx
        r4 = dx - h * k7 - r3
        r5 = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
        return cls(t, t + h if t1 is None else t1, x, res.x_next, (dx, r3, r4, r5))

    def __call__(self, t: float) -> np.ndarray:
        return dense_eval(self, t)


def dense_eval(step: StepRecord, t: float) -> np.ndarray:
    """Evaluate the step's interpolant at ``t`` in ``[step.t0, step.t1]``.

    Endpoints return the stored states exactly; endpoint derivatives of the
    interpolant equal ``rhs`` at the endpoints.
    """
    if not step.t0 <= t <= step.t1:
        raise ValueError(f"t={t!r} outside step [{step.t0!r}, {step.t1!r}]")
    if t == step.t0:
        return step.x0.copy()
    if t == step.t1:
        return step.x1.copy()
    s = (t - step.t0) / (step.t1 - step.t0)
    s1 = 1.0 - s
    r2, r3, r4, r5 = step.rcont
    return step.x0 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)))


@dataclass(frozen=True)
class Status:
    kind: str  # "completed" | "barrier-breach" | "step-underflow"
    t: Optional[float] = None
    reason: Optional[str] = None

    @property
    def completed(self):
        return self.kind == "completed"

    def __str__(self):
        if self.completed:
            return self.kind
        return f"{self.kind}(t={self.t!r}, {self.reason})"


@dataclass
class OdeProblem:
    rhs: Rhs
    x0: np.ndarray
    t0: float
    t_end: float
    rel_tol: float = 1e-8
    abs_tol: float = 1e-6
    output_dt: float = 1e-2
    h_min: Optional[float] = None
    max_step: float = math.inf
    # evaluate rhs at every output sample before accepting a step
    check_samples: bool = True
    on_accept: Optional[Callable[[StepRecord], None]] = None
    max_steps: int = 10_000_000

    def __post_init__(self):
        self.x0 = np.array(self.x0, dtype=float).ravel()
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.output_dt > 0:
            raise ValueError("output_dt must be positive")
        if self.h_min is None:
            self.h_min = 1e-12 * (self.t_end - self.t0)
        if not 0 < self.h_min < self.output_dt:
            raise ValueError("h_min must lie in (0, output_dt)")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if not np.all(np.isfinite(self.x0)):
            raise ValueError("initial state must be finite")

    @property
    def dim(self):
        return self.x0.size

    def output_grid(self) -> np.ndarray:
        n = int(round((self.t_end - self.t0) / self.output_dt))
        ts = self.t0 + self.output_dt * np.arange(n + 1)
        ts = ts[ts <= self.t_end + 1e-9 * self.output_dt]
        ts[-1] = min(ts[-1], self.t_end)
        if self.t_end - ts[-1] > 1e-9 * self.output_dt:
            ts = np.append(ts, self.t_end)
        else:
            ts[-1] = self.t_end
        return ts


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    status: Status
    n_accepted: int = 0
    n_rejected: int = 0
    n_barrier: int = 0
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.size


def _initial_step(rhs, t0, x0, f0, rel_tol, abs_tol, t_span, max_step):
    scale = abs_tol + rel_tol * np.abs(x0)
    d0 = _rms(x0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_span, max_step)
    try:
        f1 = rhs(t0 + h0, x0 + h0 * f0)
    except BarrierError:
        return h0
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, t_span, max_step)


def integrate(problem: OdeProblem) -> Trajectory:
    """Integrate ``problem`` and sample it on the uniform output grid.

    Never raises for integration failures; the outcome is reported in
    ``Trajectory.status`` with samples up to the last accepted step.
    """
    p = problem
    rhs, rtol, atol = p.rhs, p.rel_tol, p.abs_tol
    grid = p.output_grid()
    n_out = grid.size
    out = np.empty((n_out, p.dim))
    t = float(p.t0)
    x = p.x0.copy()

    def finish(status, n_done, **counts):
        return Trajectory(grid[:n_done].copy(), out[:n_done].copy(), status, **counts)

    try:
        f = rhs(t, x)
    except BarrierError as exc:
        return finish(Status("barrier-breach", t, exc.reason), 0)
    out[0] = x
    n_done = 1

    h = _initial_step(rhs, t, x, f, rtol, atol, p.t_end - p.t0, p.max_step)
    fac_old = 1e-4
    rejected_last = False
    n_acc = n_rej = n_bar = 0

    while t < p.t_end:
        if n_acc + n_rej >= p.max_steps:
            return finish(
                Status("step-underflow", t, "maximum number of steps exceeded"),
                n_done, n_accepted=n_acc, n_rejected=n_rej, n_barrier=n_bar,
            )
        h = min(h, p.max_step)
        last = t + h >= p.t_end
        if last:
            h = p.t_end - t

        barrier_reason = None
        try:
            # overflow during a trial step is handled below as a rejection
            with np.errstate(over="ignore", invalid="ignore"):
                res = rk45_step(rhs, t, x, h, rtol, atol, f0=f)
            err = res.error
            if not (math.isfinite(err) and np.all(np.isfinite(res.x_next))):
                barrier_reason = "non-finite state"
        except BarrierError as exc:
            barrier_reason = exc.reason
            res = None

        step = None
        if barrier_reason is None and err <= 1.0:
            t_next = p.t_end if last else t + h
            step = StepRecord.from_step(t, h, x, res, t1=t_next)
            k = n_done
            samples = []
            while k < n_out and grid[k] <= t_next:
                tk = grid[k]
                xk = res.x_next.copy() if tk == t_next else step(tk)
                samples.append(xk)
                k += 1
            if p.check_samples:
                try:
                    for j, xk in enumerate(samples):
                        rhs(float(grid[n_done + j]), xk)
                except BarrierError as exc:
                    barrier_reason = exc.reason

        if barrier_reason is not None:
            n_bar += 1
            n_rej += 1
            h *= 0.5
            rejected_last = True
            if h < p.h_min:
                return finish(
                    Status("barrier-breach", t, barrier_reason),
                    n_done, n_accepted=n_acc, n_rejected=n_rej, n_barrier=n_bar,
                )
            continue

        fac11 = err**PI_EXPO if err > 0 else 0.0
        if err <= 1.0:
            fac = fac11 / fac_old**PI_BETA / SAFETY
            fac = min(1.0 / FAC_MIN, max(1.0 / FAC_MAX, fac))
            h_new = h / fac
            fac_old = max(err, 1e-4)
            if rejected_last:
                h_new = min(h_new, h)
            for xk in samples:
                out[n_done] = xk
                n_done += 1
            if p.on_accept is not None:
                p.on_accept(step)
            t = step.t1
            x = res.x_next
            f = res.k[6]
            n_acc += 1
            rejected_last = False
            h = h_new
        else:
            n_rej += 1
            rejected_last = True
            h = h / min(1.0 / FAC_MIN, fac11 / SAFETY)
            if h < p.h_min:
                return finish(
                    Status("step-underflow", t, f"error estimate {err:.3g} at h < h_min"),
                    n_done, n_accepted=n_acc, n_rejected=n_rej, n_barrier=n_bar,
                )

    return finish(
        Status("completed"), n_done, n_accepted=n_acc, n_rejected=n_rej, n_barrier=n_bar
    )


def fixed_step_solve(rhs: Rhs, t0: float, x0, t_end: float, n_steps: int) -> np.ndarray:
    """Propagate with ``n_steps`` equal Dormand-Prince steps (5th-order solution)."""
    x = np.array(x0, dtype=float).ravel()
    h = (t_end - t0) / n_steps
    f = None
    for i in range(n_steps):
        res = rk45_step(rhs, t0 + i * h, x, h, f0=f)
        x, f = res.x_next, res.k[6]
    return x
