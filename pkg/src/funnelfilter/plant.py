"""Second-order plants ``y'' = R1 y + R2 y' + f(T(y, y')) + Gamma u``.

``T`` is a causal operator carrying the internal dynamics. Four kinds ship:

* ``MemorylessOperator``: ``T(y, y')(t) = y(t)``.
* ``DelayOperator``: ``T(y, y')(t) = y(t - tau)``, constant pre-history.
* ``LinearInternalOperator``: output ``eta`` of ``eta' = A eta + B y``, A Hurwitz.
* ``SaturatedDerivativeOperator``: ``y'(t)`` clamped componentwise to ``[-s, s]``.

Each is locally Lipschitz by construction (identity, shift, linear ODE
with bounded coefficients, and a 1-Lipschitz clamp respectively); only
causality and the bounded-input bounded-output property are probed.

Operator instances carry per-run state. ``PlantModel.new_operator`` hands
out a fresh copy for every run.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import StateError
from .integrator import StepRecord, dense_eval, fixed_step_solve

Signal = Callable[[float], np.ndarray]


# ---------------------------------------------------------------------------
# nonlinearities f: R^q -> R^m (componentwise, q == m)
# ---------------------------------------------------------------------------


class Nonlinearity:
    kind = "abstract"

    def __call__(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class SineNonlinearity(Nonlinearity):
    """``v -> -a * sin(v)``."""

    a: float
    kind = "neg_sine"

    def __call__(self, v):
        return -self.a * np.sin(v)

    def to_dict(self):
        return {"type": self.kind, "a": self.a}


@dataclass(frozen=True)
class CubicNonlinearity(Nonlinearity):
    alpha: float
    kind = "cubic"

    def __call__(self, v):
        return self.alpha * v**3

    def to_dict(self):
        return {"type": self.kind, "alpha": self.alpha}


@dataclass(frozen=True)
class TanhNonlinearity(Nonlinearity):
    gain: float
    kind = "tanh"

    def __call__(self, v):
        return self.gain * np.tanh(v)

    def to_dict(self):
        return {"type": self.kind, "gain": self.gain}


# ---------------------------------------------------------------------------
# causal operators
# ---------------------------------------------------------------------------


class CausalOperator:
    """Base class for the internal-dynamics operator ``T``.

    ``state_dim`` extra states are appended to the closed-loop ODE and
    advanced by ``state_deriv``; ``output`` maps the current ``(t, y, y',
    state)`` to ``R^q``.
    """

    kind = "abstract"
    state_dim = 0

    def out_dim(self, m: int) -> int:
        return m

    def initial_state(self) -> np.ndarray:
        return np.zeros(0)

    def state_deriv(self, t, y, ydot, eta) -> np.ndarray:
        return np.zeros(0)

    def output(self, t, y, ydot, eta=None) -> np.ndarray:
        raise NotImplementedError

    def reset(self, y0: np.ndarray) -> None:
        """Prepare for a fresh run starting from output ``y0`` at ``t = 0``."""

    def record(self, step: StepRecord, y_slice: slice) -> None:
        """Observe an accepted closed-loop step."""

    def max_step(self) -> float:
        return math.inf

    def apply(self, ts: np.ndarray, y: Signal, ydot: Signal) -> np.ndarray:
        """Evaluate the operator on given input signals at the times ``ts``."""
        return np.array([self.output(t, y(t), ydot(t)) for t in ts])

    def to_dict(self) -> dict:
        return {"type": self.kind}


class MemorylessOperator(CausalOperator):
    kind = "memoryless"

    def output(self, t, y, ydot, eta=None):
        return np.asarray(y, dtype=float)


@dataclass
class SaturatedDerivativeOperator(CausalOperator):
    s: float
    kind = "saturated_derivative"

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("saturation level s must be positive")

    def output(self, t, y, ydot, eta=None):
        return np.clip(ydot, -self.s, self.s)

    def to_dict(self):
        return {"type": self.kind, "s": self.s}


@dataclass
class DelayOperator(CausalOperator):
    tau: float
    kind = "delay"
    _y0: Optional[np.ndarray] = field(default=None, init=False, repr=False)
    _steps: list = field(default_factory=list, init=False, repr=False)
    _ends: list = field(default_factory=list, init=False, repr=False)
    _slice: slice = field(default=slice(None), init=False, repr=False)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("delay tau must be positive")

    def reset(self, y0):
        self._y0 = np.array(y0, dtype=float)
        self._steps, self._ends = [], []

    def record(self, step, y_slice):
        self._steps.append(step)
        self._ends.append(step.t1)
        self._slice = y_slice

    def max_step(self):
        # keeps t - tau inside already accepted history
        return self.tau

    def history(self, s: float) -> np.ndarray:
        if self._y0 is None:
            raise StateError("delay operator was not reset before use")
        if s <= 0.0:
            return self._y0.copy()
        if not self._ends or s > self._ends[-1]:
            covered = self._ends[-1] if self._ends else 0.0
            raise StateError(f"delay history covers [0, {covered!r}], requested {s!r}")
        i = int(np.searchsorted(self._ends, s))
        return dense_eval(self._steps[i], s)[self._slice]

    def output(self, t, y, ydot, eta=None):
        return self.history(t - self.tau)

    def apply(self, ts, y, ydot):
        y_init = np.asarray(y(0.0), dtype=float)
        return np.array(
            [y(t - self.tau) if t >= self.tau else y_init for t in ts], dtype=float
        )

    def to_dict(self):
        return {"type": self.kind, "tau": self.tau}


class LinearInternalOperator(CausalOperator):
    """Internal dynamics ``eta' = A eta + B y`` with output ``eta``."""

    kind = "linear_internal"

    def __init__(self, A, B, eta0=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        q = self.A.shape[0]
        if self.A.shape != (q, q):
            raise ValueError("A must be square")
        if self.B.shape[0] != q:
            raise ValueError("B must have as many rows as A")
        self.eta0 = np.zeros(q) if eta0 is None else np.atleast_1d(np.asarray(eta0, float))
        if self.eta0.shape != (q,):
            raise ValueError("eta0 has wrong dimension")
        eig = np.linalg.eigvals(self.A)
        if not np.all(eig.real < 0):
            raise ValueError(f"A must be Hurwitz, eigenvalues {eig}")
        self.state_dim = q

    @property
    def spectral_abscissa(self) -> float:
        return float(np.linalg.eigvals(self.A).real.max())

    def out_dim(self, m):
        if self.B.shape[1] != m:
            raise ValueError(f"B has {self.B.shape[1]} columns, plant output has {m}")
        return self.state_dim

    def initial_state(self):
        return self.eta0.copy()

    def state_deriv(self, t, y, ydot, eta):
        return self.A @ eta + self.B @ y

    def output(self, t, y, ydot, eta=None):
        if eta is None:
            raise StateError("linear-internal operator needs its state eta at time t")
        return np.asarray(eta, dtype=float)

    def apply(self, ts, y, ydot, substeps: int = 4):
        # interval by interval, so each output only sees inputs up to its time
        out = np.empty((len(ts), self.state_dim))
        eta, t_prev = self.eta0.copy(), 0.0
        rhs = lambda t, e: self.A @ e + self.B @ np.atleast_1d(y(t))
        for k, t in enumerate(ts):
            if t > t_prev:
                eta = fixed_step_solve(rhs, t_prev, eta, t, substeps)
                t_prev = t
            out[k] = eta
        return out

    def to_dict(self):
        return {
            "type": self.kind,
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "eta0": self.eta0.tolist(),
        }


@dataclass
class AnticipatingOperator(CausalOperator):
    """Non-causal test double: reports ``y(t + lead)``.

    Only usable through ``apply``; it exists as a negative control for
    :func:`probe_causality`.
    """

    lead: float = 0.5
    kind = "anticipating"

    def output(self, t, y, ydot, eta=None):
        raise StateError("anticipating operator cannot run inside a closed loop")

    def apply(self, ts, y, ydot):
        return np.array([y(t + self.lead) for t in ts], dtype=float)

    def to_dict(self):
        return {"type": self.kind, "lead": self.lead}


def operator_eval(T: CausalOperator, t: float, y, ydot, state=None) -> np.ndarray:
    """Evaluate ``T(y, y')(t)`` from current values (plus internal state)."""
    if not t >= 0:
        raise ValueError(f"time must be non-negative, got {t!r}")
    return T.output(t, np.atleast_1d(np.asarray(y, float)), np.atleast_1d(np.asarray(ydot, float)), state)


# ---------------------------------------------------------------------------
# plant
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PlantModel:
    m: int
    R1: np.ndarray
    R2: np.ndarray
    Gamma: np.ndarray
    f: Nonlinearity
    operator: CausalOperator
    y0: np.ndarray
    ydot0: np.ndarray
    label: str = "general"

    def __post_init__(self):
        m = self.m
        for name in ("R1", "R2", "Gamma"):
            mat = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            if mat.shape != (m, m):
                raise ValueError(f"{name} must be {m}x{m}, got {mat.shape}")
            object.__setattr__(self, name, mat)
        for name in ("y0", "ydot0"):
            v = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if v.shape != (m,):
                raise ValueError(f"{name} must have length {m}")
            object.__setattr__(self, name, v)
        sym = 0.5 * (self.Gamma + self.Gamma.T)
        if not np.linalg.eigvalsh(sym).min() > 0:
            raise ValueError("Gamma must be positive definite")
        q = self.operator.out_dim(m)
        if q != m:
            raise ValueError(f"componentwise nonlinearity needs q == m, got q={q}, m={m}")

    @property
    def q(self) -> int:
        return self.operator.out_dim(self.m)

    def new_operator(self) -> CausalOperator:
        op = copy.deepcopy(self.operator)
        op.reset(self.y0)
        return op


def plant_rhs(P: PlantModel, t, x1, x2, u, w):
    """Return ``(x1', x2')`` with ``x1' = x2`` and the second-order law."""
    return x2, P.R1 @ x1 + P.R2 @ x2 + P.f(w) + P.Gamma @ u


def make_benchmark(a: float, b: float, y0=0.0, ydot0=0.0) -> PlantModel:
    """Pendulum-like plant ``y'' + a sin(y) = b u``."""
    if not b > 0:
        raise ValueError("b must be positive")
    return PlantModel(
        m=1,
        R1=np.zeros((1, 1)),
        R2=np.zeros((1, 1)),
        Gamma=np.array([[float(b)]]),
        f=SineNonlinearity(float(a)),
        operator=MemorylessOperator(),
        y0=np.atleast_1d(y0),
        ydot0=np.atleast_1d(ydot0),
        label="benchmark",
    )


# ---------------------------------------------------------------------------
# property probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CausalityReport:
    passed: bool
    max_diff_before_split: float
    agree_until: float  # last grid time up to which the outputs coincide


def probe_causality(
    T: CausalOperator,
    t_split: float,
    inputs_a: tuple[Signal, Signal],
    inputs_b: tuple[Signal, Signal],
    horizon: Optional[float] = None,
    dt: float = 0.01,
    tol: float = 0.0,
) -> CausalityReport:
    """Compare operator outputs for two inputs that coincide on ``[0, t_split]``.

    Passes iff the sampled outputs agree (to ``tol``) at every grid time
    ``<= t_split``.
    """
    horizon = 2.0 * t_split + 1.0 if horizon is None else horizon
    ts = np.arange(int(round(horizon / dt)) + 1) * dt
    out_a = np.atleast_2d(T.apply(ts, *inputs_a).reshape(len(ts), -1))
    out_b = np.atleast_2d(T.apply(ts, *inputs_b).reshape(len(ts), -1))
    diff = np.abs(out_a - out_b).max(axis=1)
    before = ts <= t_split
    max_before = float(diff[before].max())
    bad = np.flatnonzero(diff > tol)
    agree_until = float(ts[-1]) if bad.size == 0 else float(ts[bad[0] - 1]) if bad[0] > 0 else -math.inf
    return CausalityReport(max_before <= tol, max_before, agree_until)


def bibo_suite(
    c0: float, m: int = 1, ydot_amplitude: float = 1e6
) -> list[tuple[Signal, Signal]]:
    """Input pairs with ``sup |y| <= c0`` and large second channels."""
    ones = np.ones(m)

    def const(c):
        return lambda t: c * ones

    suite = [
        (const(c0), const(0.0)),
        (const(-c0), const(ydot_amplitude)),
        (lambda t: c0 * math.sin(t) * ones, lambda t: ydot_amplitude * math.cos(50 * t) * ones),
        (lambda t: c0 * ones if t >= 1.0 else 0.0 * ones, lambda t: -ydot_amplitude * ones),
        (lambda t: c0 * math.cos(3 * t) * ones, lambda t: ydot_amplitude * t * ones),
    ]
    return suite


def probe_bibo(
    T: CausalOperator,
    c0: float,
    suite: Sequence[tuple[Signal, Signal]],
    horizon: float = 20.0,
    dt: float = 0.01,
) -> float:
    """Largest sampled output norm of ``T`` over a suite of bounded-``y`` inputs."""
    ts = np.arange(int(round(horizon / dt)) + 1) * dt
    c1 = 0.0
    for y, ydot in suite:
        ys = np.array([np.atleast_1d(y(t)) for t in ts])
        if np.linalg.norm(ys, axis=1).max() > c0 * (1 + 1e-12):
            raise ValueError("suite signal exceeds the input bound c0")
        out = T.apply(ts, y, ydot).reshape(len(ts), -1)
        c1 = max(c1, float(np.linalg.norm(out, axis=1).max()))
    return c1
