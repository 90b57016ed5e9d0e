"""Funnel performance functions and reference trajectories.

A funnel function ``phi`` defines the admissible tracking-error set
``{(t, e) : phi(t) * |e| < 1}``; its radius at time ``t`` is ``1 / phi(t)``.
Reference signals provide the trajectory to be tracked together with its
analytic derivatives.

All objects here are immutable and evaluation is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "FunnelFunction",
    "ConstantFunnel",
    "SaturatingQuadraticFunnel",
    "LogisticFunnel",
    "CompositeFunnel",
    "funnel_eval",
    "funnel_composite",
    "ValidationReport",
    "validate_class_G",
    "ReferenceSignal",
    "CosineReference",
    "ConstantReference",
    "SinusoidSumReference",
    "reference_eval",
]


def _check_time(t):
    if not t >= 0.0:
        raise ValueError(f"time must be non-negative, got {t!r}")


# ---------------------------------------------------------------------------
# funnel functions
# ---------------------------------------------------------------------------


class FunnelFunction:
    """Base class for performance functions.

    Subclasses implement ``eval`` and ``deriv`` for ``t >= 0`` and
    ``to_dict`` for the scenario-file representation.
    """

    kind = "abstract"

    def eval(self, t: float) -> float:
        raise NotImplementedError

    def deriv(self, t: float) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def radius(self, t: float) -> float:
        """Funnel radius ``1/phi(t)``; ``inf`` where ``phi(t) == 0``."""
        v = self.eval(t)
        return math.inf if v == 0.0 else 1.0 / v


@dataclass(frozen=True)
class ConstantFunnel(FunnelFunction):
    value: float
    kind = "constant"

    def eval(self, t):
        return float(self.value)

    def deriv(self, t):
        return 0.0

    def to_dict(self):
        return {"type": self.kind, "value": self.value}


@dataclass(frozen=True)
class SaturatingQuadraticFunnel(FunnelFunction):
    """``kappa * (1 - (t/T - 1)**2)`` for ``t <= T``, ``kappa`` afterwards.

    Rises from 0 at ``t = 0`` to ``kappa`` at ``t = T`` with zero slope there.
    """

    kappa: float
    T: float
    kind = "saturating_quadratic"

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")

    def eval(self, t):
        if t <= self.T:
            s = t / self.T - 1.0
            return self.kappa * (1.0 - s * s)
        return float(self.kappa)

    def deriv(self, t):
        # right-hand derivative at t == T is 0
        if t < self.T:
            return -2.0 * self.kappa * (t / self.T - 1.0) / self.T
        return 0.0

    def to_dict(self):
        return {"type": self.kind, "kappa": self.kappa, "T": self.T}


@dataclass(frozen=True)
class LogisticFunnel(FunnelFunction):
    """``1 / (exp(-t) + 1)``."""

    kind = "logistic"

    def eval(self, t):
        return 1.0 / (math.exp(-t) + 1.0)

    def deriv(self, t):
        q = math.exp(-t)
        return q / (q + 1.0) ** 2

    def to_dict(self):
        return {"type": self.kind}


@dataclass(frozen=True)
class CompositeFunnel(FunnelFunction):
    """Reciprocal-sum ``(1/a + 1/b)**-1``; radii add.

    Where either component vanishes the composite is 0 (infinite radius).
    """

    a: FunnelFunction
    b: FunnelFunction
    kind = "composite"

    def eval(self, t):
        va, vb = self.a.eval(t), self.b.eval(t)
        if va == 0.0 or vb == 0.0:
            return 0.0
        return va * vb / (va + vb)

    def deriv(self, t):
        va, vb = self.a.eval(t), self.b.eval(t)
        da, db = self.a.deriv(t), self.b.deriv(t)
        if va != 0.0 and vb != 0.0:
            return (da * vb * vb + db * va * va) / (va + vb) ** 2
        # one-sided limits of the product/sum quotient near a zero
        if va == 0.0 and vb == 0.0:
            s = da + db
            return 0.0 if s == 0.0 else da * db / s
        return da if va == 0.0 else db

    def to_dict(self):
        return {"type": self.kind, "a": self.a.to_dict(), "b": self.b.to_dict()}


def funnel_eval(phi: FunnelFunction, t: float) -> tuple[float, float]:
    """Return ``(phi(t), phi'(t))``; raises ``ValueError`` for ``t < 0``."""
    _check_time(t)
    return phi.eval(t), phi.deriv(t)


def funnel_composite(phi_a: FunnelFunction, phi_b: FunnelFunction) -> CompositeFunnel:
    return CompositeFunnel(phi_a, phi_b)


@dataclass(frozen=True)
class ValidationReport:
    verdict: str  # "pass" | "warn" | "fail"
    inf: float
    sup: float
    sup_abs_deriv: float
    messages: tuple[str, ...] = ()

    @property
    def ok(self):
        return self.verdict != "fail"


def validate_class_G(
    phi: FunnelFunction, horizon: float, grid_step: float, decay_ratio: float = 1e-3
) -> ValidationReport:
    """Check boundedness and positivity of ``phi`` on a sampling grid.

    Verdict is ``warn`` when ``phi`` vanishes only at isolated grid points
    (a funnel starting with infinite radius), and ``fail`` for negative or
    non-finite values, zeros on consecutive samples, or a monotone decay
    toward 0 at the end of the horizon.
    """
    if not (horizon > 0 and grid_step > 0):
        raise ValueError("horizon and grid_step must be positive")
    n = int(math.floor(horizon / grid_step + 1e-9))
    ts = [k * grid_step for k in range(n + 1)]
    if ts[-1] < horizon:
        ts.append(horizon)
    vals = np.array([phi.eval(t) for t in ts])
    ders = np.array([phi.deriv(t) for t in ts])
    inf, sup = float(vals.min()), float(vals.max())
    sup_d = float(np.abs(ders).max())
    msgs = []

    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(ders))):
        return ValidationReport("fail", inf, sup, sup_d, ("non-finite sample",))
    if inf < 0:
        msgs.append(f"negative value {inf!r}")
        return ValidationReport("fail", inf, sup, sup_d, tuple(msgs))

    verdict = "pass"
    zeros = np.flatnonzero(vals == 0.0)
    if zeros.size:
        consecutive = np.any(np.diff(zeros) == 1)
        if consecutive or zeros[-1] == len(ts) - 1:
            msgs.append("phi vanishes on a non-isolated set")
            verdict = "fail"
        else:
            at = ", ".join(f"t={ts[i]:g}" for i in zeros)
            msgs.append(f"inf phi = 0 attained only at isolated points ({at})")
            verdict = "warn"

    half = len(vals) // 2
    tail = vals[half:]
    if (
        sup > 0
        and tail.size > 1
        and np.all(np.diff(tail) < 0)
        and vals[-1] == inf
        and inf < decay_ratio * sup
    ):
        msgs.append(f"monotone decay toward 0 (inf/sup = {inf / sup:.3g})")
        verdict = "fail"

    return ValidationReport(verdict, inf, sup, sup_d, tuple(msgs))


# ---------------------------------------------------------------------------
# reference signals
# ---------------------------------------------------------------------------


def _vec(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float)).copy()


class ReferenceSignal:
    kind = "abstract"

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def eval(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def deriv(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def second_deriv(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class CosineReference(ReferenceSignal):
    """``amplitude * cos(omega * t + phase)``, amplitude per component."""

    amplitude: np.ndarray
    omega: float = 1.0
    phase: float = 0.0
    kind = "cosine"

    def __post_init__(self):
        object.__setattr__(self, "amplitude", _vec(self.amplitude))

    @property
    def dim(self):
        return self.amplitude.size

    def eval(self, t):
        return self.amplitude * math.cos(self.omega * t + self.phase)

    def deriv(self, t):
        return -self.omega * self.amplitude * math.sin(self.omega * t + self.phase)

    def second_deriv(self, t):
        return -self.omega**2 * self.amplitude * math.cos(self.omega * t + self.phase)

    def to_dict(self):
        return {
            "type": self.kind,
            "amplitude": self.amplitude.tolist(),
            "omega": self.omega,
            "phase": self.phase,
        }


@dataclass(frozen=True, eq=False)
class ConstantReference(ReferenceSignal):
    value: np.ndarray
    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "value", _vec(self.value))

    @property
    def dim(self):
        return self.value.size

    def eval(self, t):
        return self.value.copy()

    def deriv(self, t):
        return np.zeros_like(self.value)

    def second_deriv(self, t):
        return np.zeros_like(self.value)

    def to_dict(self):
        return {"type": self.kind, "value": self.value.tolist()}


@dataclass(frozen=True)
class SinusoidTerm:
    amplitude: Sequence[float]
    omega: float
    phase: float = 0.0


@dataclass(frozen=True, eq=False)
class SinusoidSumReference(ReferenceSignal):
    """Finite sum ``sum_k A_k * sin(omega_k * t + phase_k)``."""

    terms: tuple = field(default_factory=tuple)
    kind = "sinusoid_sum"

    def __post_init__(self):
        terms = tuple(
            (_vec(tm.amplitude), float(tm.omega), float(tm.phase)) for tm in self.terms
        )
        if not terms:
            raise ValueError("sinusoid_sum needs at least one term")
        if len({a.size for a, _, _ in terms}) != 1:
            raise ValueError("sinusoid_sum terms disagree in dimension")
        object.__setattr__(self, "_terms", terms)

    @property
    def dim(self):
        return self._terms[0][0].size

    def eval(self, t):
        return sum(a * math.sin(w * t + p) for a, w, p in self._terms)

    def deriv(self, t):
        return sum(a * w * math.cos(w * t + p) for a, w, p in self._terms)

    def second_deriv(self, t):
        return sum(-a * w * w * math.sin(w * t + p) for a, w, p in self._terms)

    def to_dict(self):
        return {
            "type": self.kind,
            "terms": [
                {"amplitude": a.tolist(), "omega": w, "phase": p}
                for a, w, p in self._terms
            ],
        }


def reference_eval(r: ReferenceSignal, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(y_ref(t), y_ref'(t))``; raises ``ValueError`` for ``t < 0``."""
    _check_time(t)
    return r.eval(t), r.deriv(t)
