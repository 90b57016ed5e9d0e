"""Funnel control laws for relative-degree-two plants.

``filter_*`` implements the derivative-free controller

    e     = y - y_ref
    xi'   = -xi + u,              xi(t0) = xi0
    theta = xi + e / (1 - phi^2 |e|^2)
    u     = -theta / (theta_hat^2 - |theta|^2)

where the filter state ``xi`` stands in for the unavailable ``y'`` and is
steered toward ``xi* = -e / (1 - phi^2 |e|^2)``.

``comparison_*`` implements an observer-based funnel controller with two
auxiliary states ``z1, z2`` used as the benchmark for the filter law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import BarrierError
from .signals import FunnelFunction, ReferenceSignal


def _vec(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float)).copy()


# ---------------------------------------------------------------------------
# filter-based funnel controller
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FilterControllerParams:
    theta_hat: float
    xi0: np.ndarray
    phi: FunnelFunction
    y_ref: ReferenceSignal

    def __post_init__(self):
        if not self.theta_hat > 0:
            raise ValueError("theta_hat must be positive")
        xi0 = _vec(self.xi0)
        if xi0.size != self.y_ref.dim:
            raise ValueError(f"xi0 has length {xi0.size}, reference has {self.y_ref.dim}")
        object.__setattr__(self, "xi0", xi0)

    @property
    def m(self):
        return self.xi0.size


class FilterOutput(NamedTuple):
    u: np.ndarray
    theta: np.ndarray
    e: np.ndarray
    xi_star: np.ndarray
    phi: float
    occupancy: float  # phi * |e|
    theta_ratio: float  # |theta| / theta_hat


def filter_control_output(
    params: FilterControllerParams, xi: np.ndarray, y: np.ndarray, t: float
) -> FilterOutput:
    """Evaluate the filter control law.

    Raises ``BarrierError`` if ``phi^2 |e|^2 >= 1`` or ``|theta| >= theta_hat``.
    """
    e = y - params.y_ref.eval(t)
    phi = params.phi.eval(t)
    e_sq = float(np.dot(e, e))
    g = phi * phi * e_sq
    if not g < 1.0:
        raise BarrierError("error left the funnel (phi^2 |e|^2 >= 1)", t)
    xi_star = -e / (1.0 - g)
    theta = xi - xi_star
    th_sq = float(np.dot(theta, theta))
    th_hat = params.theta_hat
    denom = th_hat * th_hat - th_sq
    if not denom > 0.0:
        raise BarrierError("filter error left its funnel (|theta| >= theta_hat)", t)
    u = -theta / denom
    return FilterOutput(
        u, theta, e, xi_star, phi, phi * math.sqrt(e_sq), math.sqrt(th_sq) / th_hat
    )


def filter_state_deriv(xi: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u - xi


def default_xi0(phi: FunnelFunction, y_ref: ReferenceSignal, y0, t0: float = 0.0) -> np.ndarray:
    """Filter start value that makes ``theta(t0) = 0``."""
    e0 = _vec(y0) - y_ref.eval(t0)
    g0 = phi.eval(t0) ** 2 * float(np.dot(e0, e0))
    if not g0 < 1.0:
        raise ValueError("initial error is not inside the funnel")
    return -e0 / (1.0 - g0)


FUNNEL_HYPOTHESIS = "initial error inside the funnel: phi(t0)^2 |e(t0)|^2 < 1"
FILTER_HYPOTHESIS = "filter start value: |xi0 + e(t0) / (1 - phi(t0)^2 |e(t0)|^2)| < theta_hat"


@dataclass(frozen=True, eq=False)
class FeasibilityReport:
    t0: float
    e0: np.ndarray
    g0: float
    theta0: Optional[np.ndarray]
    theta_hat: float
    feasible: bool
    violated: Optional[str] = None  # "funnel" | "filter"
    hypothesis: Optional[str] = None

    @property
    def theta0_norm(self) -> float:
        return math.inf if self.theta0 is None else float(np.linalg.norm(self.theta0))

    def summary(self) -> str:
        lines = [
            f"e(t0) = {self.e0.tolist()}",
            f"phi(t0)^2 |e(t0)|^2 = {self.g0!r}",
        ]
        if self.theta0 is not None:
            lines.append(f"theta(t0) = {self.theta0.tolist()} (|theta(t0)| = {self.theta0_norm!r})")
        lines.append(f"theta_hat = {self.theta_hat!r}")
        if self.feasible:
            lines.append("feasible")
        else:
            lines.append(f"infeasible: violates {self.hypothesis}")
        return "\n".join(lines)


def check_feasibility(params: FilterControllerParams, y0, t0: float = 0.0) -> FeasibilityReport:
    """Check the two start conditions under which the closed loop is well posed."""
    e0 = _vec(y0) - params.y_ref.eval(t0)
    g0 = params.phi.eval(t0) ** 2 * float(np.dot(e0, e0))
    if not g0 < 1.0:
        return FeasibilityReport(
            t0, e0, g0, None, params.theta_hat, False, "funnel", FUNNEL_HYPOTHESIS
        )
    theta0 = params.xi0 + e0 / (1.0 - g0)
    if not np.linalg.norm(theta0) < params.theta_hat:
        return FeasibilityReport(
            t0, e0, g0, theta0, params.theta_hat, False, "filter", FILTER_HYPOTHESIS
        )
    return FeasibilityReport(t0, e0, g0, theta0, params.theta_hat, True)


# ---------------------------------------------------------------------------
# observer-based comparison controller
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ComparisonControllerParams:
    p1: float
    p2: float
    q1: float
    q2: float
    Gamma_tilde: np.ndarray
    phi0: FunnelFunction
    phi1: FunnelFunction
    phi2: FunnelFunction
    z1_0: np.ndarray
    z2_0: np.ndarray
    y_ref: ReferenceSignal

    def __post_init__(self):
        m = self.y_ref.dim
        G = np.atleast_2d(np.asarray(self.Gamma_tilde, dtype=float))
        if G.shape != (m, m):
            raise ValueError(f"Gamma_tilde must be {m}x{m}")
        if abs(np.linalg.det(G)) < 1e-12:
            raise ValueError("Gamma_tilde must be invertible")
        object.__setattr__(self, "Gamma_tilde", G)
        for name in ("z1_0", "z2_0"):
            v = _vec(getattr(self, name))
            if v.size != m:
                raise ValueError(f"{name} must have length {m}")
            object.__setattr__(self, name, v)

    @property
    def m(self):
        return self.z1_0.size


class ComparisonOutput(NamedTuple):
    u: np.ndarray
    k0: float
    k1: float
    k2: float
    e0: np.ndarray
    e1: np.ndarray
    z1_dot: np.ndarray


def _gain(phi: float, v: np.ndarray, name: str, t) -> float:
    d = 1.0 - phi * phi * float(np.dot(v, v))
    if not d > 0.0:
        raise BarrierError(f"{name} denominator not positive", t)
    return 1.0 / d


def _z1_dot(params, z1, z2, y, t):
    innov = y - z1
    k2 = _gain(params.phi2.eval(t), innov, "k2", t)
    return z2 + (params.q1 + params.p1 * k2) * innov, innov, k2


def comparison_control_output(
    params: ComparisonControllerParams, z1, z2, y, t: float
) -> ComparisonOutput:
    """Evaluate the observer-based law; ``e0'`` is formed as ``z1' - y_ref'``."""
    z1_dot, _, k2 = _z1_dot(params, z1, z2, y, t)
    e0 = z1 - params.y_ref.eval(t)
    e0_dot = z1_dot - params.y_ref.deriv(t)
    k0 = _gain(params.phi0.eval(t), e0, "k0", t)
    e1 = e0_dot + k0 * e0
    k1 = _gain(params.phi1.eval(t), e1, "k1", t)
    return ComparisonOutput(-k1 * e1, k0, k1, k2, e0, e1, z1_dot)


def comparison_state_deriv(params: ComparisonControllerParams, z1, z2, y, u, t: float):
    z1_dot, innov, k2 = _z1_dot(params, z1, z2, y, t)
    z2_dot = (params.q2 + params.p2 * k2) * innov + params.Gamma_tilde @ u
    return z1_dot, z2_dot
