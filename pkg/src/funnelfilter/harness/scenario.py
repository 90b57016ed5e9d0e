"""Scenario files: strict JSON schema, normalization and object builders.

A scenario is stored as a normalized dict tree (scalars promoted to lists
and matrices, optional fields filled in) so that loading, dumping and
loading again yields an equal value.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from ..controllers import ComparisonControllerParams, FilterControllerParams, default_xi0
from ..errors import ScenarioError
from ..plant import (
    CausalOperator,
    CubicNonlinearity,
    DelayOperator,
    LinearInternalOperator,
    MemorylessOperator,
    PlantModel,
    SaturatedDerivativeOperator,
    SineNonlinearity,
    TanhNonlinearity,
    make_benchmark,
)
from ..signals import (
    CompositeFunnel,
    ConstantFunnel,
    ConstantReference,
    CosineReference,
    FunnelFunction,
    LogisticFunnel,
    ReferenceSignal,
    SaturatingQuadraticFunnel,
    SinusoidSumReference,
    SinusoidTerm,
)

PRESETS = ("fig2_filter", "fig2_comparison", "theta_sweep", "double_integrator_smoke")

SIM_DEFAULTS = {"t_end": 20.0, "rel_tol": 1e-8, "abs_tol": 1e-6, "output_dt": 0.01}


# ---------------------------------------------------------------------------
# field validation helpers
# ---------------------------------------------------------------------------


def _fail(path, msg):
    raise ScenarioError(f"{path} {msg}" if path else msg)


def _record(d, path, required, optional=()):
    if not isinstance(d, dict):
        _fail(path, "must be an object")
    unknown = sorted(set(d) - set(required) - set(optional))
    if unknown:
        _fail(path or "scenario", f"has unknown key(s): {', '.join(unknown)}")
    for key in required:
        if key not in d:
            _fail(f"{path}.{key}".lstrip("."), "is required")


def _num(d, key, path, positive=False, nonneg=False, default=None):
    name = f"{path}.{key}".lstrip(".")
    if key not in d:
        if default is None:
            _fail(f"{path}.{key}".lstrip("."), "is required")
        return float(default)
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        _fail(name, "must be a finite number")
    if positive and not v > 0:
        _fail(name, "must be positive")
    if nonneg and not v >= 0:
        _fail(name, "must be non-negative")
    return float(v)


def _vector(v, name, m=None):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v:
        _fail(name, "must be a number or a non-empty list of numbers")
    out = []
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            _fail(name, "must contain finite numbers only")
        out.append(float(x))
    if m is not None and len(out) != m:
        _fail(name, f"must have length {m}, got {len(out)}")
    return out


def _matrix(v, name, rows=None, cols=None):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [[v]]
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        _fail(name, "must be a number or a list of rows")
    out = [_vector(r, name) for r in v]
    if len({len(r) for r in out}) != 1:
        _fail(name, "rows have unequal lengths")
    if rows is not None and len(out) != rows:
        _fail(name, f"must have {rows} rows")
    if cols is not None and len(out[0]) != cols:
        _fail(name, f"must have {cols} columns")
    return out


# ---------------------------------------------------------------------------
# normalizers (dict -> normalized dict)
# ---------------------------------------------------------------------------


def _norm_funnel(d, path):
    if not isinstance(d, dict) or "type" not in d:
        _fail(path, "must be an object with a 'type'")
    kind = d["type"]
    if kind == "constant":
        _record(d, path, ("type", "value"))
        return {"type": kind, "value": _num(d, "value", path, nonneg=True)}
    if kind == "saturating_quadratic":
        _record(d, path, ("type", "kappa", "T"))
        return {
            "type": kind,
            "kappa": _num(d, "kappa", path, nonneg=True),
            "T": _num(d, "T", path, positive=True),
        }
    if kind == "logistic":
        _record(d, path, ("type",))
        return {"type": kind}
    if kind == "composite":
        _record(d, path, ("type", "a", "b"))
        return {"type": kind, "a": _norm_funnel(d["a"], f"{path}.a"), "b": _norm_funnel(d["b"], f"{path}.b")}
    _fail(f"{path}.type", f"unknown funnel family {kind!r}")


def _norm_reference(d, path="reference"):
    if not isinstance(d, dict) or "type" not in d:
        _fail(path, "must be an object with a 'type'")
    kind = d["type"]
    if kind == "cosine":
        _record(d, path, ("type", "amplitude"), ("omega", "phase"))
        return {
            "type": kind,
            "amplitude": _vector(d["amplitude"], "amplitude"),
            "omega": _num(d, "omega", path, default=1.0),
            "phase": _num(d, "phase", path, default=0.0),
        }
    if kind == "constant":
        _record(d, path, ("type", "value"))
        return {"type": kind, "value": _vector(d["value"], "value")}
    if kind == "sinusoid_sum":
        _record(d, path, ("type", "terms"))
        terms = d["terms"]
        if not isinstance(terms, list) or not terms:
            _fail(f"{path}.terms", "must be a non-empty list")
        out = []
        for i, tm in enumerate(terms):
            tp = f"{path}.terms[{i}]"
            _record(tm, tp, ("amplitude", "omega"), ("phase",))
            out.append(
                {
                    "amplitude": _vector(tm["amplitude"], "amplitude"),
                    "omega": _num(tm, "omega", tp),
                    "phase": _num(tm, "phase", tp, default=0.0),
                }
            )
        if len({len(tm["amplitude"]) for tm in out}) != 1:
            _fail(f"{path}.terms", "amplitudes disagree in dimension")
        return {"type": kind, "terms": out}
    _fail(f"{path}.type", f"unknown reference family {kind!r}")


def _ref_dim(r):
    if r["type"] == "cosine":
        return len(r["amplitude"])
    if r["type"] == "constant":
        return len(r["value"])
    return len(r["terms"][0]["amplitude"])


def _norm_operator(d, m, path="plant.operator"):
    if not isinstance(d, dict) or "type" not in d:
        _fail(path, "must be an object with a 'type'")
    kind = d["type"]
    if kind == "memoryless":
        _record(d, path, ("type",))
        return {"type": kind}
    if kind == "delay":
        _record(d, path, ("type", "tau"))
        return {"type": kind, "tau": _num(d, "tau", path, positive=True)}
    if kind == "saturated_derivative":
        _record(d, path, ("type", "s"))
        return {"type": kind, "s": _num(d, "s", path, positive=True)}
    if kind == "linear_internal":
        _record(d, path, ("type", "A", "B"), ("eta0",))
        A = _matrix(d["A"], "A")
        q = len(A)
        A = _matrix(d["A"], "A", q, q)
        B = _matrix(d["B"], "B", q, m)
        eta0 = _vector(d["eta0"], "eta0", q) if "eta0" in d else [0.0] * q
        return {"type": kind, "A": A, "B": B, "eta0": eta0}
    _fail(f"{path}.type", f"unknown operator kind {kind!r}")


def _norm_f(d, path="plant.f"):
    if not isinstance(d, dict) or "type" not in d:
        _fail(path, "must be an object with a 'type'")
    kind = d["type"]
    keys = {"neg_sine": "a", "cubic": "alpha", "tanh": "gain"}
    if kind not in keys:
        _fail(f"{path}.type", f"unknown nonlinearity {kind!r}")
    _record(d, path, ("type", keys[kind]))
    return {"type": kind, keys[kind]: _num(d, keys[kind], path)}


def _norm_plant(d, path="plant"):
    if not isinstance(d, dict) or "type" not in d:
        _fail(path, "must be an object with a 'type'")
    kind = d["type"]
    if kind == "benchmark":
        _record(d, path, ("type", "a", "b"), ("y0", "ydot0"))
        return {
            "type": kind,
            "a": _num(d, "a", path),
            "b": _num(d, "b", path, positive=True),
            "y0": _vector(d.get("y0", 0.0), "y0", 1),
            "ydot0": _vector(d.get("ydot0", 0.0), "ydot0", 1),
        }
    if kind == "general":
        _record(d, path, ("type", "m", "R1", "R2", "Gamma", "f", "operator", "y0", "ydot0"))
        m = d["m"]
        if isinstance(m, bool) or not isinstance(m, int) or m < 1:
            _fail("m", "must be a positive integer")
        return {
            "type": kind,
            "m": m,
            "R1": _matrix(d["R1"], "R1", m, m),
            "R2": _matrix(d["R2"], "R2", m, m),
            "Gamma": _matrix(d["Gamma"], "Gamma", m, m),
            "f": _norm_f(d["f"]),
            "operator": _norm_operator(d["operator"], m),
            "y0": _vector(d["y0"], "y0", m),
            "ydot0": _vector(d["ydot0"], "ydot0", m),
        }
    _fail(f"{path}.type", f"unknown plant type {kind!r}")


def _norm_controller(d, m, path="controller"):
    if not isinstance(d, dict) or "type" not in d:
        _fail(path, "must be an object with a 'type'")
    kind = d["type"]
    if kind == "filter_funnel":
        _record(d, path, ("type", "theta_hat"), ("xi0",))
        out = {"type": kind, "theta_hat": _num(d, "theta_hat", path, positive=True)}
        # absent xi0 -> start with theta(t0) = 0, resolved when built
        out["xi0"] = _vector(d["xi0"], "xi0", m) if d.get("xi0") is not None else None
        return out
    if kind == "comparison":
        _record(
            d, path,
            ("type", "p1", "p2", "q1", "q2", "Gamma_tilde", "phi0", "phi1", "phi2", "z1_0", "z2_0"),
        )
        G = _matrix(d["Gamma_tilde"], "Gamma_tilde", m, m)
        if abs(np.linalg.det(np.array(G))) < 1e-12:
            _fail("Gamma_tilde", "must be invertible")
        return {
            "type": kind,
            **{k: _num(d, k, path) for k in ("p1", "p2", "q1", "q2")},
            "Gamma_tilde": G,
            **{k: _norm_funnel(d[k], f"{path}.{k}") for k in ("phi0", "phi1", "phi2")},
            "z1_0": _vector(d["z1_0"], "z1_0", m),
            "z2_0": _vector(d["z2_0"], "z2_0", m),
        }
    _fail(f"{path}.type", f"unknown controller type {kind!r}")


def _norm_sim(d, path="sim"):
    d = {} if d is None else d
    _record(d, path, (), tuple(SIM_DEFAULTS))
    out = {k: _num(d, k, path, positive=True, default=v) for k, v in SIM_DEFAULTS.items()}
    if out["output_dt"] >= out["t_end"]:
        _fail("output_dt", "must be smaller than t_end")
    return out


def _norm_sweep(d, path="sweep"):
    _record(d, path, ("param", "values"))
    if not isinstance(d["param"], str) or not d["param"]:
        _fail(f"{path}.param", "must be a dotted parameter path")
    values = d["values"]
    if not isinstance(values, list):
        _fail(f"{path}.values", "must be a list of numbers")
    return {"param": d["param"], "values": _vector(values, f"{path}.values") if values else []}


def normalize(raw: Any) -> dict:
    """Validate a raw scenario tree and return its normalized form."""
    _record(raw, "", ("plant", "controller", "funnel", "reference"), ("sim", "label", "sweep"))
    plant = _norm_plant(raw["plant"])
    m = 1 if plant["type"] == "benchmark" else plant["m"]
    reference = _norm_reference(raw["reference"])
    if _ref_dim(reference) != m:
        _fail("reference", f"has dimension {_ref_dim(reference)}, plant has m={m}")
    label = raw.get("label", "")
    if not isinstance(label, str):
        _fail("label", "must be a string")
    out = {
        "label": label,
        "plant": plant,
        "controller": _norm_controller(raw["controller"], m),
        "funnel": _norm_funnel(raw["funnel"], "funnel"),
        "reference": reference,
        "sim": _norm_sim(raw.get("sim")),
    }
    if raw.get("sweep") is not None:
        out["sweep"] = _norm_sweep(raw["sweep"])
        probe = copy.deepcopy(out)
        node = probe
        parts = out["sweep"]["param"].split(".")
        for part in parts:
            if not isinstance(node, dict) or part not in node:
                _fail("sweep.param", f"{out['sweep']['param']!r} does not resolve")
            node = node[part]
        if isinstance(node, bool) or not isinstance(node, (int, float)):
            _fail("sweep.param", "must name a scalar parameter")
    return out


# ---------------------------------------------------------------------------
# builders (normalized dict -> objects)
# ---------------------------------------------------------------------------


def build_funnel(d: dict) -> FunnelFunction:
    kind = d["type"]
    if kind == "constant":
        return ConstantFunnel(d["value"])
    if kind == "saturating_quadratic":
        return SaturatingQuadraticFunnel(d["kappa"], d["T"])
    if kind == "logistic":
        return LogisticFunnel()
    return CompositeFunnel(build_funnel(d["a"]), build_funnel(d["b"]))


def build_reference(d: dict) -> ReferenceSignal:
    kind = d["type"]
    if kind == "cosine":
        return CosineReference(d["amplitude"], d["omega"], d["phase"])
    if kind == "constant":
        return ConstantReference(d["value"])
    return SinusoidSumReference(
        tuple(SinusoidTerm(tm["amplitude"], tm["omega"], tm["phase"]) for tm in d["terms"])
    )


def build_operator(d: dict) -> CausalOperator:
    kind = d["type"]
    if kind == "memoryless":
        return MemorylessOperator()
    if kind == "delay":
        return DelayOperator(d["tau"])
    if kind == "saturated_derivative":
        return SaturatedDerivativeOperator(d["s"])
    return LinearInternalOperator(d["A"], d["B"], d["eta0"])


def build_plant(d: dict) -> PlantModel:
    if d["type"] == "benchmark":
        return make_benchmark(d["a"], d["b"], d["y0"], d["ydot0"])
    fd = d["f"]
    f = {
        "neg_sine": lambda: SineNonlinearity(fd.get("a", 0.0)),
        "cubic": lambda: CubicNonlinearity(fd.get("alpha", 0.0)),
        "tanh": lambda: TanhNonlinearity(fd.get("gain", 0.0)),
    }[fd["type"]]()
    return PlantModel(
        m=d["m"],
        R1=np.array(d["R1"]),
        R2=np.array(d["R2"]),
        Gamma=np.array(d["Gamma"]),
        f=f,
        operator=build_operator(d["operator"]),
        y0=np.array(d["y0"]),
        ydot0=np.array(d["ydot0"]),
    )


@dataclass(frozen=True)
class Scenario:
    """A validated scenario. Equality compares the normalized tree."""

    data: dict

    @classmethod
    def from_dict(cls, raw: Any) -> "Scenario":
        try:
            return cls(normalize(copy.deepcopy(raw)))
        except ScenarioError:
            raise
        except (ValueError, TypeError, np.linalg.LinAlgError) as exc:
            raise ScenarioError(str(exc)) from exc

    @property
    def label(self) -> str:
        return self.data["label"]

    @property
    def m(self) -> int:
        p = self.data["plant"]
        return 1 if p["type"] == "benchmark" else p["m"]

    @property
    def controller_type(self) -> str:
        return self.data["controller"]["type"]

    @property
    def sim(self) -> dict:
        return self.data["sim"]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=False) + "\n"

    def dump(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def get(self, param_path: str):
        node = self.data
        for part in param_path.split("."):
            if not isinstance(node, dict) or part not in node:
                raise ScenarioError(f"parameter path {param_path!r} does not resolve")
            node = node[part]
        return node

    def with_value(self, param_path: str, value) -> "Scenario":
        """Copy with the scalar at ``param_path`` replaced, re-validated."""
        cur = self.get(param_path)
        if isinstance(cur, bool) or not isinstance(cur, (int, float)):
            raise ScenarioError(f"parameter path {param_path!r} is not a scalar")
        data = self.to_dict()
        node = data
        parts = param_path.split(".")
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = value
        return Scenario.from_dict(data)

    # object builders; operators and controller state are fresh per call
    def plant(self) -> PlantModel:
        return build_plant(self.data["plant"])

    def funnel(self) -> FunnelFunction:
        return build_funnel(self.data["funnel"])

    def reference(self) -> ReferenceSignal:
        return build_reference(self.data["reference"])

    def controller_params(self):
        c = self.data["controller"]
        ref = self.reference()
        if c["type"] == "filter_funnel":
            phi = self.funnel()
            xi0 = c["xi0"]
            if xi0 is None:
                xi0 = default_xi0(phi, ref, self.data["plant"]["y0"], 0.0)
            return FilterControllerParams(c["theta_hat"], xi0, phi, ref)
        return ComparisonControllerParams(
            c["p1"], c["p2"], c["q1"], c["q2"], np.array(c["Gamma_tilde"]),
            build_funnel(c["phi0"]), build_funnel(c["phi1"]), build_funnel(c["phi2"]),
            c["z1_0"], c["z2_0"], ref,
        )


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    if not text.strip():
        raise ScenarioError(f"{source}:1:1: empty scenario file")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return Scenario.from_dict(raw)


def preset_path(name: str):
    return resources.files("funnelfilter.presets").joinpath(f"{name}.json")


def load_scenario(path) -> Scenario:
    """Load a scenario from a file path or a shipped preset name."""
    p = Path(path)
    if p.is_file():
        return parse_scenario(p.read_text(encoding="utf-8"), str(p))
    name = p.stem if p.suffix == ".json" else str(path)
    if name in PRESETS and str(p.parent) in (".", ""):
        res = preset_path(name)
        return parse_scenario(res.read_text(encoding="utf-8"), f"preset:{name}")
    raise ScenarioError(f"{path}: no such file or preset")
