"""Experiment configuration: parsing and validation with field paths."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .models import DEFAULT_BUDGET_BYTES, CircleBundleModel, ModelSpectrum, PointX, TorusGrauertTube
from .specfun import PROFILES, BumpFunction

SCHEMA_VERSION = 1
EXPERIMENTS = (
    "spectrum", "measure", "trace", "kernel-diag", "kernel-offdiag", "embed-pullback",
    "embed-equivariance", "embed-inject", "sphere-defect", "weyl", "fit", "report-all",
)
CHECK_OPS = ("<=", "<", ">=", ">", "==")
_TOP_KEYS = {
    "schema_version", "experiment", "model", "chi", "ks", "seed", "samples", "points",
    "embedding", "budget_mb", "output", "checks", "acceptance", "lambda_max", "input", "order",
}


@dataclass(frozen=True)
class Check:
    quantity: str
    op: str
    value: float

    def evaluate(self, summary: dict) -> dict:
        got = summary.get(self.quantity)
        ok = False
        if isinstance(got, (int, float)) and not isinstance(got, bool) and math.isfinite(got):
            ok = {
                "<=": got <= self.value, "<": got < self.value, ">=": got >= self.value,
                ">": got > self.value, "==": got == self.value,
            }[self.op]
        return {"quantity": self.quantity, "op": self.op, "value": self.value, "observed": got, "passed": ok}


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    experiment: str
    model: ModelSpectrum | None
    chi: BumpFunction | None
    ks: tuple
    seed: int
    samples: int
    points: tuple
    scaling: str
    budget_bytes: float
    output: dict
    checks: tuple = field(default=())


def _num(v, path, integer=False, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"must be a number, got {v!r}", path)
    if not math.isfinite(v):
        raise ValidationError(f"must be finite, got {v!r}", path)
    if integer and int(v) != v:
        raise ValidationError(f"must be an integer, got {v!r}", path)
    if positive and not v > 0:
        raise ValidationError(f"must be > 0, got {v!r}", path)
    if nonneg and v < 0:
        raise ValidationError(f"must be >= 0, got {v!r}", path)
    return int(v) if integer else float(v)


def _obj(v, path):
    if not isinstance(v, dict):
        raise ValidationError(f"must be an object, got {type(v).__name__}", path)
    return v


def _no_extra(d: dict, allowed: set, path: str):
    extra = sorted(set(d) - allowed)
    if extra:
        raise ValidationError(f"unknown field(s) {extra}", f"{path}.{extra[0]}" if path else extra[0])


def parse_model(d, budget_bytes: float = DEFAULT_BUDGET_BYTES) -> ModelSpectrum:
    d = _obj(d, "model")
    kind = d.get("kind")
    if kind == "torus":
        _no_extra(d, {"kind", "n", "eps", "operator_variant"}, "model")
        for key in ("n", "eps"):
            if key not in d:
                raise ValidationError("is required for a torus model", f"model.{key}")
        n = _num(d["n"], "model.n", integer=True)
        if n < 2:
            raise ValidationError(f"must be >= 2, got {n}", "model.n")
        eps = _num(d["eps"], "model.eps", positive=True)
        variant = d.get("operator_variant", "grauert")
        if variant not in ("grauert", "reeb"):
            raise ValidationError(f"must be grauert or reeb, got {variant!r}", "model.operator_variant")
        return TorusGrauertTube(n, eps, variant, budget_bytes)
    if kind == "circle_bundle":
        _no_extra(d, {"kind", "hilbert_coeffs", "preset"}, "model")
        preset = d.get("preset")
        if preset is not None:
            if preset not in ("CP1", "CP2"):
                raise ValidationError(f"must be CP1 or CP2, got {preset!r}", "model.preset")
            base = CircleBundleModel.cp1() if preset == "CP1" else CircleBundleModel.cp2()
            return CircleBundleModel(base.hilbert_coeffs, base.name, budget_bytes)
        coeffs = d.get("hilbert_coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            raise ValidationError("must be a nonempty list of numbers or fraction strings", "model.hilbert_coeffs")
        for i, c in enumerate(coeffs):
            if isinstance(c, bool) or not isinstance(c, (int, float, str)):
                raise ValidationError(f"invalid coefficient {c!r}", f"model.hilbert_coeffs[{i}]")
        try:
            return CircleBundleModel(tuple(coeffs), "custom", budget_bytes)
        except (ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(str(exc), "model.hilbert_coeffs") from exc
    raise ValidationError(f"must be 'torus' or 'circle_bundle', got {kind!r}", "model.kind")


def parse_chi(d) -> BumpFunction:
    d = _obj(d, "chi")
    _no_extra(d, {"delta1", "delta2", "profile"}, "chi")
    for key in ("delta1", "delta2"):
        if key not in d:
            raise ValidationError("is required", f"chi.{key}")
    d1 = _num(d["delta1"], "chi.delta1")
    d2 = _num(d["delta2"], "chi.delta2")
    if not d1 > 0:
        raise ValidationError(f"must be > 0, got {d1}", "chi.delta1")
    if not d1 < d2:
        raise ValidationError(f"must be < delta2 ({d2}), got {d1}", "chi.delta1")
    profile = d.get("profile", "exp")
    if profile not in PROFILES:
        raise ValidationError(f"unknown profile {profile!r}", "chi.profile")
    return BumpFunction(d1, d2, profile)


def parse_points(v, n: int) -> tuple:
    if not isinstance(v, list):
        raise ValidationError("must be a list of {x, y} objects", "points")
    out = []
    for i, p in enumerate(v):
        p = _obj(p, f"points[{i}]")
        _no_extra(p, {"x", "y"}, f"points[{i}]")
        for key in ("x", "y"):
            vals = p.get(key)
            if not isinstance(vals, list) or len(vals) != n:
                raise ValidationError(f"must be a list of {n} numbers", f"points[{i}].{key}")
            for j, c in enumerate(vals):
                _num(c, f"points[{i}].{key}[{j}]")
        out.append(PointX(p["x"], p["y"]))
    return tuple(out)


def validate(raw: dict) -> ExperimentConfig:
    """Check every field before anything is computed."""
    raw = _obj(raw, "")
    _no_extra(raw, _TOP_KEYS, "")
    ver = raw.get("schema_version", SCHEMA_VERSION)
    if ver != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema version {ver!r}; expected {SCHEMA_VERSION}", "schema_version")
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ValidationError(f"must be one of {list(EXPERIMENTS)}, got {exp!r}", "experiment")
    budget_mb = _num(raw.get("budget_mb", DEFAULT_BUDGET_BYTES / 2**20), "budget_mb", positive=True)
    budget = budget_mb * 2**20
    model = parse_model(raw["model"], budget) if "model" in raw else None
    chi = parse_chi(raw["chi"]) if "chi" in raw else None
    ks = raw.get("ks", [])
    if not isinstance(ks, list):
        raise ValidationError("must be a list of numbers", "ks")
    ks = tuple(_num(k, f"ks[{i}]", positive=True) for i, k in enumerate(ks))
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValidationError("must be strictly ascending", "ks")
    seed = _num(raw.get("seed", 0), "seed", integer=True, nonneg=True)
    samples = _num(raw.get("samples", 64), "samples", integer=True, positive=True)
    emb = _obj(raw.get("embedding", {}), "embedding")
    _no_extra(emb, {"scaling"}, "embedding")
    scaling = emb.get("scaling", "rescaled")
    if scaling not in ("plain", "rescaled", "sphere-normalized"):
        raise ValidationError(f"unknown scaling {scaling!r}", "embedding.scaling")
    output = _obj(raw.get("output", {}), "output")
    _no_extra(output, {"report", "csv"}, "output")
    for key, val in output.items():
        if not isinstance(val, str) or not val:
            raise ValidationError("must be a nonempty path string", f"output.{key}")
    points = ()
    if "points" in raw:
        if not isinstance(model, TorusGrauertTube):
            raise ValidationError("explicit points need a torus model", "points")
        points = parse_points(raw["points"], model.n)
        for i, p in enumerate(points):
            try:
                p.check_on(model.eps)
            except ValidationError as exc:
                raise ValidationError(str(exc), f"points[{i}].y") from None
    checks = raw.get("checks", [])
    if not isinstance(checks, list):
        raise ValidationError("must be a list", "checks")
    parsed_checks = []
    for i, c in enumerate(checks):
        c = _obj(c, f"checks[{i}]")
        _no_extra(c, {"quantity", "op", "value"}, f"checks[{i}]")
        if not isinstance(c.get("quantity"), str):
            raise ValidationError("must be a string", f"checks[{i}].quantity")
        if c.get("op") not in CHECK_OPS:
            raise ValidationError(f"must be one of {CHECK_OPS}", f"checks[{i}].op")
        parsed_checks.append(Check(c["quantity"], c["op"], _num(c.get("value"), f"checks[{i}].value")))
    if "acceptance" in raw:
        _validate_acceptance(raw["acceptance"])
    if "lambda_max" in raw:
        _num(raw["lambda_max"], "lambda_max", positive=True)
    if "order" in raw:
        _num(raw["order"], "order", positive=True)
    if "input" in raw and not isinstance(raw["input"], str):
        raise ValidationError("must be a path string", "input")

    needs_model = exp not in ("fit", "report-all")
    if needs_model and model is None:
        raise ValidationError(f"is required for experiment {exp!r}", "model")
    needs_torus = exp.startswith("kernel") or exp.startswith("embed") or exp in ("sphere-defect",)
    if needs_torus and not isinstance(model, TorusGrauertTube):
        raise ValidationError(f"experiment {exp!r} needs a torus model", "model.kind")
    if exp in ("measure", "trace") or needs_torus:
        if chi is None:
            raise ValidationError(f"is required for experiment {exp!r}", "chi")
    if exp in ("measure", "trace", "weyl") or needs_torus:
        if not ks:
            raise ValidationError(f"must be nonempty for experiment {exp!r}", "ks")
    if exp == "spectrum" and "lambda_max" not in raw:
        raise ValidationError("is required for experiment 'spectrum'", "lambda_max")
    if exp == "fit" and "input" not in raw:
        raise ValidationError("is required for experiment 'fit'", "input")
    return ExperimentConfig(
        raw=copy.deepcopy(raw), experiment=exp, model=model, chi=chi, ks=ks, seed=seed,
        samples=samples, points=points, scaling=scaling, budget_bytes=budget, output=dict(output),
        checks=tuple(parsed_checks),
    )


_ACCEPTANCE_KEYS = {
    "criteria", "eps", "ladder", "n3_measure_k", "trace_ks", "circle_ks", "injectivity_k",
    "defect_samples",
}


def _validate_acceptance(a) -> None:
    a = _obj(a, "acceptance")
    _no_extra(a, _ACCEPTANCE_KEYS, "acceptance")
    crit = a.get("criteria", list(range(1, 16)))
    if not isinstance(crit, list) or not crit:
        raise ValidationError("must be a nonempty list of criterion ids", "acceptance.criteria")
    for i, c in enumerate(crit):
        c = _num(c, f"acceptance.criteria[{i}]", integer=True)
        if not 1 <= c <= 15:
            raise ValidationError(f"criterion ids run from 1 to 15, got {c}", f"acceptance.criteria[{i}]")
    for key in ("ladder", "trace_ks", "circle_ks"):
        if key in a:
            v = a[key]
            if not isinstance(v, list) or len(v) < 3 and key == "ladder":
                raise ValidationError("must be a list of at least 3 numbers", f"acceptance.{key}")
            vals = [_num(x, f"acceptance.{key}[{i}]", positive=True) for i, x in enumerate(v)]
            if any(b <= x for x, b in zip(vals, vals[1:])):
                raise ValidationError("must be strictly ascending", f"acceptance.{key}")
    for key in ("eps", "n3_measure_k", "injectivity_k"):
        if key in a:
            _num(a[key], f"acceptance.{key}", positive=True)
    if "defect_samples" in a:
        _num(a["defect_samples"], "acceptance.defect_samples", integer=True, positive=True)


def load(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"config file {path} not found", "config") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not valid JSON: {exc}", "config") from None
    return validate(raw)


def apply_override(raw: dict, assignment: str) -> dict:
    """Apply ``a.b.c=value`` to a raw config; value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ValidationError(f"override {assignment!r} is not of the form key=value", "override")
    key, val = assignment.split("=", 1)
    try:
        parsed = json.loads(val)
    except json.JSONDecodeError:
        parsed = val
    out = copy.deepcopy(raw)
    node = out
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ValidationError("cannot override inside a non-object", key)
    node[parts[-1]] = parsed
    return out
