"""YAML spec files and the built-in presets.

A spec file looks like::

    name: example-3.7
    p: 2
    z: [0.0]
    partition:
      levels: [1.0]            # or {rule: power, scale: 1.0, exponent: 1.0}
      boundary: [upper]        # upper | lower | point, one per threshold
      labels: [1, 2]           # optional: regime of each cell, bottom-up
    coefficients:
      diffusions:              # one per regime, or {kind: power_law, scale, exponent}
        - {kind: constant, scale: 1.4142135623730951}
        - {kind: constant, scale: 0.0}
      drift: {kind: constant, value: [-1.0]}
      growth: {drift: 1.0, diffusions: [1.5, 1.0]}      # optional
      lipschitz: {drift: 0.0, diffusions: [0.0, 0.0]}   # optional
    initial: {kind: dirac, point: [1.0]}
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any

import yaml

from .errors import SpecError, UnsupportedSpecError
from .model import (
    ConstantDiffusion,
    ConstantDrift,
    CutoffSqrtDrift,
    DyadicSwitchDiffusion,
    EquationSpec,
    InitialLaw,
    LevelRule,
    LinearDrift,
    PowerLawDiffusions,
    RegimeCoefficients,
    Side,
    ThresholdPartition,
    validate,
)

# ---------------------------------------------------------------------------
# dict <-> spec


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    return float(v)


def spec_to_dict(spec: EquationSpec) -> dict:
    out: dict[str, Any] = {}
    if spec.name:
        out["name"] = spec.name
    out["p"] = spec.p
    out["z"] = list(spec.z)
    out["partition"] = spec.partition.to_dict()
    out["coefficients"] = spec.coefficients.to_dict()
    out["initial"] = spec.initial.to_dict()
    return _plain(out)


def dump_spec(spec: EquationSpec) -> str:
    return yaml.safe_dump(spec_to_dict(spec), sort_keys=False, default_flow_style=None)


class _Reader:
    """Pulls typed fields out of nested dicts, reporting the key path on failure."""

    def __init__(self, lines: dict | None = None):
        self.lines = lines or {}

    def fail(self, path: tuple, msg: str):
        line = None
        for n in range(len(path), -1, -1):
            if path[:n] in self.lines:
                line = self.lines[path[:n]]
                break
        key = ".".join(str(p) for p in path) or "<root>"
        raise SpecError(f"{key}: {msg}", line=line)

    def get(self, d, key, path, kind=None, default=...):
        if not isinstance(d, dict):
            self.fail(path, "expected a mapping")
        if key not in d:
            if default is ...:
                self.fail(path + (key,), "missing required field")
            return default
        v = d[key]
        if kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                self.fail(path + (key,), f"expected a number, got {v!r}")
            return float(v)
        if kind is int:
            if isinstance(v, bool) or not isinstance(v, int):
                self.fail(path + (key,), f"expected an integer, got {v!r}")
            return v
        if kind is list:
            if not isinstance(v, list):
                self.fail(path + (key,), "expected a list")
            return v
        return v

    def floats(self, d, key, path, default=...):
        v = self.get(d, key, path, default=default)
        if v is default and default is not ...:
            return v
        if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            self.fail(path + (key,), "expected a list of numbers")
        return tuple(float(x) for x in v)


def _partition(r: _Reader, d: dict, path) -> ThresholdPartition:
    levels = r.get(d, "levels", path)
    if isinstance(levels, dict):
        lp = path + ("levels",)
        rule = LevelRule(
            kind=r.get(levels, "rule", lp, default="power"),
            scale=r.get(levels, "scale", lp, float, 1.0),
            exponent=r.get(levels, "exponent", lp, float, 1.0),
        )
        bd = r.get(d, "boundary", path, default={}) or {}
        if not isinstance(bd, dict):
            r.fail(path + ("boundary",), "infinite partitions take a {k: side} override map")
        try:
            return ThresholdPartition(rule, tuple((int(k), Side(v)) for k, v in bd.items()))
        except ValueError as exc:
            r.fail(path + ("boundary",), str(exc))
    ys = r.floats(d, "levels", path)
    sides = r.get(d, "boundary", path, list, default=None)
    labels = r.get(d, "labels", path, list, default=None)
    try:
        return ThresholdPartition(
            ys,
            tuple(Side(s) for s in sides) if sides is not None else (),
            tuple(int(v) for v in labels) if labels is not None else None,
        )
    except ValueError as exc:
        r.fail(path, str(exc))


def _diffusion(r: _Reader, d: dict, path):
    kind = r.get(d, "kind", path)
    if kind == "constant":
        if "matrix" in d:
            m = r.get(d, "matrix", path, list)
            return ConstantDiffusion(matrix=tuple(tuple(float(x) for x in row) for row in m))
        return ConstantDiffusion(scale=r.get(d, "scale", path, float))
    if kind == "dyadic_switch":
        return DyadicSwitchDiffusion(
            amplitude=r.get(d, "amplitude", path, float, math.sqrt(2.0)),
            depth=r.get(d, "depth", path, int, 60),
        )
    r.fail(path + ("kind",), f"unknown diffusion kind {kind!r}")


def _drift(r: _Reader, d: dict, path, z):
    kind = r.get(d, "kind", path)
    if kind == "constant":
        return ConstantDrift(r.floats(d, "value", path))
    if kind == "linear":
        return LinearDrift(r.get(d, "rate", path, float), r.floats(d, "center", path, default=tuple(z)))
    if kind == "cutoff_sqrt":
        return CutoffSqrtDrift(r.get(d, "alpha", path, float, 0.25))
    r.fail(path + ("kind",), f"unknown drift kind {kind!r}")


def _initial(r: _Reader, d: dict, path, z, p):
    kind = r.get(d, "kind", path)
    if kind == "dirac":
        return InitialLaw.dirac(r.floats(d, "point", path), z, p)
    if kind == "gaussian":
        return InitialLaw.gaussian(r.floats(d, "mean", path), r.get(d, "std", path, float), z, p)
    if kind == "moments":
        try:
            return InitialLaw.from_moments(r.floats(d, "m0", path), r.get(d, "M0", path, float), z, p)
        except UnsupportedSpecError as exc:
            r.fail(path, str(exc))
    r.fail(path + ("kind",), f"unknown initial law kind {kind!r}")


def spec_from_dict(data: Any, lines: dict | None = None) -> EquationSpec:
    r = _Reader(lines)
    root = ()
    if not isinstance(data, dict):
        r.fail(root, "spec must be a mapping")
    p = r.get(data, "p", root, float)
    z = r.floats(data, "z", root)
    part = _partition(r, r.get(data, "partition", root), ("partition",))
    cd = r.get(data, "coefficients", root)
    cp = ("coefficients",)
    diffs = r.get(cd, "diffusions", cp)
    if isinstance(diffs, dict):
        if diffs.get("kind") != "power_law":
            r.fail(cp + ("diffusions",), "a mapping here must be {kind: power_law, ...}")
        diffusions: Any = PowerLawDiffusions(
            r.get(diffs, "scale", cp + ("diffusions",), float, 1.0),
            r.get(diffs, "exponent", cp + ("diffusions",), float, 1.0),
        )
    elif isinstance(diffs, list):
        diffusions = tuple(_diffusion(r, s, cp + ("diffusions", i)) for i, s in enumerate(diffs))
    else:
        r.fail(cp + ("diffusions",), "expected a list or a power_law mapping")
    drift = _drift(r, r.get(cd, "drift", cp), cp + ("drift",), z)
    growth = r.get(cd, "growth", cp, default={}) or {}
    lips = r.get(cd, "lipschitz", cp, default={}) or {}
    coeffs = RegimeCoefficients(
        diffusions,
        drift,
        drift_growth=r.get(growth, "drift", cp + ("growth",), float, None),
        diffusion_growth=r.floats(growth, "diffusions", cp + ("growth",), default=None),
        drift_lipschitz=r.get(lips, "drift", cp + ("lipschitz",), float, None),
        diffusion_lipschitz=r.floats(lips, "diffusions", cp + ("lipschitz",), default=None),
    )
    initial = _initial(r, r.get(data, "initial", root), ("initial",), z, p)
    spec = EquationSpec(p, z, part, coeffs, initial, name=str(data.get("name", "")))
    problems = validate(spec)
    if problems:
        raise SpecError("invalid spec: " + "; ".join(problems), line=r.lines.get((), None))
    return spec


def _line_map(text: str) -> dict:
    """Map key paths to 1-based source lines using the YAML node tree."""
    out: dict = {}

    def walk(node, path):
        out[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, path + (k.value,))
                out[path + (k.value,)] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return out
    if root is not None:
        walk(root, ())
    out.pop((), None)
    return out


def parse_spec(text: str, source: str | None = None) -> EquationSpec:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SpecError(f"YAML parse error: {getattr(exc, 'problem', exc)}",
                        line=mark.line + 1 if mark else None, path=source) from None
    try:
        return spec_from_dict(data, _line_map(text))
    except SpecError as exc:
        if source is not None and exc.path is None:
            raise SpecError(str(exc).split(": ", 1)[-1] if exc.line else str(exc), line=exc.line, path=source) from None
        raise


# ---------------------------------------------------------------------------
# presets


def point_cell_preset(a: float = 1.0) -> EquationSpec:
    """``X = 1 + int 1{g != 1 + a} dB``: the level ``1 + a`` is a single-point regime."""
    z = (0.0,)
    return EquationSpec(
        2.0, z,
        ThresholdPartition((1.0 + a,), (Side.POINT,), (1, 2, 1)),
        RegimeCoefficients((ConstantDiffusion(1.0), ConstantDiffusion(0.0)), ConstantDrift((0.0,))),
        InitialLaw.dirac((1.0,), z),
        name="example-2.3",
    )


def ladder_preset(alpha: float = 1.0, levels: LevelRule = LevelRule("power", 1.0, 1.0), M0: float = 0.5) -> EquationSpec:
    """Linear outward drift ``b = x``, regime n diffusion ``n**alpha`` on ``[y_{n-1}, y_n)``."""
    z = (0.0,)
    return EquationSpec(
        2.0, z,
        ThresholdPartition(levels),
        RegimeCoefficients(PowerLawDiffusions(1.0, alpha), LinearDrift(1.0, z), drift_growth=1.0),
        InitialLaw.from_moments((0.0,), M0, z),
        name="example-2.6",
    )


def _sqrt2_switch(initial_point: float, name: str) -> EquationSpec:
    z = (0.0,)
    return EquationSpec(
        2.0, z,
        ThresholdPartition((1.0,), (Side.UPPER,)),
        RegimeCoefficients((ConstantDiffusion(math.sqrt(2.0)), ConstantDiffusion(0.0)), ConstantDrift((-1.0,))),
        InitialLaw.dirac((initial_point,), z),
        name=name,
    )


def switch_from_one() -> EquationSpec:
    return _sqrt2_switch(1.0, "example-3.7")


def switch_from_zero() -> EquationSpec:
    return _sqrt2_switch(0.0, "example-3.8")


def dyadic_oscillation(alpha: float = 0.25) -> EquationSpec:
    z = (0.0,)
    return EquationSpec(
        2.0, z,
        ThresholdPartition((1.0,), (Side.UPPER,)),
        RegimeCoefficients((DyadicSwitchDiffusion(math.sqrt(2.0)), ConstantDiffusion(0.0)), CutoffSqrtDrift(alpha)),
        InitialLaw.dirac((1.0,), z),
        name="oscillation-3.10",
    )


PRESETS = {
    "example-2.3": point_cell_preset,
    "example-2.6": ladder_preset,
    "example-3.7": switch_from_one,
    "example-3.8": switch_from_zero,
    "oscillation-3.10": dyadic_oscillation,
}


def load_spec(path_or_preset: str | Path) -> EquationSpec:
    """Load a preset by name or parse and validate a YAML spec file."""
    key = str(path_or_preset)
    if key in PRESETS:
        return PRESETS[key]()
    path = Path(key)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read spec: {exc.strerror or exc}", path=key) from None
    return parse_spec(text, source=key)
