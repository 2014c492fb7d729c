"""Run configuration: loading, ``--set`` overrides and schema validation.

A configuration is a JSON object::

    {"scenario": "corridor", "seed": 0, "output_dir": "out/corridor",
     "parameters": {"f": 1.0, "R": 2.0, "k": 0.2}}

Validation collects every problem instead of stopping at the first.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Any

from ..errors import ConfigError
from ..multichannel import ProjectionPattern

TOP_LEVEL = ("scenario", "seed", "output_dir", "parameters")


@dataclass(frozen=True)
class Param:
    """Schema entry for one scenario parameter.

    ``kind`` is one of ``float``, ``int``, ``bool``, ``str``, ``vec``
    (list of numbers, ``length`` entries when given), ``mat`` (list of
    equal-length numeric rows) or ``pattern`` (``"P[1,0,1]"`` or a 0/1 list).
    """

    kind: str
    doc: str
    default: Any = None
    required: bool = False
    low: float | None = None
    high: float | None = None
    low_open: bool = False
    choices: tuple = ()
    length: int | None = None

    def describe(self) -> str:
        bits = [self.kind]
        if self.required:
            bits.append("required")
        else:
            bits.append(f"default {json.dumps(self.default)}")
        if self.low is not None or self.high is not None:
            lo = "(" if self.low_open else "["
            bits.append(f"range {lo}{'-inf' if self.low is None else self.low}, "
                        f"{'inf' if self.high is None else self.high}]")
        if self.choices:
            bits.append("one of " + ", ".join(map(str, self.choices)))
        return f"{'; '.join(bits)}. {self.doc}"


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def check_value(name: str, param: Param, value) -> list[str]:
    """Diagnostics for one value against its schema entry (empty when fine)."""
    out = []
    if value is None and param.default is None and not param.required:
        return out
    if param.kind == "float":
        if not _is_number(value):
            return [f"parameters.{name}: expected a finite number, got {value!r}"]
    elif param.kind == "int":
        if not (isinstance(value, int) and not isinstance(value, bool)):
            return [f"parameters.{name}: expected an integer, got {value!r}"]
    elif param.kind == "bool":
        if not isinstance(value, bool):
            return [f"parameters.{name}: expected true or false, got {value!r}"]
    elif param.kind == "str":
        if not isinstance(value, str):
            return [f"parameters.{name}: expected a string, got {value!r}"]
    elif param.kind == "vec":
        if not (isinstance(value, list) and value and all(_is_number(v) for v in value)):
            return [f"parameters.{name}: expected a non-empty list of numbers, got {value!r}"]
        if param.length is not None and len(value) != param.length:
            return [f"parameters.{name}: expected {param.length} entries, got {len(value)}"]
    elif param.kind == "mat":
        ok = (isinstance(value, list) and value and all(isinstance(r, list) and r for r in value)
              and all(_is_number(v) for r in value for v in r))
        if not ok:
            return [f"parameters.{name}: expected a list of numeric rows, got {value!r}"]
        if len({len(r) for r in value}) != 1:
            return [f"parameters.{name}: rows differ in length"]
    elif param.kind == "pattern":
        try:
            ProjectionPattern.parse(value)
        except (ValueError, TypeError):
            return [f"parameters.{name}: expected a pattern like \"P[1,0,1]\", got {value!r}"]
    if param.choices and value not in param.choices:
        out.append(f"parameters.{name}: {value!r} is not one of {list(param.choices)}")
    if param.kind in ("float", "int"):
        if param.low is not None:
            if param.low_open and not value > param.low:
                out.append(f"parameters.{name}: {value!r} out of range, must be > {param.low}")
            elif not param.low_open and not value >= param.low:
                out.append(f"parameters.{name}: {value!r} out of range, must be >= {param.low}")
        if param.high is not None and not value <= param.high:
            out.append(f"parameters.{name}: {value!r} out of range, must be <= {param.high}")
    return out


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror or exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config {path} is not valid JSON: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ConfigError(["config must be a JSON object"])
    return data


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: dict, overrides) -> dict:
    """Apply ``key=value`` overrides; values are parsed as JSON when possible.

    Dotted keys address nested objects (``parameters.k=0.3``).  A bare key
    that is not a top-level field is taken as a scenario parameter.
    """
    config = copy.deepcopy(config)
    problems = []
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            problems.append(f"--set {item!r}: expected key=value")
            continue
        path = key.split(".")
        if path[0] not in TOP_LEVEL:
            path = ["parameters"] + path
        node = config
        for part in path[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            if not isinstance(child, dict):
                problems.append(f"--set {key}: {part} is not an object")
                break
            node = child
        else:
            node[path[-1]] = _parse_value(raw)
    if problems:
        raise ConfigError(problems)
    return config


@dataclass
class ResolvedConfig:
    scenario: str
    seed: int
    output_dir: str | None
    parameters: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {"scenario": self.scenario, "seed": self.seed, "parameters": self.parameters}


def validate_config(config, catalogue) -> list[str]:
    """Every problem found in ``config``; an empty list means valid."""
    if not isinstance(config, dict):
        return ["config must be a JSON object"]
    problems = []
    for key in sorted(set(config) - set(TOP_LEVEL)):
        problems.append(f"{key}: unknown top-level key (allowed: {', '.join(TOP_LEVEL)})")
    seed = config.get("seed", 0)
    if not (isinstance(seed, int) and not isinstance(seed, bool)) or seed < 0:
        problems.append(f"seed: expected a non-negative integer, got {seed!r}")
    out = config.get("output_dir")
    if out is not None and not (isinstance(out, str) and out):
        problems.append(f"output_dir: expected a non-empty path string, got {out!r}")
    params = config.get("parameters", {})
    if not isinstance(params, dict):
        problems.append("parameters: expected an object")
        params = {}
    name = config.get("scenario")
    if name is None:
        problems.append("scenario: missing required key (choose from: " + ", ".join(catalogue) + ")")
        return problems
    if name not in catalogue:
        problems.append(f"scenario: unknown scenario {name!r} (choose from: {', '.join(catalogue)})")
        return problems
    schema = catalogue[name].schema
    for key, param in schema.items():
        if key not in params:
            if param.required:
                problems.append(f"parameters.{key}: missing required key ({param.doc})")
            continue
        problems.extend(check_value(key, param, params[key]))
    for key in sorted(set(params) - set(schema)):
        problems.append(f"parameters.{key}: unknown parameter for scenario {name!r}")
    problems.extend(catalogue[name].cross_check({**{k: s.default for k, s in schema.items()}, **params})
                    if not problems else [])
    return problems


def resolve(config: dict, catalogue) -> ResolvedConfig:
    problems = validate_config(config, catalogue)
    if problems:
        raise ConfigError(problems)
    scenario = catalogue[config["scenario"]]
    params = {k: copy.deepcopy(s.default) for k, s in scenario.schema.items() if not s.required}
    params.update(copy.deepcopy(config.get("parameters", {})))
    return ResolvedConfig(config["scenario"], int(config.get("seed", 0)), config.get("output_dir"), params)
