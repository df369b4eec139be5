"""Run configuration: TOML files validated against a JSON schema.

A configuration names the system, an optional subset and measure, a
``compute`` block of numerical parameters and an ``output`` block.  A JSON
sidecar written by a previous run is accepted in place of the TOML file and
replays that run.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .measures import MeasureSpec
from .symbolic import ShiftSpec, SubsetSpec, ball_cylinder_length, parse_words

__all__ = ["ConfigError", "RunConfig", "load_config", "schema"]

DEFAULT_COMPUTE = {
    "epsilon": [0.4, 0.2, 0.1],
    "delta": [0.1, 0.01, 0.001],
    "n_min": 50,
    "n_max": 400,
    "tol": 1e-3,
    "gap_tol": 1e-3,
    "ball": "open",
    "precision": "double",
    "samples": 200,
    "mode": "exact",
    "check_tol": 0.05,
    "instances": 100,
    "max_depth": 5,
}

STOCHASTIC = {"sandwich", "oracle-check"}


class ConfigError(ValueError):
    """Configuration that fails the schema or a consistency check."""


def schema() -> dict:
    return json.loads(resources.files("nbe").joinpath("config_schema.json").read_text())


def _listify(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass
class RunConfig:
    """A validated configuration plus the objects it describes."""

    raw: dict
    shift: ShiftSpec
    subset: SubsetSpec
    measure: MeasureSpec | None
    compute: dict
    output: dict

    @property
    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the configuration."""
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def eps(self) -> list[float]:
        return [float(e) for e in _listify(self.compute["epsilon"])]

    @property
    def deltas(self) -> list[float]:
        return [float(d) for d in _listify(self.compute["delta"])]

    @property
    def n_mins(self) -> list[int]:
        return [int(n) for n in _listify(self.compute["n_min"])]


def _read(path: Path) -> tuple[dict, dict]:
    """Configuration dict and any overrides recorded in a sidecar."""
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
        if "config" not in data:
            raise ConfigError(f"{path}: JSON input must be a run sidecar with a 'config' block")
        return data["config"], data.get("overrides", {})
    return tomllib.loads(text), {}


def load_config(path, overrides: dict | None = None, command: str | None = None) -> RunConfig:
    """Read, merge overrides, validate and build a :class:`RunConfig`.

    Raises
    ------
    ConfigError
        On unreadable input, schema violations, inconsistent dimensions,
        or a missing seed for a stochastic command.
    """
    path = Path(path)
    try:
        raw, recorded = _read(path)
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    raw = copy.deepcopy(raw)
    for key, value in {**recorded, **(overrides or {})}.items():
        if value is not None:
            raw.setdefault("compute", {})[key] = value
    try:
        jsonschema.validate(raw, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from exc
    return build(raw, command)


def build(raw: dict, command: str | None = None) -> RunConfig:
    sysc = raw["system"]
    N = sysc["alphabet"]
    try:
        if sysc.get("kind", "full") == "sft":
            if "transitions" not in sysc:
                raise ConfigError("system.kind = 'sft' needs system.transitions")
            shift = ShiftSpec.sft(sysc["transitions"])
            if shift.alphabet_size != N:
                raise ConfigError(f"system.transitions is not {N}x{N}")
        else:
            shift = ShiftSpec.full(N)
        sub = raw.get("subset", {})
        kind = sub.get("kind", "whole")
        if kind == "cylinders":
            if "cylinders" not in sub:
                raise ConfigError("subset.kind = 'cylinders' needs subset.cylinders")
            subset = SubsetSpec.cylinder_union(parse_words(sub["cylinders"]))
        elif kind == "sft":
            if "transitions" not in sub:
                raise ConfigError("subset.kind = 'sft' needs subset.transitions")
            subset = SubsetSpec.sft_subsystem(sub["transitions"])
        else:
            subset = SubsetSpec.whole()
        subset.validate(shift)
        measure = _measure(raw.get("measure"), shift, subset)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    compute = {**DEFAULT_COMPUTE, **raw.get("compute", {})}
    if max(_listify(compute["n_min"])) > compute["n_max"]:
        raise ConfigError("compute.n_min exceeds compute.n_max")
    if any(not e > 0 for e in _listify(compute["epsilon"])):
        raise ConfigError("compute.epsilon must be positive")
    if any(not 0 < d < 1 for d in _listify(compute["delta"])):
        raise ConfigError("compute.delta must lie in (0, 1)")
    depth = ball_cylinder_length(compute["n_max"], min(_listify(compute["epsilon"])),
                                 N, compute["ball"])
    if subset.max_word_length() > depth:
        raise ConfigError(f"subset cylinder of length {subset.max_word_length()} is deeper than "
                          f"the truncation depth {depth} (raise n_max or epsilon)")
    stochastic = command in STOCHASTIC or (command == "brin-katok"
                                           and compute["mode"] == "monte-carlo")
    if stochastic and "seed" not in compute:
        raise ConfigError(f"command {command!r} is stochastic: compute.seed is required")
    output = {"dir": ".", "prefix": "nbe", "display_base": "e", **raw.get("output", {})}
    return RunConfig(raw, shift, subset, measure, compute, output)


def _measure(m: dict | None, shift: ShiftSpec, subset: SubsetSpec) -> MeasureSpec | None:
    if m is None:
        return None
    N = shift.alphabet_size
    kind = m.get("kind", "uniform")
    if kind == "uniform":
        mu = MeasureSpec.uniform(N)
    elif kind == "bernoulli":
        if len(m.get("probs", ())) != N:
            raise ConfigError(f"measure.probs must have {N} entries")
        mu = MeasureSpec.bernoulli(m["probs"])
    elif kind == "markov":
        if "matrix" not in m:
            raise ConfigError("measure.kind = 'markov' needs measure.matrix")
        if len(m["matrix"]) != N:
            raise ConfigError(f"measure.matrix must be {N}x{N}")
        mu = MeasureSpec.markov(m["matrix"], m.get("stationary"))
    else:
        target = ShiftSpec.sft(subset.sub_transitions) if subset.kind == "sft" else shift
        mu = MeasureSpec.parry(target)
    mu.check_support(shift)
    return mu
