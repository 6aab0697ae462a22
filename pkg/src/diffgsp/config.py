"""Scenario configuration: flat ``section.key = value`` text files.

Values are JSON literals (numbers, ``true``/``false``, quoted strings, lists);
a bare word is read as a string. ``#`` starts a comment. Every key must be
known to the schema, and every key not given takes its documented default, so
a resolved :class:`ScenarioSpec` always has a value for every field. The
resolved spec is written back in the same format as the run manifest.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigInvalid, ConfigParseError

KINDS = ("convergence", "msd-validate", "transient", "tracking", "compare", "psd")

# section -> key -> default
SCHEMA = {
    "scenario": {
        "kind": "convergence",
        "name": "",
    },
    "graph": {
        "source": "fixture",          # fixture | file | geometric | psd
        "fixture": "geo20",
        "path": "",
        "n_nodes": 20,
        "radius": 0.4,
        "seed": 0,
        "communication": "same",      # same | fixture name | edge-list path
    },
    "signal": {
        "bandwidth": 5,
        "frequencies": "lowest",      # "lowest" or explicit index list
        "coefficient_seed": 0,
        "theta": 0.99,
        "f_o": 1e-3,
        "noise_scale": 1.0,
    },
    "sampling": {
        "strategy": "maxdet",         # maxdet | maxlambdamin | random | given
        "budgets": [10],
        "probability": 0.8,
        "nodes": [],
        "zero_probability_nodes": [],
        "random_seed": 0,
    },
    "noise": {
        "variance_min": 0.0,
        "variance_max": 0.1,
        "seed": 0,
    },
    "diffusion": {
        "step_sizes": [0.5],
        "mode": "atc",
        "combination": "metropolis",
    },
    "run": {
        "horizon": "auto",
        "burn_in": "auto",
        "window": 500,
        "replicas": 200,
        "seed": 0,
        "init": "zero",
        "settle_tolerance": 1e-6,
    },
    "compare": {
        "strategies": ["maxdet", "maxlambdamin", "random"],
        "seeds": 100,
    },
    "psd": {
        "side": 200.0,
        "n_raps": 150,
        "n_pus": 4,
        "tx_power": 0.01,
        "pathloss_exponent": 2.0,
        "reference_distance": 1.0,
        "detector_samples": 100,
        "detector_noise": 1e-4,
        "switch_period": 10000,
        "phases": 4,
        "radius_grid": [20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 60.0, 70.0, 80.0, 100.0],
        "max_retries": 100,
        "seed": 0,
    },
}

# per-kind defaults layered over SCHEMA
KIND_DEFAULTS = {
    "convergence": {
        "sampling.budgets": [3, 5, 10, 15],
        "sampling.probability": 1.0,
        "noise.variance_max": 0.0,
        "run.horizon": 5000,
        "run.replicas": 1,
    },
    "msd-validate": {
        "sampling.budgets": [5, 15],
        "sampling.probability": 0.8,
    },
    "transient": {
        "signal.bandwidth": 2,
        "sampling.budgets": [10],
        "sampling.probability": 0.5,
        "diffusion.step_sizes": [0.2, 0.5],
    },
    "tracking": {
        "graph.communication": "same",
        "sampling.budgets": [10],
        "sampling.probability": 0.5,
        "diffusion.step_sizes": [1.0],
        "run.horizon": 4000,
        "run.replicas": 1,
        "run.burn_in": 1000,
    },
    "compare": {
        "sampling.budgets": [5, 6, 7, 8, 9, 10],
        "sampling.probability": 0.8,
    },
    "psd": {
        "graph.source": "psd",
        "signal.bandwidth": 20,
        "sampling.budgets": [60],
        "sampling.probability": 1.0,
        "diffusion.step_sizes": [1.0],
        "run.replicas": 1,
        "run.burn_in": 0,
    },
}

_LINE = re.compile(r"^([A-Za-z_][\w-]*)\.([A-Za-z_][\w-]*)\s*=\s*(.*)$")


def _parse_value(text: str, where: str):
    text = text.strip()
    if not text:
        raise ConfigParseError(f"{where}: missing value")
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if re.fullmatch(r"[\w./-]+", text):
            return text
        raise ConfigParseError(f"{where}: cannot parse value {text!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse config text into ``{"section.key": value}``; duplicates are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        m = _LINE.match(line)
        if not m:
            raise ConfigParseError(f"{where}: expected 'section.key = value'")
        section, key, value = m.groups()
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigParseError(f"{where}: unknown key {section}.{key}")
        name = f"{section}.{key}"
        if name in out:
            raise ConfigParseError(f"{where}: {name} given twice")
        out[name] = _parse_value(value, where)
    return out


def _strip_comment(line: str) -> str:
    # '#' inside a quoted string is kept
    in_str = False
    for k, ch in enumerate(line):
        if ch == '"' and (k == 0 or line[k - 1] != "\\"):
            in_str = not in_str
        elif ch == "#" and not in_str:
            return line[:k]
    return line


def _type_ok(default, value) -> bool:
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int) or isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, list):
        return isinstance(value, list)
    return isinstance(value, (str, list, int, float)) and not isinstance(value, bool)


@dataclass(frozen=True)
class ScenarioSpec:
    """Fully resolved scenario: every schema key has a value."""

    values: dict

    def __getitem__(self, name: str):
        return self.values[name]

    @property
    def kind(self) -> str:
        return self.values["scenario.kind"]

    def with_overrides(self, **overrides) -> "ScenarioSpec":
        """Copy with ``section__key=value`` overrides."""
        vals = dict(self.values)
        for k, v in overrides.items():
            name = k.replace("__", ".", 1)
            if name not in vals:
                raise ConfigParseError(f"unknown key {name}")
            vals[name] = v
        return resolve(vals, apply_kind_defaults=False)

    def to_text(self, header: str = "") -> str:
        lines = [f"# {h}" for h in header.splitlines()] if header else []
        for section, keys in SCHEMA.items():
            lines.append("")
            for key in keys:
                name = f"{section}.{key}"
                lines.append(f"{name} = {json.dumps(self.values[name])}")
        return "\n".join(lines).lstrip("\n") + "\n"


def resolve(given: dict, apply_kind_defaults: bool = True) -> ScenarioSpec:
    kind = given.get("scenario.kind")
    if kind is None:
        raise ConfigInvalid("scenario.kind is required")
    if kind not in KINDS:
        raise ConfigInvalid(f"unknown scenario kind {kind!r}; expected one of {KINDS}")
    vals = {f"{s}.{k}": v for s, keys in SCHEMA.items() for k, v in keys.items()}
    if apply_kind_defaults:
        vals.update(KIND_DEFAULTS[kind])
    vals.update(given)
    if not vals["scenario.name"]:
        vals["scenario.name"] = kind
    for name, value in vals.items():
        section, key = name.split(".", 1)
        if not _type_ok(SCHEMA[section][key], value):
            raise ConfigInvalid(f"{name}: value {value!r} has the wrong type")
    return ScenarioSpec(vals)


def load_spec(path) -> ScenarioSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    return resolve(parse_config_text(text, str(path)))


def loads_spec(text: str) -> ScenarioSpec:
    return resolve(parse_config_text(text))
