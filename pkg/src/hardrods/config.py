"""Experiment configuration: YAML file, JSON-schema validated, flag overrides."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from .measures import VelocityLengthMeasure
from .testfunctions import TestFunction

_law = {
    "oneOf": [
        {"type": "number"},
        {"type": "object", "properties": {"atom": {"type": "number"}}, "required": ["atom"],
         "additionalProperties": False},
        {"type": "object", "properties": {"uniform": {"type": "array", "items": {"type": "number"},
                                                      "minItems": 2, "maxItems": 2}},
         "required": ["uniform"], "additionalProperties": False},
        {"type": "object", "properties": {"gaussian": {"type": "array", "items": {"type": "number"},
                                                       "minItems": 2, "maxItems": 2}},
         "required": ["gaussian"], "additionalProperties": False},
        {"type": "object", "properties": {"exponential": {"type": "number", "exclusiveMinimum": 0}},
         "required": ["exponential"], "additionalProperties": False},
    ]
}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 2}
_times = {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1}
_tf = {"type": "object", "required": ["kind", "width"], "additionalProperties": False,
       "properties": {"kind": {"enum": ["gaussian_bump", "cosine_packet", "poly_bump"]},
                      "name": {"type": "string"}, "center": {"type": "number"},
                      "width": _pos, "wavenumber": {"type": "number"},
                      "coef": {"type": "number"},
                      "velocity_poly": {"type": "array", "items": {"type": "number"}},
                      "length_poly": {"type": "array", "items": {"type": "number"}}}}

SCHEMA = {
    "type": "object",
    "required": ["measure", "rho", "epsilons", "L", "test_functions", "replicas", "seed"],
    "additionalProperties": False,
    "properties": {
        "measure": {
            "type": "array", "minItems": 1,
            "items": {"type": "object", "required": ["velocity", "length"], "additionalProperties": False,
                      "properties": {"weight": {"type": "number", "minimum": 0},
                                     "velocity": _law, "length": _law}},
        },
        "rho": _pos,
        "epsilons": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                     "minItems": 1},
        "L": _pos,
        "euler_times": _times,
        "diffusive_times": _times,
        "test_functions": {"type": "array", "minItems": 1, "items": _tf},
        "replicas": _posint,
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "out": {"type": "string"},
        "center": {"enum": ["empirical", "asymptotic"]},
        "velocity_band": _pos,
        "tagged_separation": {"type": "number", "minimum": 1},
        "tag_velocities": {"type": "array", "items": {"type": "number"}},
        "lln": {"type": "object", "additionalProperties": False,
                "properties": {"b": _pos, "replicas": _posint}},
        "static_clt": {"type": "object", "additionalProperties": False,
                       "properties": {"epsilon": _pos, "replicas": _posint}},
        "euler": {"type": "object", "additionalProperties": False,
                  "properties": {"epsilon": _pos, "replicas": _posint, "drift_time": _pos,
                                 "transport_time": _pos, "transport_function": {"type": "integer", "minimum": 0},
                                 "transport_min_correlation": {"type": "number"},
                                 "fd_step": _pos, "fd_pair": {"type": "array", "items": {"type": "integer"},
                                                              "minItems": 2, "maxItems": 2}}},
        "diffusive": {"type": "object", "additionalProperties": False,
                      "properties": {"epsilon": _pos, "time": _pos, "replicas": _posint,
                                     "correlation_replicas": _posint, "correlation_time": _pos,
                                     "min_correlation": {"type": "number"},
                                     "field_replicas": _posint, "field_function": _tf}},
        "oracle": {"type": "object", "additionalProperties": False,
                   "properties": {"cases": _posint, "queries": _posint, "max_points": _posint,
                                  "measures": _posint}},
    },
}

DEFAULTS = {
    "euler_times": [0.25, 0.5, 1.0],
    "diffusive_times": [0.25, 0.5, 1.0],
    "out": "results",
    "center": "empirical",
    "velocity_band": 0.05,
    "tagged_separation": 2.0,
    "lln": {"b": 5.0, "replicas": 2000},
    "static_clt": {"epsilon": 0.01},
    "euler": {"epsilon": 0.01, "drift_time": 1.0, "transport_time": 0.5, "transport_function": 0,
              "transport_min_correlation": 0.95, "fd_step": 0.01, "fd_pair": [1, 1]},
    "diffusive": {"epsilon": 0.01, "time": 1.0, "correlation_replicas": 500, "correlation_time": 1.0,
                  "min_correlation": 0.9, "field_replicas": 2000,
                  "field_function": {"kind": "gaussian_bump", "center": 0.0, "width": 1.0,
                                     "velocity_poly": [0.5, 0.5], "name": "right_movers"}},
    "oracle": {"cases": 1000, "queries": 10, "max_points": 50, "measures": 100},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    data: dict
    measure: VelocityLengthMeasure = field(init=False)
    test_functions: list = field(init=False)
    diffusive_function: TestFunction = field(init=False)

    def __post_init__(self):
        try:
            jsonschema.validate(self.data, SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config error at {path}: {exc.message}") from None
        self.data = _merge(DEFAULTS, self.data)
        eps = self.data["epsilons"]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilons must be strictly decreasing")
        try:
            self.measure = VelocityLengthMeasure.from_dict(self.data["measure"])
            self.test_functions = [TestFunction.from_dict(d) for d in self.data["test_functions"]]
            self.diffusive_function = TestFunction.from_dict(self.data["diffusive"]["field_function"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        n = len(self.test_functions)
        if self.data["euler"]["transport_function"] >= n:
            raise ConfigError(f"euler.transport_function = {self.data['euler']['transport_function']} "
                              f"but only {n} test functions")
        if max(self.data["euler"]["fd_pair"]) >= n:
            raise ConfigError("euler.fd_pair refers to a missing test function")

    def __getitem__(self, key):
        return self.data[key]

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML in {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        return cls(data)

    def override(self, seed=None, epsilon=None, replicas=None, out=None, center=None) -> "ExperimentConfig":
        d = copy.deepcopy(self.data)
        if seed is not None:
            d["seed"] = int(seed)
        if epsilon is not None:
            d["epsilons"] = [float(epsilon)]
            for sec in ("static_clt", "euler", "diffusive"):
                d[sec]["epsilon"] = float(epsilon)
        if replicas is not None:
            d["replicas"] = int(replicas)
        if out is not None:
            d["out"] = str(out)
        if center is not None:
            d["center"] = center
        return ExperimentConfig(d)

    def resolved(self) -> dict:
        return copy.deepcopy(self.data)


def benchmark_path():
    return resources.files("hardrods") / "data" / "benchmark.yaml"


def load_benchmark() -> ExperimentConfig:
    return ExperimentConfig(yaml.safe_load(benchmark_path().read_text()))
