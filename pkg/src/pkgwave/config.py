"""Scenario configuration files (YAML) with strict validation.

An empty file reproduces the baseline package with a 1 x 4 monopole row in
the 2-D cross-section. Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .fdtd import PMLSpec, RunSettings
from .geometry import (ANTENNA_KINDS, GeometryError, PackageModel, ResolutionPolicy,
                       default_flip_chip_package, place_port_grid)
from .materials import builtin_library
from .scenario import config_hash


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent literals such as ``55e9`` as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:\d[\d_]*(?:\.\d*)?|\.\d+)[eE][-+]?\d+$"),
    list("-+0123456789."))


class ConfigError(ValueError):
    pass


_SOLVER_DEFAULTS = {
    "dim": 2, "max_steps": 1_200_000, "energy_decay": 1e-9, "check_interval": 200,
    "cfl_safety": 0.99, "pml_cells": 10, "pml_order": 3.0, "pml_reflection": 1e-6,
    "cells_per_wavelength": 15.0, "min_cells_per_layer": 2, "grading_ratio": 1.3,
    "f_max": 73e9, "max_cells": 4_000_000, "depth_2d": 1e-3, "air_margin": None,
    "threads": 1, "snapshot_steps": [],
}
_PORT_DEFAULTS = {"rows": 1, "cols": 4, "antenna": "monopole", "monopole_length": None,
                  "patch_length": None, "patch_width": None, "tune": False}
_SWEEP_DEFAULTS = {"axes": {}, "retune": False, "variance_penalty": 0.5}
_TOP_DEFAULTS = {"package": {}, "materials": {}, "ports": _PORT_DEFAULTS, "band": [55e9, 65e9],
                 "frequency_step": 0.25e9, "solver": _SOLVER_DEFAULTS, "output": "run",
                 "seed": 0, "sweep": _SWEEP_DEFAULTS}

_INT_KEYS = {"dim", "max_steps", "check_interval", "pml_cells", "min_cells_per_layer",
             "max_cells", "threads", "rows", "cols", "seed"}


def _merge(defaults: Mapping, given: Mapping, where: str) -> dict:
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'top level'}: {sorted(unknown)}")
    out = copy.deepcopy(dict(defaults))
    for key, value in given.items():
        if isinstance(defaults[key], dict) and defaults[key] and key not in ("axes",):
            if not isinstance(value, Mapping):
                raise ConfigError(f"{where}{key} must be a mapping")
            out[key] = _merge(defaults[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


def _number(value, path: str, *, positive: bool = False, allow_none: bool = False,
            integer: bool = False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{path} must be finite")
    if integer:
        if float(value) != int(value):
            raise ConfigError(f"{path} must be an integer")
        value = int(value)
    if positive and value <= 0:
        raise ConfigError(f"{path} must be positive, got {value}")
    return value


@dataclass
class ScenarioConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(_TOP_DEFAULTS))

    # -- construction -------------------------------------------------
    @classmethod
    def from_dict(cls, given: Mapping | None) -> "ScenarioConfig":
        given = dict(given or {})
        data = _merge(_TOP_DEFAULTS, given, "")
        cfg = cls(data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        text = Path(path).read_text()
        try:
            given = yaml.load(text, Loader=_Loader)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
        if given is not None and not isinstance(given, Mapping):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(given)

    def with_updates(self, **changes) -> "ScenarioConfig":
        """Copy with dotted-path updates, e.g. ``{"solver.dim": 3}``."""
        data = copy.deepcopy(self.data)
        for dotted, value in changes.items():
            node = data
            *parents, leaf = dotted.split(".")
            for p in parents:
                node = node[p]
            node[leaf] = value
        return ScenarioConfig.from_dict(data)

    # -- validation ---------------------------------------------------
    def validate(self) -> None:
        d = self.data
        s = d["solver"]
        for key in s:
            if key in ("air_margin",):
                s[key] = _number(s[key], f"solver.{key}", positive=True, allow_none=True)
            elif key == "snapshot_steps":
                if not isinstance(s[key], list):
                    raise ConfigError("solver.snapshot_steps must be a list")
                s[key] = [_number(v, "solver.snapshot_steps[]", positive=True, integer=True)
                          for v in s[key]]
            else:
                s[key] = _number(s[key], f"solver.{key}", positive=True, integer=key in _INT_KEYS)
        if s["dim"] not in (2, 3):
            raise ConfigError("solver.dim must be 2 or 3")
        if not 0 < s["energy_decay"] < 1:
            raise ConfigError("solver.energy_decay must be in (0, 1)")
        if not 0 < s["pml_reflection"] < 1:
            raise ConfigError("solver.pml_reflection must be in (0, 1)")
        if s["pml_cells"] < 8:
            raise ConfigError("solver.pml_cells must be at least 8")
        p = d["ports"]
        for key in ("rows", "cols"):
            p[key] = _number(p[key], f"ports.{key}", positive=True, integer=True)
        if p["antenna"] not in ANTENNA_KINDS:
            raise ConfigError(f"ports.antenna must be one of {ANTENNA_KINDS}")
        for key in ("monopole_length", "patch_length", "patch_width"):
            p[key] = _number(p[key], f"ports.{key}", positive=True, allow_none=True)
        if not isinstance(p["tune"], bool):
            raise ConfigError("ports.tune must be true or false")
        band = d["band"]
        if not (isinstance(band, (list, tuple)) and len(band) == 2):
            raise ConfigError("band must be [f_lo, f_hi]")
        lo, hi = (_number(v, "band[]", positive=True) for v in band)
        if lo >= hi:
            raise ConfigError("band must have f_lo < f_hi")
        d["band"] = [lo, hi]
        d["frequency_step"] = _number(d["frequency_step"], "frequency_step", positive=True)
        d["seed"] = _number(d["seed"], "seed", integer=True)
        if not isinstance(d["output"], str) or not d["output"]:
            raise ConfigError("output must be a non-empty path string")
        sw = d["sweep"]
        if not isinstance(sw["axes"], Mapping):
            raise ConfigError("sweep.axes must map parameter names to value lists")
        for name, values in sw["axes"].items():
            if not isinstance(values, list) or not values:
                raise ConfigError(f"sweep.axes.{name} must be a non-empty list")
        sw["variance_penalty"] = _number(sw["variance_penalty"], "sweep.variance_penalty")
        if not isinstance(sw["retune"], bool):
            raise ConfigError("sweep.retune must be true or false")
        if not isinstance(d["package"], Mapping) or not isinstance(d["materials"], Mapping):
            raise ConfigError("package and materials must be mappings")
        # resolve the model now so geometry errors surface before any solve
        try:
            self.build_model()
        except (GeometryError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid package: {exc}") from None

    # -- derived objects ----------------------------------------------
    def library(self):
        lib = builtin_library()
        if self.data["materials"]:
            lib = lib.with_overrides(self.data["materials"])
        return lib

    def build_model(self, package_overrides: Mapping | None = None) -> PackageModel:
        overrides = dict(self.data["package"])
        overrides.update(package_overrides or {})
        model = default_flip_chip_package(overrides, self.library())
        p = self.data["ports"]
        return place_port_grid(model, p["rows"], p["cols"], p["antenna"],
                               monopole_length=p["monopole_length"],
                               patch_length=p["patch_length"], patch_width=p["patch_width"])

    def policy(self) -> ResolutionPolicy:
        s = self.data["solver"]
        return ResolutionPolicy(
            f_max=s["f_max"], cells_per_wavelength=s["cells_per_wavelength"],
            min_cells_per_layer=s["min_cells_per_layer"], grading_ratio=s["grading_ratio"],
            air_margin=s["air_margin"], pml_cells=s["pml_cells"], max_cells=s["max_cells"],
            depth_2d=s["depth_2d"])

    def run_settings(self) -> RunSettings:
        s = self.data["solver"]
        return RunSettings(
            max_steps=s["max_steps"], energy_decay=s["energy_decay"],
            check_interval=s["check_interval"], cfl_safety=s["cfl_safety"],
            pml=PMLSpec(order=s["pml_order"], reflection=s["pml_reflection"]),
            snapshot_steps=tuple(s["snapshot_steps"]))

    @property
    def dim(self) -> int:
        return self.data["solver"]["dim"]

    @property
    def band(self) -> tuple[float, float]:
        return tuple(self.data["band"])

    def frequencies(self):
        from .sparams import default_frequencies
        lo, hi = self.band
        return default_frequencies(lo, hi, self.data["frequency_step"])

    def hash(self) -> str:
        """Hash of everything that affects the computed S-parameters."""
        physics = {k: v for k, v in self.data.items() if k not in ("output", "sweep")}
        physics["solver"] = {k: v for k, v in self.data["solver"].items()
                             if k not in ("threads", "snapshot_steps")}
        return config_hash(physics)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True)


def as_plain(value: Any):
    """Convert tuples to lists so configs serialise cleanly."""
    if isinstance(value, Mapping):
        return {k: as_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [as_plain(v) for v in value]
    return value
