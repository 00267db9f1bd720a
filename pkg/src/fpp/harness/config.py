"""Experiment configuration: one TOML file, optionally overridden by flags."""

from __future__ import annotations

import copy
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ..errors import ConfigError
from ..weights import WeightDistribution

EXPERIMENTS = ("holes", "scaling", "shape", "barrel", "plant", "sector",
               "straightness", "kesten", "concentration")
OUT_ENV = "FPP_OUT_DIR"

_DEFAULTS: dict[str, Any] = {
    "dimension": 2,
    "distribution": {"kind": "exponential", "rate": 1.0},
    "seeds": {"base": 0, "count": 1, "list": None},
    "times": {"grid": [100.0]},
    "gadget": {
        "a": 1.0, "b": 2.0, "eps": 0.1, "delta": None,
        "n_mode": "constant", "n": 1000, "c12": 1.0,
        "b_prime": None, "max_path_edges": None,
        "modes": ["max-extremal", "min-extremal"], "method": "cropped",
        "barrel_n": [], "samples": 0,
        "C18": 6.0, "p": 0.25,
    },
    "probe": {
        "directions": [[1, 0], [0, 1], [1, 1]],
        "direction": [1, 0],
        "g_hat": None,
        "radii": [50.0, 100.0, 200.0, 400.0],
        "r_max": 400.0,
        "samples": 8,
        "n": 10,
        "mode": "exact",
        "C_grid": [1.0, 2.0, 3.0, 4.0],
    },
    "caps": {"max_vertices": 50_000_000, "max_wall_seconds": None},
    "output": {"dir": None, "workers": 1},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if k == "distribution":
            # a distribution table replaces the default wholesale
            if not isinstance(v, dict):
                raise ConfigError("'distribution' must be a table")
            out[k] = dict(v)
        elif isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"{where!r} must be a table")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


@dataclass
class ExperimentConfig:
    experiment: str
    raw: dict = field(default_factory=dict)
    source: str | None = None

    # convenience views -------------------------------------------------
    @property
    def d(self) -> int:
        return int(self.raw["dimension"])

    @property
    def distribution(self) -> WeightDistribution:
        return WeightDistribution.from_dict(self.raw["distribution"])

    @property
    def seeds(self) -> list[int]:
        s = self.raw["seeds"]
        if "list" in s and s["list"] is not None:
            return [int(x) for x in s["list"]]
        return [int(s["base"]) + i for i in range(int(s["count"]))]

    @property
    def times(self) -> list[float]:
        return [float(t) for t in self.raw["times"]["grid"]]

    @property
    def gadget(self) -> dict:
        return self.raw["gadget"]

    @property
    def probe(self) -> dict:
        return self.raw["probe"]

    @property
    def caps(self) -> dict:
        return self.raw["caps"]

    @property
    def out_dir(self) -> Path:
        d = self.raw["output"]["dir"] or os.environ.get(OUT_ENV) or "fpp-out"
        return Path(d)

    @property
    def workers(self) -> int:
        return int(self.raw["output"]["workers"])

    def gadget_n(self, t: float) -> int:
        g = self.gadget
        if g["n_mode"] == "constant":
            return int(g["n"])
        return int(math.floor(float(g["c12"]) * math.log(t) ** (1.0 / self.d)))

    def echo(self) -> dict:
        return {"experiment": self.experiment, **copy.deepcopy(self.raw)}

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.d < 2:
            raise ConfigError("dimension must be >= 2")
        try:
            self.distribution
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"distribution: {exc}") from None
        # the weight field itself applies the zero-atom gate
        from ..weights import bond_pc
        if self.distribution.zero_mass >= bond_pc(self.d):
            raise ConfigError("P(weight = 0) must be below p_c(d)")
        seeds = self.raw["seeds"]
        if set(seeds) - {"base", "count", "list"}:
            raise ConfigError(f"unknown seeds keys {sorted(set(seeds) - {'base', 'count', 'list'})}")
        if not self.seeds:
            raise ConfigError("no seeds")
        if any(not math.isfinite(t) or t < 0 for t in self.times):
            raise ConfigError("times must be finite and nonnegative")
        if self.gadget["n_mode"] not in ("constant", "log"):
            raise ConfigError("gadget.n_mode must be 'constant' or 'log'")
        if self.workers < 1:
            raise ConfigError("output.workers must be >= 1")
        if not 0 < float(self.gadget["p"]) < 0.5:
            raise ConfigError("gadget.p must lie in (0, 1/2)")
        return self


def load_config(path=None, experiment: str | None = None, *, overrides: dict | None = None,
                text: str | None = None) -> ExperimentConfig:
    """Read TOML (file or string), apply flag overrides, validate."""
    if text is None and path is None:
        data = {}
    else:
        try:
            data = tomllib.loads(text) if text is not None else tomllib.loads(
                Path(path).read_text())
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    exp = data.pop("experiment", None)
    if experiment is not None:
        if exp is not None and exp != experiment:
            raise ConfigError(f"config is for {exp!r} but {experiment!r} was requested")
        exp = experiment
    if exp is None:
        raise ConfigError("no experiment named")
    raw = _merge(_DEFAULTS, data)
    # a seed list and (base, count) are alternatives; echo only the one in use
    if raw["seeds"]["list"] is not None:
        raw["seeds"] = {"list": raw["seeds"]["list"]}
    else:
        del raw["seeds"]["list"]
    ov = overrides or {}
    if ov.get("seed") is not None:
        raw["seeds"] = {"list": [int(ov["seed"])]}
    if ov.get("t") is not None:
        raw["times"]["grid"] = [float(t) for t in ov["t"]]
    if ov.get("out") is not None:
        raw["output"]["dir"] = str(ov["out"])
    if ov.get("workers") is not None:
        raw["output"]["workers"] = int(ov["workers"])
    return ExperimentConfig(exp, raw, str(path) if path else None).validate()
