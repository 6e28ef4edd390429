"""Experiment configuration: YAML files, defaults and desk presets.

A config file is nested key-value YAML with three sections; every key is
optional and falls back to :data:`DEFAULTS`::

    system:          # network and geometry
      M: 6
      K: 3
      N: 16
      b: 3           # bits per element, null for continuous phases
      P_T_dbm: 20
      delta: 0.02    # CSI error radius relative to ||g_hat|| (robust scenarios)
    solver:
      eps_t: 1.0e-3
      o_init: 10
      o_max: 30
    experiment:
      scenario: maxmin_perfect
      trials: 20
      seed: 0
      sweep: {b: [1, 2, 3, null]}
      gammas_db: [-20, -17.5, -15, -12.5, -10]   # power_min only
"""
from __future__ import annotations

import copy
import itertools
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import yaml

from ..channel import SystemConfig, dbm_to_watt
from ..robust.solvers import RobustParams

SCENARIOS = ("maxmin_perfect", "ssr_perfect", "maxmin_robust", "ssr_robust", "power_min")
ROBUST = ("maxmin_robust", "ssr_robust", "power_min")


class ConfigError(ValueError):
    """Invalid configuration file or override."""


DEFAULTS: Dict[str, Dict[str, Any]] = {
    "system": {
        "M": 6, "K": 3, "N": 16, "b": 3,
        "P_T_dbm": 20.0,
        "noise_density": -174.0,
        "bandwidth": 1e6,
        "G_A": 5.0, "G_IRS": 5.0,
        "rician_K": 3.0,
        "alice": [15.0, 0.0, 15.0],
        "irs": [0.0, 25.0, 40.0],
        "user_area": [-60.0, 0.0, 0.0, 60.0],
        "eve_area": [0.0, 60.0, 0.0, 60.0],
        "delta": 0.02,
    },
    "solver": {
        "eps_t": 1e-3,
        "max_iter": 100,
        "o_init": 10.0,
        "o_max": 30.0,
        "nu": 2.0,
        "eps_t1": 1e-3,
        "eps_t2": 1e-4,
        "pccp_max_iter": 50,
        "pse_draws": 100,
        "formulation": "soc",
    },
    "experiment": {
        "scenario": "maxmin_perfect",
        "trials": 20,
        "seed": 0,
        "sweep": {},
        "gammas_db": [-20.0, -17.5, -15.0, -12.5, -10.0],
        "out": "results",
    },
}

# desk-scale presets; 20 trials each since the figure trial counts are not stated
PRESETS: Dict[str, Dict[str, Any]] = {
    "convergence": {"experiment": {"scenario": "maxmin_perfect", "trials": 20}},
    "fairness": {"system": {"K": 4},
                 "experiment": {"scenario": "maxmin_perfect", "trials": 20}},
    "fairness_ssr": {"system": {"K": 4},
                     "experiment": {"scenario": "ssr_perfect", "trials": 20}},
    "quantization": {"experiment": {"scenario": "maxmin_perfect", "trials": 20,
                                    "sweep": {"b": [1, 2, 3, None]}}},
    "antennas": {"experiment": {"scenario": "maxmin_perfect", "trials": 20,
                                "sweep": {"M": [4, 6, 8]}}},
    "robust": {"experiment": {"scenario": "maxmin_robust", "trials": 20,
                              "sweep": {"delta": [0.01, 0.02, 0.05]}}},
    "robust_ssr": {"experiment": {"scenario": "ssr_robust", "trials": 20}},
    "power": {"experiment": {"scenario": "power_min", "trials": 10}},
    "smoke": {"system": {"M": 4, "K": 2, "N": 8},
              "experiment": {"scenario": "maxmin_perfect", "trials": 2}},
}

SYSTEM_AXES = ("M", "K", "N", "b", "P_T_dbm", "delta", "rician_K")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in (over or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "sweep":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class ExperimentSpec:
    """One Monte-Carlo experiment: a scenario, sweep axes and trial count."""

    scenario: str
    system: Dict[str, Any]
    solver: Dict[str, Any]
    trials: int = 20
    seed: int = 0
    sweep: Dict[str, List[Any]] = field(default_factory=dict)
    gammas_db: List[float] = field(default_factory=list)
    out: str = "results"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if int(self.trials) < 1:
            raise ConfigError("trials must be >= 1")
        for axis, values in self.sweep.items():
            if axis not in SYSTEM_AXES:
                raise ConfigError(f"cannot sweep {axis!r}; sweepable: {SYSTEM_AXES}")
            if not isinstance(values, (list, tuple)) or len(values) == 0:
                raise ConfigError(f"sweep axis {axis!r} must be a nonempty list")
        if self.scenario == "power_min" and not self.gammas_db:
            raise ConfigError("power_min needs a nonempty gammas_db list")
        unknown = set(self.system) - set(DEFAULTS["system"])
        if unknown:
            raise ConfigError(f"unknown system keys: {sorted(unknown)}")
        unknown = set(self.solver) - set(DEFAULTS["solver"])
        if unknown:
            raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
        # fail early on values the system model rejects
        for point in self.points():
            try:
                self.system_config(point, 0)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid system parameters at {point}: {exc}") from exc

    def points(self) -> List[Dict[str, Any]]:
        """Cartesian product of the sweep axes, in file order."""
        axes = list(self.sweep)
        return [dict(zip(axes, combo)) for combo in itertools.product(*self.sweep.values())]

    def system_config(self, point: Dict[str, Any], seed: int) -> SystemConfig:
        s = dict(self.system, **point)
        delta = float(s["delta"]) if self.scenario in ROBUST else 0.0
        return SystemConfig(
            M=int(s["M"]), K=int(s["K"]), N=int(s["N"]), b=s["b"],
            P_T=dbm_to_watt(float(s["P_T_dbm"])),
            noise_density=float(s["noise_density"]), bandwidth=float(s["bandwidth"]),
            G_A=float(s["G_A"]), G_IRS=float(s["G_IRS"]), rician_K=float(s["rician_K"]),
            alice=tuple(s["alice"]), irs=tuple(s["irs"]),
            user_area=tuple(s["user_area"]), eve_area=tuple(s["eve_area"]),
            delta_k=delta, delta_e=delta, seed=int(seed),
        )

    def robust_params(self) -> RobustParams:
        s = self.solver
        return RobustParams(
            eps_t=float(s["eps_t"]), max_iter=int(s["max_iter"]),
            o_init=float(s["o_init"]), o_max=float(s["o_max"]), nu=float(s["nu"]),
            eps_t1=float(s["eps_t1"]), eps_t2=float(s["eps_t2"]),
            pccp_max_iter=int(s["pccp_max_iter"]), pse_draws=int(s["pse_draws"]),
            formulation=str(s["formulation"]),
        )


def build_spec(raw: Optional[dict] = None, preset: Optional[str] = None,
               **overrides) -> ExperimentSpec:
    """Merge defaults, an optional preset, a parsed file and CLI overrides.

    ``overrides`` may hold ``scenario``, ``trials``, ``seed``, ``out`` and
    ``sweep``; None values are ignored.
    """
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("config file must hold a mapping at the top level")
    unknown = set(raw or {}) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    merged = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        merged = _merge(merged, PRESETS[preset])
    merged = _merge(merged, raw or {})
    exp = merged["experiment"]
    for key, val in overrides.items():
        if val is not None:
            exp[key] = val
    try:
        return ExperimentSpec(
            scenario=exp["scenario"], system=merged["system"], solver=merged["solver"],
            trials=int(exp["trials"]), seed=int(exp["seed"]), sweep=dict(exp["sweep"] or {}),
            gammas_db=[float(g) for g in exp.get("gammas_db") or []], out=str(exp["out"]),
        )
    except (TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_spec(path: str, preset: Optional[str] = None, **overrides) -> ExperimentSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return build_spec(raw, preset, **overrides)


def parse_axis(text: str):
    """``"b=1,2,3,none"`` -> ``("b", [1, 2, 3, None])``."""
    if "=" not in text:
        raise ConfigError(f"sweep axis must look like name=v1,v2: {text!r}")
    name, vals = text.split("=", 1)
    out = []
    for tok in vals.split(","):
        tok = tok.strip()
        if tok.lower() in ("none", "null", "inf", "cps"):
            out.append(None)
            continue
        try:
            num = float(tok)
        except ValueError as exc:
            raise ConfigError(f"bad sweep value {tok!r}") from exc
        out.append(int(num) if num.is_integer() else num)
    return name.strip(), out
