"""Experiment configuration: JSON ingestion and validation.

Every problem found is collected before raising, so one run of
``decohere validate`` reports them all.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .bath import (DiscreteBath, OhmicSpectralDensity, ThermalParameters, UnitsContext,
                   discretize_spectral_density)

SCENARIOS = {
    "kernels": "closed-sum vs quadrature decoherence functions and short-time exponents",
    "single_bath_cat": "coherence of a two-point cat state under the single-bath map",
    "double_bath": "exact two-bath propagation vs the commuting short-time map; momentum-basis decay",
    "golden_rule_compare": "quadratic onset vs linear long-time growth and the golden-rule rate",
    "acceleration_sweep": "decoherence/dissipation time ratio versus state separation",
    "symmetry_protection": "protected coherence inside a degenerate coupling eigenspace",
    "oracle_validate": "truncated Fock propagation vs the analytic single-bath map",
    "mc_validate": "Monte-Carlo phase-space average vs the analytic single-bath map",
}


class ConfigError(Exception):
    """Invalid configuration; ``kind`` is ``parse``, ``schema`` or ``domain``."""

    def __init__(self, errors: list[str], kind: str = "schema"):
        self.errors = list(errors)
        self.kind = kind
        super().__init__("; ".join(self.errors))


# field kinds: (type-check name, default); REQUIRED marks a mandatory key
REQUIRED = object()

MODE_FIELDS = {"omega": ("positive", REQUIRED), "coupling": ("real", REQUIRED)}
OHMIC_FIELDS = {"eta": ("nonnegative", REQUIRED), "omega_c": ("positive", REQUIRED),
                "n_modes": ("count2", REQUIRED), "omega_max": ("positive", REQUIRED)}
BATH_FIELDS = {"mass": ("positive", 1.0), "modes": ("modes", None), "ohmic": ("ohmic", None)}
THERMAL_FIELDS = {"beta": ("beta", math.inf)}
GRID_FIELDS = {"s_min": ("real", REQUIRED), "ds": ("positive", REQUIRED), "n": ("count2", REQUIRED)}
TIME_FIELDS = {"t_max": ("positive", REQUIRED), "n": ("count3", REQUIRED)}

SCENARIO_PARAMS: dict[str, dict[str, tuple]] = {
    "kernels": {},
    "single_bath_cat": {"separation": ("positive", 2.0)},
    "double_bath": {"n": ("count2", 64), "ds": ("positive", 0.45), "width": ("positive", 1.0),
                    "shift": ("real", 3.0), "n_max_s": ("count1", 7), "n_max_r": ("count1", 7),
                    "step": ("positive", 1e-3), "n_steps": ("count3", 100), "thermal_cutoff": ("count0", 0),
                    "momentum_F": ("positive", 0.05)},
    "golden_rule_compare": {"Omega": ("positive", 1.0), "long_time_factor": ("positive", 20.0),
                            "long_time_max": ("positive", 16.0), "short_time_factor": ("positive", 0.01),
                            "rate_window": ("positive", 20.0), "rate_points": ("count3", 8001)},
    "acceleration_sweep": {"deltas": ("positive_list", [1.0, 2.0, 4.0, 8.0]),
                           "gamma_diss": ("positive", 1.0)},
    "symmetry_protection": {"sigma": ("positive", 1.0)},
    "oracle_validate": {"n_max": ("count1", 30), "thermal_cutoff": ("count0", 0),
                        "separation": ("positive", 2.0)},
    "mc_validate": {"n_samples": ("count1000", 100_000), "s": ("real", 1.0), "s_prime": ("real", 0.0)},
}

DEFAULT_TOLERANCES: dict[str, dict[str, float]] = {
    "kernels": {"integral_rel": 1e-7, "f_slope": 0.05, "phi_slope": 0.10, "coefficient_rel": 0.01},
    "single_bath_cat": {"visibility_abs": 1e-12},
    "double_bath": {"min_exponent": 2.5, "momentum_abs": 1e-6},
    "golden_rule_compare": {"rate_rel": 0.02, "linear_rel": 0.05, "short_ratio": 0.1},
    "acceleration_sweep": {"slope": 0.05},
    "symmetry_protection": {"protected_abs": 1e-14, "decay_abs": 1e-10},
    "oracle_validate": {"deviation": 1e-6, "convergence": 1e-8},
    "mc_validate": {"n_sigma": 3.0},
}

TOP_FIELDS = {"scenario": ("scenario", REQUIRED), "hbar": ("positive", 1.0), "seed": ("count0", 0),
              "output_dir": ("string", "out"), "bath": ("bath", None), "bath_r": ("bath", None),
              "thermal": ("thermal", None), "grid": ("grid", None), "times": ("times", None),
              "tolerances": ("tolerances", None), "params": ("params", None)}

# scenarios that read each optional section
NEEDS_BATH = {"kernels", "single_bath_cat", "double_bath", "golden_rule_compare", "acceleration_sweep",
              "symmetry_protection", "oracle_validate", "mc_validate"}
NEEDS_OHMIC = {"golden_rule_compare", "acceleration_sweep"}
NEEDS_TIMES = NEEDS_BATH


@dataclass
class BathSpec:
    mass: float = 1.0
    modes: Optional[list] = None
    ohmic: Optional[dict] = None

    def spectral_density(self) -> Optional[OhmicSpectralDensity]:
        if self.ohmic is None:
            return None
        return OhmicSpectralDensity(self.ohmic["eta"], self.ohmic["omega_c"])

    def build(self) -> DiscreteBath:
        if self.ohmic is not None:
            o = self.ohmic
            return discretize_spectral_density(self.spectral_density(), o["n_modes"], o["omega_max"], self.mass)
        return DiscreteBath.from_arrays([m["omega"] for m in self.modes],
                                        [m["coupling"] for m in self.modes], self.mass)


@dataclass
class ExperimentConfig:
    scenario: str
    hbar: float = 1.0
    seed: int = 0
    output_dir: str = "out"
    bath: Optional[BathSpec] = None
    bath_r: Optional[BathSpec] = None
    beta: float = math.inf
    grid: Optional[dict] = None
    times: Optional[dict] = None
    tolerances: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def units(self) -> UnitsContext:
        return UnitsContext(self.hbar)

    @property
    def thermal(self) -> ThermalParameters:
        return ThermalParameters(self.beta)

    def time_grid(self):
        import numpy as np
        return np.linspace(0.0, self.times["t_max"], self.times["n"])

    @property
    def config_hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# --- validation -------------------------------------------------------------

def _is_real(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


class _Validator:
    def __init__(self):
        self.schema_errors: list[str] = []
        self.domain_errors: list[str] = []

    def section(self, obj, fields: dict, path: str) -> dict:
        if not isinstance(obj, dict):
            self.schema_errors.append(f"{path}: expected an object")
            return {}
        out = {}
        for key in obj:
            if key not in fields:
                hint = difflib.get_close_matches(key, list(fields), n=1)
                msg = f"{path}.{key}: unknown key" if path else f"{key}: unknown key"
                if hint:
                    msg += f" (did you mean '{hint[0]}'?)"
                self.schema_errors.append(msg)
        for key, (kind, default) in fields.items():
            kp = f"{path}.{key}" if path else key
            if key not in obj:
                if default is REQUIRED:
                    self.schema_errors.append(f"{kp}: missing required key")
                else:
                    out[key] = default
                continue
            out[key] = self.value(obj[key], kind, kp)
        return out

    def value(self, v, kind: str, kp: str):
        if kind == "string":
            if not isinstance(v, str):
                self.schema_errors.append(f"{kp}: expected a string")
            return v
        if kind == "scenario":
            if v not in SCENARIOS:
                hint = difflib.get_close_matches(str(v), list(SCENARIOS), n=1)
                self.schema_errors.append(f"{kp}: unknown scenario {v!r}"
                                          + (f" (did you mean '{hint[0]}'?)" if hint else ""))
            return v
        if kind in ("real", "positive", "nonnegative"):
            if not _is_real(v):
                self.schema_errors.append(f"{kp}: expected a finite number")
                return v
            if kind == "positive" and not v > 0:
                self.domain_errors.append(f"{kp}: must be positive, got {v}")
            if kind == "nonnegative" and v < 0:
                self.domain_errors.append(f"{kp}: must be non-negative, got {v}")
            return float(v)
        if kind.startswith("count"):
            lo = int(kind[5:])
            if not _is_int(v):
                self.schema_errors.append(f"{kp}: expected an integer")
                return v
            if v < lo:
                self.domain_errors.append(f"{kp}: must be at least {lo}, got {v}")
            return v
        if kind == "beta":
            if v == "inf" or v is None or (isinstance(v, float) and v == math.inf):
                return math.inf
            if not _is_real(v):
                self.schema_errors.append(f"{kp}: expected a positive number or \"inf\"")
                return v
            if not v > 0:
                self.domain_errors.append(f"{kp}: must be positive, got {v}")
            return float(v)
        if kind == "positive_list":
            if not isinstance(v, list) or not v:
                self.schema_errors.append(f"{kp}: expected a nonempty list")
                return v
            return [self.value(x, "positive", f"{kp}[{i}]") for i, x in enumerate(v)]
        if kind == "modes":
            if not isinstance(v, list) or not v:
                self.schema_errors.append(f"{kp}: expected a nonempty list of modes")
                return v
            return [self.section(m, MODE_FIELDS, f"{kp}[{i}]") for i, m in enumerate(v)]
        if kind == "ohmic":
            return self.section(v, OHMIC_FIELDS, kp)
        if kind == "bath":
            b = self.section(v, BATH_FIELDS, kp)
            if b and (b.get("modes") is None) == (b.get("ohmic") is None):
                self.schema_errors.append(f"{kp}: give exactly one of 'modes' or 'ohmic'")
            return BathSpec(**b) if b else None
        if kind == "thermal":
            return self.section(v, THERMAL_FIELDS, kp)
        if kind == "grid":
            return self.section(v, GRID_FIELDS, kp)
        if kind == "times":
            return self.section(v, TIME_FIELDS, kp)
        if kind in ("tolerances", "params"):
            if not isinstance(v, dict):
                self.schema_errors.append(f"{kp}: expected an object")
                return {}
            return v
        raise AssertionError(kind)


def validate_config(raw: Any) -> ExperimentConfig:
    """Validate a parsed JSON document; raises :class:`ConfigError` listing every problem."""
    val = _Validator()
    top = val.section(raw, TOP_FIELDS, "")
    scenario = top.get("scenario")
    if scenario in SCENARIOS and not val.schema_errors:
        p_fields = SCENARIO_PARAMS[scenario]
        top["params"] = val.section(top.get("params") or {}, p_fields, "params")
        tol_fields = {k: ("positive", d) for k, d in DEFAULT_TOLERANCES[scenario].items()}
        top["tolerances"] = val.section(top.get("tolerances") or {}, tol_fields, "tolerances")
        if scenario in NEEDS_BATH and top.get("bath") is None:
            val.schema_errors.append("bath: missing required key for scenario " + scenario)
        if scenario in NEEDS_OHMIC and top.get("bath") is not None and top["bath"].ohmic is None:
            val.schema_errors.append(f"bath.ohmic: scenario {scenario} needs an Ohmic spectral density")
        if scenario == "double_bath" and top.get("bath_r") is None:
            val.schema_errors.append("bath_r: missing required key for scenario double_bath")
        if scenario in NEEDS_TIMES and scenario != "double_bath" and top.get("times") is None:
            val.schema_errors.append("times: missing required key for scenario " + scenario)
        if scenario == "double_bath":
            n = top["params"].get("n")
            if _is_int(n) and n & (n - 1):
                val.domain_errors.append(f"params.n: must be a power of two, got {n}")
    if val.schema_errors:
        raise ConfigError(val.schema_errors + val.domain_errors, "schema")
    if val.domain_errors:
        raise ConfigError(val.domain_errors, "domain")
    thermal = top.get("thermal") or {}
    return ExperimentConfig(scenario=scenario, hbar=top["hbar"], seed=top["seed"],
                            output_dir=top["output_dir"], bath=top.get("bath"), bath_r=top.get("bath_r"),
                            beta=thermal.get("beta", math.inf), grid=top.get("grid"), times=top.get("times"),
                            tolerances=top["tolerances"], params=top["params"], raw=raw)


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"], "parse") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}"], "parse") from exc
    return validate_config(raw)
