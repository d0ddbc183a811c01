"""Experiment configuration: INI-style ``key = value`` files with four sections.

::

    [experiment]
    name = molecular
    methods = BADODAB, PAD
    seed = 1
    output = results.csv

    [thermostat]
    sigma_a = 3

    [sweep]
    h0 = 0.03
    growth = 1.1
    count = 8

    [model]
    n_particles = 125

Keys left out take the defaults of the chosen experiment, which follow the
published benchmark protocols where one exists.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..core import ConfigurationError, ThermostatParams
from ..integrators import FIRST_ORDER_METHODS, SCHEME_ALIASES, compile_scheme

EXPERIMENTS = ("molecular", "gaussian-mean", "logistic", "harmonic", "cosine")

# Model keys per experiment with defaults.
MODEL_DEFAULTS: dict[str, dict] = {
    "molecular": {"n_particles": 500, "density": 4.0, "k_spring": 25.0, "r_cut": 1.0, "reference_u": None},
    "gaussian-mean": {
        "n_data": 100,
        "sigma_hat": 1.0,
        "minibatch": 10,
        "replace": True,
        "data_file": None,
        "data_seed": 2016,
        "bin_count": 100,
        "range_sds": 5.0,
    },
    "logistic": {
        "n_data": 1000,
        "minibatch": 100,
        "replace": True,
        "data_file": None,
        "data_seed": 2016,
        "truth": None,
        "truth_h": 0.001,
        "truth_steps": 1_000_000,
        "truth_runs": 10,
    },
    "harmonic": {"stiffness": 1.0, "n_dof": 1, "sigma": 0.0},
    "cosine": {"amplitude": 1.0, "length": 0.1, "n_dof": 1, "sigma": 0.0},
}

METRICS = {
    "molecular": ("rel_err_U", "rel_err_Tconf"),
    "gaussian-mean": ("mae",),
    "logistic": ("rmse",),
    "harmonic": ("rel_err_U", "xi_mean"),
    "cosine": ("rel_err_U", "xi_mean"),
}
DEFAULT_METRICS = {
    "molecular": ("rel_err_U", "rel_err_Tconf"),
    "gaussian-mean": ("mae",),
    "logistic": ("rmse",),
    "harmonic": ("rel_err_U",),
    "cosine": ("rel_err_U",),
}

# Thermostat and sweep defaults per experiment (sigma_a, mu, h0, growth, count, sim_time, runs).
PROTOCOL_DEFAULTS = {
    "molecular": dict(sigma_a=3.0, mu=10.0, h0=0.03, growth=1.1, count=10, sim_time=5000.0, runs=10),
    "gaussian-mean": dict(sigma_a=1.0, mu=10.0, h0=0.001, growth=1.3, count=12, sim_time=1000.0, runs=10),
    "logistic": dict(sigma_a=6.0, mu=10.0, h0=0.001, growth=1.3, count=20, sim_time=1000.0, runs=100),
    "harmonic": dict(sigma_a=3.0, mu=10.0, h0=0.03, growth=1.1, count=10, sim_time=500.0, runs=10),
    "cosine": dict(sigma_a=3.0, mu=10.0, h0=0.03, growth=1.1, count=10, sim_time=500.0, runs=10),
}


def validate_method(name: str) -> str:
    if name in FIRST_ORDER_METHODS or name in SCHEME_ALIASES:
        return name
    compile_scheme(name)
    return name


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    methods: tuple[str, ...]
    beta: float = 1.0
    sigma_a: float = 1.0
    mu: float = 10.0
    mass: float = 1.0
    h0: float = 0.03
    growth: float = 1.1
    count: int = 10
    stepsizes: tuple[float, ...] | None = None
    sim_time: float = 500.0
    runs: int = 10
    replicas: int = 1
    burn_in_fraction: float = 0.2
    sample_every: int = 1
    seed: int = 0
    output: str | None = None
    max_steps_per_cell: int = 100_000_000
    metrics: tuple[str, ...] = ()
    model: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"experiment: unknown name {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if not self.methods:
            raise ConfigurationError("methods: at least one method is required")
        for m in self.methods:
            try:
                validate_method(m)
            except ConfigurationError as exc:
                raise ConfigurationError(f"methods: {exc}") from None
        try:
            ThermostatParams(self.beta, self.sigma_a, self.mu, self.mass)
        except ConfigurationError as exc:
            raise ConfigurationError(f"thermostat: {exc}") from None
        checks = [
            ("h0", self.h0 > 0),
            ("growth", self.growth > 1),
            ("count", self.count >= 1),
            ("sim_time", self.sim_time > 0),
            ("runs", self.runs >= 1),
            ("replicas", self.replicas >= 1),
            ("burn_in_fraction", 0 <= self.burn_in_fraction < 1),
            ("sample_every", self.sample_every >= 1),
            ("max_steps_per_cell", self.max_steps_per_cell >= 1),
        ]
        for key, ok in checks:
            if not ok:
                raise ConfigurationError(f"{key}: invalid value {getattr(self, key)!r}")
        if self.stepsizes is not None and (not self.stepsizes or min(self.stepsizes) <= 0):
            raise ConfigurationError("stepsizes: need a non-empty list of positive values")
        allowed = METRICS[self.experiment]
        for m in self.metrics:
            if m not in allowed:
                raise ConfigurationError(f"metrics: {m!r} not available for {self.experiment}; choose from {', '.join(allowed)}")
        unknown = set(self.model) - set(MODEL_DEFAULTS[self.experiment])
        if unknown:
            raise ConfigurationError(f"model: unknown key(s) {', '.join(sorted(unknown))} for {self.experiment}")

    @classmethod
    def create(cls, experiment: str, methods, **overrides) -> ExperimentConfig:
        """Build a config from the experiment's protocol defaults plus ``overrides``."""
        if experiment not in EXPERIMENTS:
            raise ConfigurationError(f"experiment: unknown name {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        values = dict(PROTOCOL_DEFAULTS[experiment])
        model = dict(MODEL_DEFAULTS[experiment])
        model.update(overrides.pop("model", {}) or {})
        values.update(overrides)
        if isinstance(methods, str):
            methods = [m.strip() for m in methods.split(",") if m.strip()]
        metrics = tuple(values.pop("metrics", None) or DEFAULT_METRICS[experiment])
        stepsizes = values.pop("stepsizes", None)
        return cls(
            experiment,
            tuple(methods),
            metrics=metrics,
            stepsizes=tuple(float(h) for h in stepsizes) if stepsizes is not None else None,
            model=model,
            **values,
        )

    @property
    def thermostat(self) -> ThermostatParams:
        return ThermostatParams(self.beta, self.sigma_a, self.mu, self.mass)

    def stepsize_grid(self) -> np.ndarray:
        if self.stepsizes is not None:
            return np.asarray(self.stepsizes, dtype=float)
        return self.h0 * self.growth ** np.arange(self.count)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["metrics"] = list(self.metrics)
        if self.stepsizes is not None:
            d["stepsizes"] = list(self.stepsizes)
        return d

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form (output path excluded)."""
        d = self.to_dict()
        d.pop("output", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()


_SECTION_KEYS = {
    "experiment": {"name", "methods", "seed", "output", "metrics"},
    "thermostat": {"beta", "sigma_a", "mu", "mass"},
    "sweep": {
        "h0",
        "growth",
        "count",
        "stepsizes",
        "sim_time",
        "runs",
        "replicas",
        "burn_in_fraction",
        "sample_every",
        "max_steps_per_cell",
    },
}
_INT_KEYS = {"seed", "count", "runs", "replicas", "sample_every", "max_steps_per_cell"}


def _list(text: str) -> list[str]:
    return [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]


def _parse_scalar(key: str, text: str, default=None):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if key in _INT_KEYS or isinstance(default, int):
            return int(float(text)) if float(text).is_integer() else int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {text!r}") from None
    if text.lower() in ("", "none"):
        return None
    try:
        return float(text)
    except ValueError:
        return text


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse config text; relative ``output``/``data_file`` paths resolve against ``base_dir``."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config syntax: {exc}") from None
    unknown_sections = set(cp.sections()) - set(_SECTION_KEYS) - {"model"}
    if unknown_sections:
        raise ConfigurationError(f"unknown section(s): {', '.join(sorted(unknown_sections))}")
    if not cp.has_option("experiment", "name"):
        raise ConfigurationError("experiment.name: required")
    if not cp.has_option("experiment", "methods"):
        raise ConfigurationError("experiment.methods: required")
    name = cp.get("experiment", "name").strip()
    if name not in EXPERIMENTS:
        raise ConfigurationError(f"experiment.name: unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")

    overrides: dict = {}
    for section, keys in _SECTION_KEYS.items():
        if not cp.has_section(section):
            continue
        for key, raw in cp.items(section):
            if key not in keys:
                raise ConfigurationError(f"{section}.{key}: unknown key")
            if key in ("name", "methods"):
                continue
            if key == "metrics":
                overrides["metrics"] = tuple(_list(raw))
            elif key == "stepsizes":
                try:
                    overrides["stepsizes"] = [float(v) for v in _list(raw)]
                except ValueError:
                    raise ConfigurationError(f"{section}.{key}: cannot parse {raw!r}") from None
            elif key == "output":
                out = Path(raw.strip())
                overrides["output"] = str(base_dir / out if base_dir and not out.is_absolute() else out)
            else:
                default = PROTOCOL_DEFAULTS[name].get(key, getattr(ExperimentConfig, key, None))
                overrides[key] = _parse_scalar(f"{section}.{key}", raw, default)

    model: dict = {}
    if cp.has_section("model"):
        defaults = MODEL_DEFAULTS[name]
        for key, raw in cp.items("model"):
            if key not in defaults:
                raise ConfigurationError(f"model.{key}: unknown key for {name}")
            if key == "truth":
                try:
                    model[key] = [float(v) for v in _list(raw)]
                except ValueError:
                    raise ConfigurationError(f"model.truth: cannot parse {raw!r}") from None
                continue
            value = _parse_scalar(f"model.{key}", raw, defaults[key])
            if key == "data_file" and value is not None:
                p = Path(str(raw).strip())
                value = str(base_dir / p if base_dir and not p.is_absolute() else p)
            model[key] = value
    overrides["model"] = model
    try:
        return ExperimentConfig.create(name, _list(cp.get("experiment", "methods")), **overrides)
    except TypeError as exc:
        raise ConfigurationError(f"config: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)
