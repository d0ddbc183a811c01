"""Experiment definitions and the stepsize-sweep driver.

A sweep is a grid of work units ``(method, stepsize index, run)``. Each unit
integrates ``replicas`` independent trajectories as one vectorised batch
with its own random stream, so results do not depend on how units are
scheduled. Set ``ADLANGEVIN_WORKERS`` to run units in several processes.
"""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy import stats

from ..core import ConfigurationError, PhaseState, RngStream, ThermostatParams
from ..integrators import initial_xi, make_stepper
from ..models import (
    Cosine,
    GaussianMeanModel,
    Harmonic,
    InjectedNoise,
    LogisticModel,
    PendulumSystem,
    generate_synthetic_data,
    load_dataset,
    save_dataset,
)
from ..observables import Histogram, mae, relative_error, rmse
from ..trajectory import HistogramSpec, TrajectoryResult, run_trajectory
from .config import ExperimentConfig
from .results import Cell, SweepResult

log = logging.getLogger(__name__)

WORKERS_ENV = "ADLANGEVIN_WORKERS"


def _pooled_mean(results: list[TrajectoryResult], key: str):
    vals = [r.means[key][r.alive] for r in results if r.alive.any()]
    if not vals:
        return None
    return np.concatenate(vals).mean(axis=0)


class Experiment:
    """Model, initial conditions, observers and metric reduction for one experiment."""

    histogram: HistogramSpec | None = None

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.params = config.thermostat
        self.references: dict = {}

    def initial_state(self, method: str, n_rep: int, rng: RngStream, h: float = 0.0) -> PhaseState:
        q = self.initial_positions(n_rep, rng)
        p = rng.normals(q.shape) * np.sqrt(np.asarray(self.params.mass) / self.params.beta)
        return PhaseState(q, p, np.full(n_rep, initial_xi(method, self.params, self.model, h)))

    def initial_positions(self, n_rep: int, rng: RngStream) -> np.ndarray:
        return rng.normals((n_rep, self.model.n_dof))

    def observers(self) -> dict:
        return {}

    def metric(self, name: str, results: list[TrajectoryResult]) -> float | None:
        raise NotImplementedError


class OscillatorExperiment(Experiment):
    def __init__(self, config):
        super().__init__(config)
        m = config.model
        if config.experiment == "harmonic":
            base = Harmonic(m["stiffness"], int(m["n_dof"]))
        else:
            base = Cosine(m["amplitude"], m["length"], int(m["n_dof"]))
        self.model = InjectedNoise(base, m["sigma"], config.mass) if m["sigma"] else base
        self.references["U"] = base.mean_potential(config.beta)

    def initial_positions(self, n_rep, rng):
        return np.zeros((n_rep, self.model.n_dof))

    def observe_u(self, state, model):
        return model.potential(state.q)

    def observe_xi(self, state, model):
        return state.xi

    def observers(self):
        return {"U": self.observe_u, "xi": self.observe_xi}

    def metric(self, name, results):
        if name == "rel_err_U":
            u = _pooled_mean(results, "U")
            return None if u is None else relative_error(u, self.references["U"])
        if name == "xi_mean":
            xi = _pooled_mean(results, "xi")
            return None if xi is None else float(xi)
        raise ConfigurationError(f"metrics: {name!r} not available")


class MolecularExperiment(Experiment):
    def __init__(self, config):
        super().__init__(config)
        m = config.model
        self.model = PendulumSystem(int(m["n_particles"]), m["density"], m["k_spring"], m["r_cut"])
        if m["reference_u"] is not None:
            self.references["U"] = float(m["reference_u"])
        elif "rel_err_U" in config.metrics:
            self.references["U"] = self.reference_potential()
        self.references["kT"] = 1.0 / config.beta

    def initial_positions(self, n_rep, rng):
        return np.tile(self.model.lattice_positions(), (n_rep, 1))

    def observe(self, state, model):
        f = state.force
        if f is not None and f.energy is not None and f.extras:
            e, g2, lap = f.energy, f.extras["grad_sq"], f.extras["laplacian"]
        else:
            _, e, g2, lap = model.evaluate_batch(state.q)
        return np.stack([e, g2, lap], axis=-1)

    def observers(self):
        return {"mol": self.observe}

    def reference_potential(self, h: float = 0.01, runs: int = 10) -> float:
        """Mean potential energy from BADODAB at a fine stepsize, averaged over ``runs`` seeds."""
        cfg = replace(self.config, methods=("BADODAB",), stepsizes=(h,), runs=runs, metrics=())
        log.info("computing molecular reference <U> with BADODAB at h=%g over %d runs", h, runs)
        results = [run_unit(self, cfg, "reference", 0, h, r) for r in range(runs)]
        mean = _pooled_mean(results, "mol")
        if mean is None:
            raise ConfigurationError("reference run diverged")
        return float(mean[0])

    def metric(self, name, results):
        mean = _pooled_mean(results, "mol")
        if mean is None:
            return None
        if name == "rel_err_U":
            return relative_error(mean[0], self.references["U"])
        if name == "rel_err_Tconf":
            if mean[2] == 0:
                return None
            return relative_error(mean[1] / mean[2], self.references["kT"])
        raise ConfigurationError(f"metrics: {name!r} not available")


def _dataset(spec: str, m: dict):
    path = m.get("data_file")
    n = int(m["n_data"])
    if path and Path(path).exists():
        ds = load_dataset(path)
        if ds.spec != spec:
            raise ConfigurationError(f"model.data_file: {path} holds a {ds.spec} dataset, expected {spec}")
        return ds, path
    ds = generate_synthetic_data(spec, int(m["data_seed"]), n)
    if path:
        save_dataset(ds, path)
    return ds, path


class GaussianMeanExperiment(Experiment):
    def __init__(self, config):
        super().__init__(config)
        m = config.model
        ds, _ = _dataset("gaussian-mean", m)
        self.model = GaussianMeanModel(ds.column("x"), m["sigma_hat"], int(m["minibatch"]), bool(m["replace"]))
        mean, var = self.model.exact_posterior()
        sd = math.sqrt(var)
        width = m["range_sds"] * sd
        self.histogram = HistogramSpec(self.hist_value, int(m["bin_count"]), (mean - width, mean + width))
        edges = np.linspace(mean - width, mean + width, int(m["bin_count"]) + 1)
        masses = np.diff(stats.norm.cdf(edges, loc=mean, scale=sd))
        self.references.update(mean=mean, variance=var, bin_masses=masses / masses.sum())

    def hist_value(self, state):
        return state.q[:, 0]

    def metric(self, name, results):
        if name != "mae":
            raise ConfigurationError(f"metrics: {name!r} not available")
        alive = [r for r in results if r.alive.any()]
        if not alive:
            return None
        counts = sum(r.hist_counts[r.alive].sum(axis=0) for r in alive)
        out = sum(int(r.hist_out_of_range[r.alive].sum()) for r in alive)
        hist = Histogram.from_counts(counts, self.histogram.range, out)
        return mae(hist, self.references["bin_masses"])


def logistic_reference_mean(
    model: LogisticModel, params: ThermostatParams, seed: int, h: float, n_steps: int, runs: int, burn_in: float = 0.2
) -> np.ndarray:
    """Posterior mean from BADODAB with the clean full-data gradient, ``runs`` seeds batched as replicas."""
    clean = LogisticModel(model.X, model.y, minibatch=model.n_data)
    rng = RngStream(seed, (0xC1EA, 0, 0))
    q = rng.normals((runs, clean.n_dof))
    p = rng.normals(q.shape) * np.sqrt(np.asarray(params.mass) / params.beta)
    state = PhaseState(q, p, np.full(runs, params.stationary_xi()))
    res = run_trajectory(
        state, h, n_steps, make_stepper("BADODAB"), clean, params, rng,
        observers={"q": lambda s, m: s.q}, burn_in_fraction=burn_in,
    )
    if not res.alive.all():
        raise ConfigurationError("logistic reference run diverged")
    return res.means["q"].mean(axis=0)


class LogisticExperiment(Experiment):
    def __init__(self, config):
        super().__init__(config)
        m = config.model
        ds, path = _dataset("logistic", m)
        self.model = LogisticModel(ds.X, ds.y, int(m["minibatch"]), bool(m["replace"]))
        self.references["truth"] = self.truth(path)

    def truth(self, data_path) -> np.ndarray:
        m = self.config.model
        if m.get("truth") is not None:
            t = np.asarray(m["truth"], dtype=float)
            if t.shape != (self.model.n_dof,):
                raise ConfigurationError(f"model.truth: need {self.model.n_dof} values")
            return t
        cache = Path(str(data_path) + ".truth") if data_path else None
        if cache is not None and cache.exists():
            return np.loadtxt(cache, ndmin=1)
        t = logistic_reference_mean(
            self.model, self.config.thermostat, int(m["data_seed"]),
            float(m["truth_h"]), int(m["truth_steps"]), int(m["truth_runs"]),
        )
        if cache is not None:
            np.savetxt(cache, t, fmt="%.17g", header=f"BADODAB clean-gradient posterior mean h={m['truth_h']} steps={m['truth_steps']} runs={m['truth_runs']}")
        return t

    def observe_q(self, state, model):
        return state.q

    def observers(self):
        return {"q": self.observe_q}

    def metric(self, name, results):
        if name != "rmse":
            raise ConfigurationError(f"metrics: {name!r} not available")
        est = [r.means["q"][r.alive] for r in results if r.alive.any()]
        if not est:
            return None
        return rmse(np.concatenate(est), self.references["truth"])


EXPERIMENT_CLASSES = {
    "harmonic": OscillatorExperiment,
    "cosine": OscillatorExperiment,
    "molecular": MolecularExperiment,
    "gaussian-mean": GaussianMeanExperiment,
    "logistic": LogisticExperiment,
}


def build_experiment(config: ExperimentConfig) -> Experiment:
    return EXPERIMENT_CLASSES[config.experiment](config)


def n_steps_for(sim_time: float, h: float) -> int:
    # Guard against ceil(500/0.05) = 10001 from floating-point round-off.
    return max(1, math.ceil(sim_time / h - 1e-9))


def run_unit(exp: Experiment, config: ExperimentConfig, method: str, step_index: int, h: float, run: int) -> TrajectoryResult:
    """Integrate one work unit; ``method="reference"`` means BADODAB under its own stream label."""
    rng = RngStream.for_work_unit(config.seed, method, step_index, run)
    scheme = "BADODAB" if method == "reference" else method
    state = exp.initial_state(scheme, config.replicas, rng, h)
    res = run_trajectory(
        state,
        h,
        n_steps_for(config.sim_time, h),
        make_stepper(scheme),
        exp.model,
        exp.params,
        rng,
        observers=exp.observers(),
        histogram=exp.histogram,
        burn_in_fraction=config.burn_in_fraction,
        sample_every=config.sample_every,
    )
    res.final_state = None
    return res


def _unit_task(args):
    exp, config, method, k, h, run = args
    t0 = time.perf_counter()
    res = run_unit(exp, config, method, k, h, run)
    return res, time.perf_counter() - t0


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{WORKERS_ENV}: not an integer: {raw!r}") from None
    return max(1, n)


def run_experiment(config: ExperimentConfig, experiment: Experiment | None = None, workers: int | None = None) -> SweepResult:
    """Run every (method, stepsize, run) unit and reduce to one cell per metric."""
    exp = experiment or build_experiment(config)
    grid = config.stepsize_grid()
    units, budget = [], set()
    for method in config.methods:
        for k, h in enumerate(grid):
            if n_steps_for(config.sim_time, h) > config.max_steps_per_cell:
                budget.add((method, k))
                continue
            units.extend((exp, config, method, k, float(h), r) for r in range(config.runs))

    workers = workers or worker_count()
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_unit_task, units))
    else:
        outputs = [_unit_task(u) for u in units]

    by_cell: dict = {}
    for (_, _, method, k, _, _), out in zip(units, outputs):
        by_cell.setdefault((method, k), []).append(out)

    total_runs = config.runs * config.replicas
    result = SweepResult(config.experiment, extras={"references": _jsonable(exp.references)})
    for method in config.methods:
        for k, h in enumerate(grid):
            if (method, k) in budget:
                for name in config.metrics:
                    result.cells.append(Cell(method, float(h), name, None, total_runs, 0, "budget"))
                continue
            outs = by_cell[(method, k)]
            results = [r for r, _ in outs]
            wall = sum(t for _, t in outs)
            diverged = sum(r.n_diverged for r in results)
            unstable = diverged == total_runs
            for name in config.metrics:
                value = None if unstable else exp.metric(name, results)
                result.cells.append(
                    Cell(method, float(h), name, value, total_runs, diverged, "true" if unstable else "false", wall)
                )
            log.info("%s h=%.4g diverged=%d/%d (%.1fs)", method, h, diverged, total_runs, wall)
    return result


def _jsonable(refs: dict) -> dict:
    out = {}
    for k, v in refs.items():
        out[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return out


__all__ = [
    "Experiment",
    "build_experiment",
    "logistic_reference_mean",
    "n_steps_for",
    "run_experiment",
    "run_unit",
]
