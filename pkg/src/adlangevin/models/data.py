"""Synthetic data sets for the Bayesian benchmarks and their text format."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from ..core import ConfigurationError, RngStream

LOGISTIC_TRUE_BETA = (1.0, -1.0, 0.5)
DATASET_SPECS = ("gaussian-mean", "logistic")


@dataclass
class Dataset:
    spec: str
    seed: int
    columns: tuple[str, ...]
    values: np.ndarray  # (N, len(columns))
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    @property
    def X(self) -> np.ndarray:
        return self.values[:, [i for i, c in enumerate(self.columns) if c.startswith("x")]]

    @property
    def y(self) -> np.ndarray:
        return self.column("y")


def generate_synthetic_data(spec: str, rng: RngStream | int, n: int | None = None, **params) -> Dataset:
    """Deterministic synthetic data.

    * ``gaussian-mean``: ``n`` (default 100) draws from ``N(mean, std^2)``, default ``N(0, 1)``.
    * ``logistic``: ``n`` (default 1000) rows ``(x1, x2, 1)`` with ``x1, x2 ~ N(0, 1)`` and
      labels ``y = +1`` with probability ``f(beta* . x)``; ``beta*`` defaults to
      ``LOGISTIC_TRUE_BETA``.
    """
    if spec not in DATASET_SPECS:
        raise ConfigurationError(f"unknown dataset spec {spec!r}; choose from {', '.join(DATASET_SPECS)}")
    if isinstance(rng, (int, np.integer)):
        rng = RngStream(int(rng), (zlib.crc32(spec.encode()),))
    g = rng.generator
    if spec == "gaussian-mean":
        n = 100 if n is None else int(n)
        mean = float(params.get("mean", 0.0))
        std = float(params.get("std", 1.0))
        x = mean + std * g.standard_normal(n)
        return Dataset(spec, rng.seed, ("x",), x[:, None], {"mean": mean, "std": std})
    n = 1000 if n is None else int(n)
    beta = np.asarray(params.get("true_beta", LOGISTIC_TRUE_BETA), dtype=float)
    X = np.column_stack([g.standard_normal((n, beta.size - 1)), np.ones(n)])
    y = np.where(g.random(n) < expit(X @ beta), 1.0, -1.0)
    cols = tuple(f"x{j + 1}" for j in range(beta.size)) + ("y",)
    return Dataset(spec, rng.seed, cols, np.column_stack([X, y]), {"true_beta": beta.tolist()})


def save_dataset(ds: Dataset, path) -> Path:
    path = Path(path)
    lines = [f"# spec={ds.spec} seed={ds.seed} n={ds.n}", " ".join(ds.columns)]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in ds.values]
    path.write_text("\n".join(lines) + "\n")
    return path


def load_dataset(path) -> Dataset:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ConfigurationError(f"{path}: missing '# spec=... seed=...' header")
        meta = dict(kv.split("=", 1) for kv in header[1:].split())
        columns = tuple(fh.readline().split())
        values = np.loadtxt(fh, ndmin=2)
    if values.shape[1] != len(columns):
        raise ConfigurationError(f"{path}: {values.shape[1]} values per row but {len(columns)} column names")
    return Dataset(meta["spec"], int(meta["seed"]), columns, values)
