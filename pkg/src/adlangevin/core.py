"""Extended phase-space state, force models and the random-number contract.

Every array in a :class:`PhaseState` may carry leading *replica* axes: ``q`` and
``p`` have shape ``(*batch, n_dof)`` and ``xi`` has shape ``batch``. A single
trajectory is the case ``batch == ()``. All integrators broadcast over the
replica axes, which is how many independent trajectories are advanced at
once on a single core.
"""

from __future__ import annotations

import dataclasses
import zlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Invalid parameters, dimensions or method names."""


class SingularityError(ArithmeticError):
    """A force law hit a singular configuration (e.g. coincident particles)."""


@dataclass(frozen=True)
class PhaseState:
    """Positions ``q``, momenta ``p`` and the auxiliary friction ``xi``.

    ``force`` optionally caches the force sample evaluated at the current
    ``q``; any sub-flow that moves ``q`` drops it.
    """

    q: np.ndarray
    p: np.ndarray
    xi: np.ndarray
    force: ForceSample | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        q = self.q if type(self.q) is np.ndarray and self.q.dtype == float else np.asarray(self.q, dtype=float)
        p = self.p if type(self.p) is np.ndarray and self.p.dtype == float else np.asarray(self.p, dtype=float)
        if q.ndim == 0:
            q = q.reshape(1)
        if p.ndim == 0:
            p = p.reshape(1)
        if q.shape != p.shape:
            raise ConfigurationError(f"q shape {q.shape} != p shape {p.shape}")
        xi = self.xi
        if not (isinstance(xi, np.ndarray) and xi.dtype == float and xi.shape == q.shape[:-1]):
            xi = np.broadcast_to(np.asarray(xi, dtype=float), q.shape[:-1])
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "xi", xi)

    @property
    def n_dof(self) -> int:
        return self.q.shape[-1]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.q.shape[:-1]

    def finite(self) -> np.ndarray:
        """Per-replica mask, False where any entry is non-finite."""
        return np.isfinite(self.q).all(axis=-1) & np.isfinite(self.p).all(axis=-1) & np.isfinite(self.xi)

    def replace(self, **changes) -> PhaseState:
        if "q" in changes and "force" not in changes:
            changes["force"] = None
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ThermostatParams:
    """Inverse temperature, injected-noise amplitude, thermal mass and masses.

    ``mass`` is the diagonal of the mass matrix (scalar or length ``n_dof``).
    ``n_dof`` is the degrees-of-freedom count used by the friction control law;
    it defaults to the length of the state it acts on.
    """

    beta: float = 1.0
    sigma_a: float = 1.0
    mu: float = 10.0
    mass: float | np.ndarray = 1.0
    n_dof: int | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigurationError(f"beta must be > 0, got {self.beta}")
        if not self.mu > 0:
            raise ConfigurationError(f"mu must be > 0, got {self.mu}")
        if not self.sigma_a >= 0:
            raise ConfigurationError(f"sigma_a must be >= 0, got {self.sigma_a}")
        if not np.all(np.asarray(self.mass) > 0):
            raise ConfigurationError("all masses must be > 0")
        if self.n_dof is not None and self.n_dof < 1:
            raise ConfigurationError(f"n_dof must be >= 1, got {self.n_dof}")

    @property
    def kT(self) -> float:
        return 1.0 / self.beta

    @cached_property
    def inv_mass(self) -> np.ndarray:
        return 1.0 / np.asarray(self.mass, dtype=float)

    @cached_property
    def sqrt_mass(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.mass, dtype=float))

    def dof(self, state: PhaseState) -> int:
        return self.n_dof if self.n_dof is not None else state.n_dof

    def stationary_xi(self, sigma: float = 0.0, h: float = 0.0) -> float:
        """Mean friction of the extended Gibbs density, ``beta*(sigma^2 h + sigma_a^2)/2``."""
        return self.beta * (sigma**2 * h + self.sigma_a**2) / 2


@dataclass
class ForceSample:
    """One (possibly noisy) force evaluation.

    ``cov_estimate`` is only filled when a method asks for it (mSGLD); it is
    either the diagonal of the force covariance (same shape as ``force``) or a
    full matrix with an extra trailing axis. ``energy`` carries the potential
    energy at ``q`` when the model obtains it as a by-product; ``extras`` holds
    any other such by-products keyed by name.
    """

    force: np.ndarray
    is_stochastic: bool = False
    cov_estimate: np.ndarray | None = None
    energy: np.ndarray | None = None
    extras: dict | None = None


class RngStream:
    """Seeded normal/uniform stream identified by ``(seed, stream_id)``.

    Backed by the counter-based Philox generator; streams with different ids
    are derived through :class:`numpy.random.SeedSequence` spawn keys and are
    statistically independent.
    """

    def __init__(self, seed: int, stream_id: Sequence[int] = (0, 0)):
        self.seed = int(seed)
        self.stream_id = tuple(int(s) for s in stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        self.generator = np.random.Generator(np.random.Philox(ss))

    @classmethod
    def for_work_unit(cls, seed: int, method: str, step_index: int, run: int) -> RngStream:
        # crc32 keeps the id stable across processes (unlike hash()).
        return cls(seed, (zlib.crc32(method.encode()), step_index, run))

    def normals(self, shape) -> np.ndarray:
        return self.generator.standard_normal(shape)

    def indices(self, n_total: int, n_pick: int, batch_shape=(), replace: bool = True) -> np.ndarray:
        """Uniform index subsets of size ``n_pick`` from ``range(n_total)``, one per replica."""
        shape = (*batch_shape, n_pick)
        if replace:
            return self.generator.integers(0, n_total, size=shape)
        keys = self.generator.random((*batch_shape, n_total))
        return np.argpartition(keys, n_pick - 1, axis=-1)[..., :n_pick]

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def draw_standard_normals(rng: RngStream, n) -> np.ndarray:
    """Draw ``n`` i.i.d. standard normals (``n`` may be a shape tuple)."""
    if isinstance(n, (int, np.integer)) and n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    return rng.normals(n)


class ForceModel:
    """Base class for anything that produces forces on positions.

    Subclasses implement :meth:`force`. Clean (deterministic) models should
    also implement :meth:`gradient` and :meth:`potential`; models with a
    closed-form Laplacian implement :meth:`laplacian` as well. ``sigma`` is the
    amplitude of any injected Gaussian force noise, zero for clean models.
    """

    n_dof: int
    sigma: float = 0.0
    is_stochastic: bool = False

    def force(self, q: np.ndarray, rng: RngStream | None = None, *, want_cov: bool = False) -> ForceSample:
        raise NotImplementedError

    def gradient(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no clean gradient")

    def laplacian(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no Laplacian")

    def potential(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no potential")

    def force_noise_sigma(self) -> float:
        """Per-coordinate standard deviation of the force noise, when known (else 0)."""
        return float(self.sigma)

    def check_dimension(self, q: np.ndarray) -> None:
        if q.shape[-1] != self.n_dof:
            raise ConfigurationError(
                f"{type(self).__name__} expects {self.n_dof} degrees of freedom, got {q.shape[-1]}"
            )


def force(model: ForceModel, q, rng: RngStream | None = None, *, want_cov: bool = False) -> ForceSample:
    """Evaluate ``model`` at ``q`` after checking the dimension."""
    q = np.asarray(q, dtype=float)
    model.check_dimension(q)
    return model.force(q, rng, want_cov=want_cov)
