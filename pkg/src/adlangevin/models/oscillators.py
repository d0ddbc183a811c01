"""Separable test potentials and the injected-noise force wrapper."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from ..core import ForceModel, ForceSample, RngStream


class Harmonic(ForceModel):
    """``U(q) = stiffness/2 |q|^2`` on ``n_dof`` independent coordinates."""

    def __init__(self, stiffness: float = 1.0, n_dof: int = 1):
        self.stiffness = float(stiffness)
        self.n_dof = int(n_dof)

    def gradient(self, q):
        return self.stiffness * q

    def laplacian(self, q):
        return np.full(q.shape[:-1], self.stiffness * self.n_dof)

    def potential(self, q):
        return 0.5 * self.stiffness * np.sum(q * q, axis=-1)

    def force(self, q, rng=None, *, want_cov=False):
        cov = np.zeros_like(q) if want_cov else None
        return ForceSample(-self.gradient(q), False, cov)

    def mean_potential(self, beta: float) -> float:
        return self.n_dof / (2.0 * beta)


class Cosine(ForceModel):
    """Rigid-pendulum potential ``U(q) = A (1 - cos(q / L))`` per coordinate.

    The curvature is bounded by ``A / L^2``, so the stiff limit ``omega^2 =
    A/L^2`` is set independently of the anharmonicity ``A / kT``.
    """

    def __init__(self, amplitude: float = 1.0, length: float = 0.1, n_dof: int = 1):
        self.amplitude = float(amplitude)
        self.length = float(length)
        self.n_dof = int(n_dof)

    @property
    def omega(self) -> float:
        return math.sqrt(self.amplitude) / self.length

    def gradient(self, q):
        return (self.amplitude / self.length) * np.sin(q / self.length)

    def laplacian(self, q):
        return (self.amplitude / self.length**2) * np.sum(np.cos(q / self.length), axis=-1)

    def potential(self, q):
        return self.amplitude * np.sum(1.0 - np.cos(q / self.length), axis=-1)

    def force(self, q, rng=None, *, want_cov=False):
        cov = np.zeros_like(q) if want_cov else None
        return ForceSample(-self.gradient(q), False, cov, energy=None)

    def mean_potential(self, beta: float) -> float:
        """Exact Gibbs average of ``U`` by quadrature over one period."""
        a, ell = self.amplitude, self.length
        w = lambda x: math.exp(-beta * a * (1.0 - math.cos(x)))
        z = integrate.quad(w, -math.pi, math.pi, epsabs=0, epsrel=1e-13)[0]
        m = integrate.quad(lambda x: a * (1.0 - math.cos(x)) * w(x), -math.pi, math.pi, epsabs=0, epsrel=1e-13)[0]
        return self.n_dof * m / z


class InjectedNoise(ForceModel):
    """``F~(q) = -grad U(q) + sigma M^1/2 R`` with a fresh ``R`` per call.

    The clean gradient and Laplacian of ``base`` stay reachable, which is
    what adaptive Brownian dynamics needs.
    """

    is_stochastic = True

    def __init__(self, base: ForceModel, sigma: float, mass=1.0):
        self.base = base
        self.sigma = float(sigma)
        self.n_dof = base.n_dof
        self.sqrt_mass = np.sqrt(np.asarray(mass, dtype=float))

    def gradient(self, q):
        return self.base.gradient(q)

    def laplacian(self, q):
        return self.base.laplacian(q)

    def potential(self, q):
        return self.base.potential(q)

    def mean_potential(self, beta):
        return self.base.mean_potential(beta)

    def force(self, q, rng: RngStream | None = None, *, want_cov=False):
        clean = self.base.force(q, None)
        noisy = clean.force + self.sigma * self.sqrt_mass * rng.normals(q.shape)
        cov = np.broadcast_to(self.sigma**2 * self.sqrt_mass**2, q.shape).copy() if want_cov else None
        return ForceSample(noisy, True, cov, clean.energy)
