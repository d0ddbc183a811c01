"""Periodic N-body system of cut-off springs ("pendulum" pair potential).

``phi(r) = k/2 (r - r_c)^2`` for ``r < r_c`` and zero beyond, summed over
pairs with minimum-image distances in a cubic box. Positions are stored
flat, ``q.shape == (*batch, 3N)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ..core import ConfigurationError, ForceModel, ForceSample, SingularityError

_OFFSETS = np.array(list(product((-1, 0, 1), repeat=3)))


@dataclass
class PairEvaluation:
    """Everything one pass over the neighbour pairs yields."""

    force: np.ndarray  # (N, 3)
    energy: float
    grad_sq: float  # sum_i |grad_i U|^2
    laplacian: float  # sum_i lap_i U


def _all_pairs(n):
    i, j = np.triu_indices(n, 1)
    return i, j


def _cell_list_pairs(x, box, r_cut):
    """Candidate pairs ``i < j`` from a cell list with cells no smaller than ``r_cut``.

    Returns None when the box is too small for a 3x3x3 stencil without
    double counting; the caller then falls back to all pairs.
    """
    n_side = int(box // r_cut)
    if n_side < 3:
        return None
    n = x.shape[0]
    cell = box / n_side
    c3 = np.floor(np.mod(x, box) / cell).astype(np.int64)
    np.clip(c3, 0, n_side - 1, out=c3)  # mod() can return exactly `box` in floating point
    cid = (c3[:, 0] * n_side + c3[:, 1]) * n_side + c3[:, 2]
    order = np.argsort(cid, kind="stable")
    counts = np.bincount(cid, minlength=n_side**3)
    starts = np.cumsum(counts) - counts

    nb = np.mod(c3[:, None, :] + _OFFSETS[None, :, :], n_side)
    nb_id = ((nb[..., 0] * n_side + nb[..., 1]) * n_side + nb[..., 2]).ravel()
    cnt = counts[nb_id]
    st = starts[nb_id]
    total = int(cnt.sum())
    owner = np.repeat(np.repeat(np.arange(n), len(_OFFSETS)), cnt)
    block_begin = np.cumsum(cnt) - cnt
    slot = np.arange(total) - np.repeat(block_begin, cnt) + np.repeat(st, cnt)
    other = order[slot]
    keep = owner < other
    return owner[keep], other[keep]


class PendulumSystem(ForceModel):
    """Cut-off spring fluid at number density ``density`` in a periodic cube.

    Defaults are the standard molecular benchmark (500 particles, density 4,
    ``k = 25``, ``r_c = 1``).
    """

    def __init__(
        self,
        n_particles: int = 500,
        density: float = 4.0,
        k_spring: float = 25.0,
        r_cut: float = 1.0,
        use_cell_list: bool = True,
    ):
        if n_particles < 2:
            raise ConfigurationError("n_particles must be >= 2")
        if density <= 0 or k_spring <= 0 or r_cut <= 0:
            raise ConfigurationError("density, k_spring and r_cut must be positive")
        self.n_particles = int(n_particles)
        self.density = float(density)
        self.k_spring = float(k_spring)
        self.r_cut = float(r_cut)
        self.box_side = (self.n_particles / self.density) ** (1.0 / 3.0)
        if self.r_cut > self.box_side / 2:
            raise ConfigurationError(
                f"r_cut={self.r_cut} exceeds half the box side {self.box_side / 2:.4g}; minimum image is invalid"
            )
        self.use_cell_list = use_cell_list
        self.n_dof = 3 * self.n_particles

    # -- pair machinery --

    def pairs(self, x: np.ndarray):
        if self.use_cell_list:
            found = _cell_list_pairs(x, self.box_side, self.r_cut)
            if found is not None:
                return found
        return _all_pairs(self.n_particles)

    def evaluate(self, q: np.ndarray) -> PairEvaluation:
        """Forces, energy and configurational-temperature sums for one configuration."""
        x = np.asarray(q, dtype=float).reshape(self.n_particles, 3)
        i, j = self.pairs(x)
        d = x[i] - x[j]
        d -= self.box_side * np.round(d / self.box_side)
        r = np.sqrt(np.einsum("ij,ij->i", d, d))
        inside = r < self.r_cut
        i, j, d, r = i[inside], j[inside], d[inside], r[inside]
        if np.any(r == 0.0):
            raise SingularityError("coincident particles: pair distance is zero")
        stretch = r - self.r_cut
        fmag = -self.k_spring * stretch / r  # force on i is fmag * d
        fij = fmag[:, None] * d
        n = self.n_particles
        forces = np.empty((n, 3))
        for c in range(3):
            forces[:, c] = np.bincount(i, fij[:, c], n) - np.bincount(j, fij[:, c], n)
        energy = 0.5 * self.k_spring * float(np.dot(stretch, stretch))
        lap = 2.0 * float(np.sum(self.k_spring * (3.0 - 2.0 * self.r_cut / r)))
        return PairEvaluation(forces, energy, float(np.sum(forces * forces)), lap)

    def evaluate_batch(self, q):
        """``(force, energy, grad_sq, laplacian)`` for flat positions ``(*batch, 3N)``."""
        q = np.asarray(q, dtype=float)
        shape = q.shape[:-1]
        evs = [self.evaluate(row) for row in q.reshape(-1, q.shape[-1])]
        forces = np.stack([e.force.reshape(-1) for e in evs]).reshape(q.shape)
        scalars = np.array([(e.energy, e.grad_sq, e.laplacian) for e in evs]).T.reshape(3, *shape)
        return forces, scalars[0], scalars[1], scalars[2]

    # -- ForceModel interface --

    def pendulum_force_energy(self, q):
        """``(force, energy)`` for flat positions of shape ``(*batch, 3N)``."""
        f, e, _, _ = self.evaluate_batch(q)
        return f, e

    def force(self, q, rng=None, *, want_cov=False):
        f, e, g2, lap = self.evaluate_batch(q)
        cov = np.zeros_like(f) if want_cov else None
        return ForceSample(f, False, cov, energy=e, extras={"grad_sq": g2, "laplacian": lap})

    def gradient(self, q):
        return -self.evaluate_batch(q)[0]

    def potential(self, q):
        return self.evaluate_batch(q)[1]

    def configurational_temperature(self, q):
        """Numerator ``sum_i |grad_i U|^2`` and denominator ``sum_i lap_i U``.

        Averaging and the final ratio are left to the caller.
        """
        _, _, g2, lap = self.evaluate_batch(q)
        return g2, lap

    def laplacian(self, q):
        return self.evaluate_batch(q)[3]

    def lattice_positions(self) -> np.ndarray:
        """Flat positions on a simple cubic grid filling the box."""
        m = int(np.ceil(self.n_particles ** (1.0 / 3.0) - 1e-9))
        spacing = self.box_side / m
        grid = np.array(list(product(range(m), repeat=3)), dtype=float)[: self.n_particles]
        return ((grid + 0.5) * spacing).reshape(-1)
