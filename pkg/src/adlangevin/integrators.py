"""Exact sub-flow solvers, splitting schemes and first-order samplers.

The Ad-Langevin vector field is split into four exactly solvable pieces:

* ``A``  drift        ``q <- q + h M^-1 p``
* ``B``  kick         ``p <- p + h F~(q)``        (noisy force applied whole)
* ``O``  Ornstein-Uhlenbeck with friction ``xi`` and amplitude ``sigma_a``
* ``D``  friction     ``xi <- xi + h/mu (p^T M^-1 p - N_d kT)``

A :class:`SplittingScheme` is a word over these letters; ``"PAD"`` is the
non-symmetric SGNHT-N scheme whose ``P`` stage is a single Euler update of
``B`` and ``O`` together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .core import ConfigurationError, ForceModel, ForceSample, PhaseState, RngStream, ThermostatParams

# Below this |xi*h| the OU variance factor uses its Taylor series.
OU_SERIES_THRESHOLD = 1e-4

SCHEME_ALIASES = {"SGNHT-S": "BADODAB", "SGNHT-N": "PAD"}
FIRST_ORDER_METHODS = ("SGLD", "mSGLD", "adaptive-brownian")

_UNIT = ThermostatParams()


def ou_variance_factor(xi, h: float) -> np.ndarray:
    """``(1 - exp(-2 xi h)) / (2 xi)``, continuous through ``xi = 0``.

    Positive for every real ``xi`` and ``h > 0``.
    """
    xi = np.asarray(xi, dtype=float)
    x = xi * h
    small = np.abs(x) < OU_SERIES_THRESHOLD
    safe_xi = np.where(small, 1.0, xi)
    exact = -np.expm1(-2.0 * x) / (2.0 * safe_xi)
    series = h * (1.0 - x + (2.0 / 3.0) * x * x)
    return np.where(small, series, exact)


# -- array-level kernels, shared by the public sub-flows and by step_splitting --

def _drift(q, p, h, params):
    return q + h * params.inv_mass * p


def _ou(p, xi, h, params, rng):
    xi = np.asarray(xi)[..., None]
    decay = np.exp(-xi * h)
    if params.sigma_a == 0.0:
        return decay * p
    amp = params.sigma_a * np.sqrt(ou_variance_factor(xi, h)) * params.sqrt_mass
    return decay * p + amp * rng.normals(p.shape)


def _thermo(p, xi, h, params, n_dof):
    kinetic2 = np.sum(p * p * params.inv_mass, axis=-1)
    return xi + (h / params.mu) * (kinetic2 - n_dof * params.kT)


def step_A(state: PhaseState, h: float, params: ThermostatParams | None = None) -> PhaseState:
    """Exact drift ``q <- q + h M^-1 p``; unit masses when ``params`` is None.

    Negative ``h`` is accepted so that the flow can be inverted.
    """
    return state.replace(q=_drift(state.q, state.p, h, params or _UNIT))


def step_B(state: PhaseState, h: float, f: ForceSample | np.ndarray) -> PhaseState:
    """Constant-force kick ``p <- p + h f``.

    For a noisy force this one update carries both the deterministic
    ``-grad U h`` term and the ``sigma h R`` noise; they are never split.
    """
    fv = f.force if isinstance(f, ForceSample) else np.asarray(f, dtype=float)
    return state.replace(p=state.p + h * fv)


def step_O(state: PhaseState, h: float, params: ThermostatParams, rng: RngStream | None) -> PhaseState:
    """Exact Ornstein-Uhlenbeck solve for the momenta at frozen ``xi``.

    Valid for ``xi`` of any sign; ``xi = 0`` reduces to ``p + sqrt(h) sigma_a M^1/2 R``.
    """
    return state.replace(p=_ou(state.p, state.xi, h, params, rng))


def step_D(state: PhaseState, h: float, params: ThermostatParams) -> PhaseState:
    """Friction control law ``xi <- xi + h/mu (p^T M^-1 p - N_d kT)``."""
    return state.replace(xi=_thermo(state.p, state.xi, h, params, params.dof(state)))


@dataclass(frozen=True)
class SplittingScheme:
    """Ordered sub-flows with their fractions of the step ``h``."""

    name: str
    letters: tuple[str, ...]
    fractions: tuple[float, ...]

    @property
    def symmetric(self) -> bool:
        seq = list(zip(self.letters, self.fractions))
        return seq == seq[::-1]

    @property
    def reuses_force(self) -> bool:
        return self.letters[0] == "B" and self.letters[-1] == "B"

    def __len__(self):
        return len(self.letters)


def compile_scheme(spec: str) -> SplittingScheme:
    """Parse a scheme string such as ``"BADODAB"`` or ``"PAD"``.

    A letter that occurs ``k`` times gets the fraction ``1/k`` at each
    occurrence, so every sub-dynamics spans exactly one step in total.
    """
    if not isinstance(spec, str) or not spec:
        raise ConfigurationError("scheme string must be non-empty")
    name = spec
    spec = SCHEME_ALIASES.get(spec, spec).upper()
    if spec == "PAD":
        return SplittingScheme(name, ("P", "A", "D"), (1.0, 1.0, 1.0))
    bad = sorted(set(spec) - set("ABOD"))
    if bad:
        raise ConfigurationError(f"invalid letter(s) {''.join(bad)!r} in scheme {name!r}; allowed: A, B, O, D")
    counts = {c: spec.count(c) for c in set(spec)}
    fractions = tuple(float(Fraction(1, counts[c])) for c in spec)
    return SplittingScheme(name, tuple(spec), fractions)


@dataclass(frozen=True)
class StepReport:
    force_evaluations: int
    diverged: bool


def _fresh_force(model, q, rng):
    return model.force(q, rng)


def _advance(state, h, scheme, model, params, rng, reuse_force):
    q, p, xi = state.q, state.p, state.xi
    cached = state.force if reuse_force else None
    n_dof = params.dof(state)
    evaluations = 0
    for letter, frac in zip(scheme.letters, scheme.fractions):
        dt = frac * h
        if letter == "A":
            q = _drift(q, p, dt, params)
            cached = None
        elif letter == "B":
            if cached is None:
                cached = _fresh_force(model, q, rng)
                evaluations += 1
            p = p + dt * cached.force
            if not reuse_force:
                cached = None
        elif letter == "O":
            p = _ou(p, xi, dt, params, rng)
        elif letter == "D":
            xi = _thermo(p, xi, dt, params, n_dof)
        elif letter == "P":
            f = _fresh_force(model, q, rng)
            evaluations += 1
            p = p + dt * f.force - dt * xi[..., None] * p
            if params.sigma_a:
                p = p + math.sqrt(dt) * params.sigma_a * params.sqrt_mass * rng.normals(p.shape)
    return PhaseState(q, p, xi, force=cached), evaluations


def step_splitting(
    state: PhaseState,
    h: float,
    scheme: SplittingScheme,
    model: ForceModel,
    params: ThermostatParams,
    rng: RngStream,
    *,
    reuse_force: bool = True,
) -> tuple[PhaseState, StepReport]:
    """Advance one step of ``scheme``, applying sub-flows left to right.

    A force evaluated at the current positions is kept on the returned state
    and reused by the next ``B`` stage while ``q`` is unchanged (so BADODAB
    costs one force evaluation per step). With ``reuse_force=False`` every
    ``B`` stage evaluates afresh.
    """
    new, evaluations = _advance(state, h, scheme, model, params, rng, reuse_force)
    return new, StepReport(evaluations, not bool(new.finite().all()))


def step_sgnht_n(state, h, model, params, rng) -> tuple[PhaseState, StepReport]:
    """SGNHT-N: Euler ``P`` (force, friction, noise together), then ``A``, then ``D``."""
    return step_splitting(state, h, _PAD, model, params, rng)


def step_sgnht_s(state, h, model, params, rng) -> tuple[PhaseState, StepReport]:
    """SGNHT-S, i.e. the BADODAB splitting with force reuse."""
    return step_splitting(state, h, _BADODAB, model, params, rng)


def step_sgld(state: PhaseState, h: float, model: ForceModel, params: ThermostatParams, rng: RngStream) -> PhaseState:
    """Fixed-step SGLD: ``q <- q + h F~(q) + sqrt(2 h / beta) R``; ``p`` and ``xi`` untouched."""
    f = model.force(state.q, rng)
    q = state.q + h * f.force + math.sqrt(2.0 * h / params.beta) * rng.normals(state.q.shape)
    return state.replace(q=q)


def step_msgld(state: PhaseState, h: float, model: ForceModel, params: ThermostatParams, rng: RngStream) -> PhaseState:
    """Modified SGLD with noise multiplier ``I - (h/4) Cov F~``.

    The covariance comes from the model (``want_cov=True``): a diagonal of the
    same shape as the force, or a full matrix with one extra trailing axis.
    """
    f = model.force(state.q, rng, want_cov=True)
    if f.cov_estimate is None:
        raise ConfigurationError(f"{type(model).__name__} does not provide a force covariance for mSGLD")
    r = rng.normals(state.q.shape)
    cov = np.asarray(f.cov_estimate)
    if cov.shape == r.shape or cov.ndim == 0:
        noise = r - (h / 4.0) * cov * r
    else:
        noise = r - (h / 4.0) * np.einsum("...ij,...j->...i", cov, r)
    q = state.q + h * f.force + math.sqrt(2.0 * h / params.beta) * noise
    return state.replace(q=q)


def step_adaptive_brownian(
    state: PhaseState, h: float, model: ForceModel, params: ThermostatParams, rng: RngStream
) -> PhaseState:
    """Euler-Maruyama for adaptive Brownian dynamics with known noise level.

    ``q <- q - h xi grad U + sigma sqrt(h) R`` and
    ``xi <- xi + h (-laplacian U / beta + |grad U|^2)``, both at the old ``q``.
    Needs the model's clean gradient, Laplacian and ``sigma`` separately,
    which only test models expose.
    """
    try:
        grad = model.gradient(state.q)
        lap = model.laplacian(state.q)
    except NotImplementedError as exc:
        raise ConfigurationError(str(exc)) from exc
    sigma = float(getattr(model, "sigma", 0.0))
    xi = state.xi
    q = state.q - h * xi[..., None] * grad
    if sigma:
        q = q + sigma * math.sqrt(h) * rng.normals(q.shape)
    chi = -lap / params.beta + np.sum(grad * grad, axis=-1)
    return PhaseState(q, state.p, xi + h * chi)


def is_first_order(method: str) -> bool:
    return method in FIRST_ORDER_METHODS


def make_stepper(method: str, *, reuse_force: bool = True) -> Callable:
    """Uniform ``step(state, h, model, params, rng) -> (state, force_evaluations)``.

    ``method`` is a scheme string (``BADODAB``, ``PAD``, ``ABDODBA``, ...), one
    of the aliases ``SGNHT-S``/``SGNHT-N``, or a first-order method name.
    """
    if method == "SGLD":
        return lambda s, h, m, pr, r: (step_sgld(s, h, m, pr, r), 1)
    if method == "mSGLD":
        return lambda s, h, m, pr, r: (step_msgld(s, h, m, pr, r), 1)
    if method == "adaptive-brownian":
        return lambda s, h, m, pr, r: (step_adaptive_brownian(s, h, m, pr, r), 1)
    scheme = compile_scheme(method)

    def step(s, h, m, pr, r):
        return _advance(s, h, scheme, m, pr, r, reuse_force)

    return step


def initial_xi(method: str, params: ThermostatParams, model: ForceModel | None = None, h: float = 0.0) -> float:
    """Starting friction: the stationary mean of the extended Gibbs density.

    ``beta (sigma^2 h + sigma_a^2) / 2`` for the thermostats, where ``sigma`` is
    the model's force-noise level if it knows one (zero otherwise), and
    ``beta sigma^2 / 2`` for adaptive Brownian dynamics.
    """
    sigma = model.force_noise_sigma() if model is not None else 0.0
    if method == "adaptive-brownian":
        return params.beta * sigma**2 / 2
    return params.stationary_xi(sigma, h)


_PAD = compile_scheme("PAD")
_BADODAB = compile_scheme("BADODAB")
