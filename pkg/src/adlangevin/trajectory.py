"""Drive a batch of replicas for a fixed number of steps and accumulate observables.

Replicas that blow up are masked out: their entries are reset to the
initial values so the arrays stay finite, and nothing they produce after
that is recorded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .core import ForceModel, PhaseState, RngStream, SingularityError, ThermostatParams
from .observables import RunningAverage, burn_in_steps

# Any state component beyond this magnitude counts as diverged.
DIVERGENCE_BOUND = 1e10
# Steps between divergence checks; a replica that blows up in between is
# still excluded, since its accumulators are discarded as a whole.
CHECK_INTERVAL = 8
# Histogram samples buffered before binning.
HIST_BUFFER = 256

Observer = Callable[[PhaseState, ForceModel], np.ndarray]


@dataclass
class HistogramSpec:
    """Per-replica histogram of ``value(state)`` (shape ``(R,)``) on fixed bins."""

    value: Callable[[PhaseState], np.ndarray]
    bin_count: int
    range: tuple[float, float]


@dataclass
class TrajectoryResult:
    n_steps: int
    recorded: int
    alive: np.ndarray  # (R,) bool
    means: dict[str, np.ndarray]  # per replica, shape (R, ...)
    variances: dict[str, np.ndarray]
    force_evaluations: int
    hist_counts: np.ndarray | None = None  # (R, bins)
    hist_out_of_range: np.ndarray | None = None  # (R,)
    singular: bool = False
    final_state: PhaseState | None = field(default=None, repr=False)

    @property
    def n_replicas(self) -> int:
        return self.alive.size

    @property
    def n_diverged(self) -> int:
        return int(self.n_replicas - self.alive.sum())


def _healthy(state: PhaseState) -> np.ndarray:
    # NaN compares False, so this also catches non-finite entries.
    ok = np.abs(state.q).max(axis=-1) < DIVERGENCE_BOUND
    ok &= np.abs(state.p).max(axis=-1) < DIVERGENCE_BOUND
    ok &= np.abs(state.xi) < DIVERGENCE_BOUND
    return ok


def run_trajectory(
    state: PhaseState,
    h: float,
    n_steps: int,
    stepper: Callable,
    model: ForceModel,
    params: ThermostatParams,
    rng: RngStream,
    *,
    observers: Mapping[str, Observer] | None = None,
    histogram: HistogramSpec | None = None,
    burn_in_fraction: float = 0.2,
    sample_every: int = 1,
) -> TrajectoryResult:
    """Advance ``state`` (batch shape ``(R,)``) by ``n_steps`` steps of size ``h``.

    After the first ``floor(burn_in_fraction * n_steps)`` steps, every
    ``sample_every``-th post-step state is passed to the observers and the
    histogram.
    """
    if state.q.ndim != 2:
        raise ValueError(f"expected a replica axis, q has shape {state.q.shape}")
    observers = dict(observers or {})
    n_rep = state.q.shape[0]
    skip = burn_in_steps(n_steps, burn_in_fraction)
    origin = (state.q.copy(), state.p.copy(), np.array(state.xi, dtype=float))
    alive = np.ones(n_rep, dtype=bool)
    avgs = {name: None for name in observers}
    counts = out = None
    if histogram is not None:
        lo, hi = histogram.range
        scale = histogram.bin_count / (hi - lo)
        width = histogram.bin_count + 1
        tally = np.zeros(n_rep * width, dtype=np.int64)
        row_offset = np.arange(n_rep) * width
        buffer = np.empty((HIST_BUFFER, n_rep), dtype=np.int64)
        filled = 0

    def _flush():
        nonlocal filled
        if filled:
            tally[:] += np.bincount(buffer[:filled].ravel(), minlength=tally.size)
            filled = 0

    evaluations = 0
    recorded = 0
    singular = False

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for k in range(1, n_steps + 1):
            try:
                state, n_eval = stepper(state, h, model, params, rng)
            except SingularityError:
                alive[:] = False
                singular = True
                break
            evaluations += n_eval
            if k % CHECK_INTERVAL and k != n_steps:
                ok = None
            else:
                ok = _healthy(state)
            if ok is not None and not ok.all():
                alive &= ok
                if not alive.any():
                    break
                bad = ~ok
                q, p, xi = state.q.copy(), state.p.copy(), np.array(state.xi, dtype=float)
                q[bad], p[bad], xi[bad] = origin[0][bad], origin[1][bad], origin[2][bad]
                state = PhaseState(q, p, xi)
            if k <= skip or (k - skip) % sample_every:
                continue
            recorded += 1
            for name, fn in observers.items():
                value = np.asarray(fn(state, model), dtype=float)
                if avgs[name] is None:
                    avgs[name] = RunningAverage(value.shape)
                avgs[name].push(value)
            if histogram is not None:
                x = np.asarray(histogram.value(state), dtype=float)
                inside = (x >= lo) & (x < hi)
                b = np.floor((x - lo) * scale).astype(np.int64)
                np.clip(b, 0, histogram.bin_count - 1, out=b)
                # Out-of-range samples go to a per-replica overflow slot.
                buffer[filled] = np.where(inside, row_offset + b, row_offset + histogram.bin_count)
                filled += 1
                if filled == len(buffer):
                    _flush()

    if histogram is not None:
        _flush()
        per_rep = tally.reshape(n_rep, width)
        counts, out = per_rep[:, :-1].copy(), per_rep[:, -1].copy()
    means = {n: (a.mean if a is not None else np.full(n_rep, np.nan)) for n, a in avgs.items()}
    variances = {n: (a.variance if a is not None else np.full(n_rep, np.nan)) for n, a in avgs.items()}
    return TrajectoryResult(
        n_steps=n_steps,
        recorded=recorded,
        alive=alive,
        means=means,
        variances=variances,
        force_evaluations=evaluations,
        hist_counts=counts,
        hist_out_of_range=out,
        singular=singular,
        final_state=state,
    )
