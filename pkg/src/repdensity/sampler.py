"""Markov chains over component assignments.

Plain and blocked collapsed Gibbs sweeps with component parameters
integrated out, concentration resampling under a Gamma(1, 1) prior, and
the burn-in/thinning retention schedule. Hot loops live in
repdensity.kernels; this module owns chain state and bookkeeping.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericalError, ParameterError, ValidationError
from .niw import ComponentStats, posterior_update


@dataclass(frozen=True)
class SamplerConfig:
    """Chain schedule. Defaults: 400 blocked sweeps over the dataset,
    first 320 discarded, every 4th of the rest retained, block size 4."""

    sweeps: int = 400
    burn_in: int = 320
    thin: int = 4
    block_size: int = 4
    seed: int = 0
    resample_alpha: bool = True

    def __post_init__(self):
        if not 0 <= self.burn_in < self.sweeps:
            raise ParameterError(
                f"burn_in {self.burn_in} must lie in [0, sweeps)")
        if self.thin < 1:
            raise ParameterError(f"thin must be >= 1, got {self.thin}")
        if self.block_size < 1:
            raise ParameterError(
                f"block_size must be >= 1, got {self.block_size}")

    def retained_count(self):
        """Number of snapshots the schedule keeps."""
        return (self.sweeps - self.burn_in + self.thin - 1) // self.thin


@dataclass(frozen=True)
class ChainSnapshot:
    """Retained chain state: assignments and concentration only."""

    assignments: np.ndarray
    alpha: float
    step_index: int


class ChainState:
    """Mutable sampler state bound to one dataset and prior.

    Components are stored in dense slot arrays sized for one sweep's worth
    of growth; emptied slots stay dead until the end-of-sweep compaction,
    and component ids increase monotonically without reuse.
    """

    def __init__(self, data, prior, alpha, rng):
        X = np.ascontiguousarray(np.atleast_2d(data), dtype=np.float64)
        n, d = X.shape
        if n < 1:
            raise ParameterError("cannot initialize a chain on empty data")
        if d != prior.d:
            raise ParameterError(
                f"data dimension {d} does not match prior {prior.d}")
        if not np.isfinite(X).all():
            raise ValidationError("data contains non-finite values")
        self.data = X
        self.prior = prior
        self.alpha = float(alpha)
        self.step_index = 0
        self._rng = rng

        cap = n + 2
        self._assign = np.zeros(n, dtype=np.int64)
        self._counts = np.zeros(cap, dtype=np.int64)
        self._sums = np.zeros((cap, d))
        self._chols = np.zeros((cap, d, d))
        self._logdets = np.zeros(cap)
        self._slot_ids = np.zeros(cap, dtype=np.uint64)
        self._n_slots = 1
        self._next_id = 1

        init = ComponentStats.from_data(prior, X)
        self._counts[0] = init.count
        self._sums[0] = init.sum
        self._chols[0] = init.chol_psi
        self._logdets[0] = init.log_det

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]

    @property
    def n_components(self):
        return self._n_slots

    @property
    def assignments(self):
        """Component id per observation."""
        return self._slot_ids[self._assign]

    @property
    def components(self):
        """Component id -> ComponentStats view of the current state."""
        out = {}
        for s in range(self._n_slots):
            out[int(self._slot_ids[s])] = ComponentStats(
                self._counts[s], self._sums[s].copy(),
                self._chols[s].copy(), self._logdets[s])
        return out

    def snapshot(self, step_index=None):
        return ChainSnapshot(
            assignments=self.assignments.copy(),
            alpha=self.alpha,
            step_index=self.step_index if step_index is None else step_index,
        )

    def _ensure_capacity(self):
        need = self._n_slots + self.n + 1
        cap = self._counts.shape[0]
        if need <= cap:
            return
        grow = max(need, 2 * cap)
        for name in ("_counts", "_sums", "_chols", "_logdets", "_slot_ids"):
            old = getattr(self, name)
            new = np.zeros((grow,) + old.shape[1:], dtype=old.dtype)
            new[:self._n_slots] = old[:self._n_slots]
            setattr(self, name, new)

    def _compact(self, prev_slots):
        # fresh slots created during the sweep get their ids in creation
        # order, then live slots are packed to the front
        for s in range(prev_slots, self._n_slots):
            self._slot_ids[s] = self._next_id
            self._next_id += 1
        active = np.flatnonzero(self._counts[:self._n_slots] > 0)
        k = active.shape[0]
        remap = np.full(self._n_slots, -1, dtype=np.int64)
        remap[active] = np.arange(k)
        self._counts[:k] = self._counts[active]
        self._sums[:k] = self._sums[active]
        self._chols[:k] = self._chols[active]
        self._logdets[:k] = self._logdets[active]
        self._slot_ids[:k] = self._slot_ids[active]
        self._counts[k:self._n_slots] = 0
        self._assign = remap[self._assign]
        self._n_slots = k

    def check_invariants(self):
        """Cheap structural checks: every observation assigned, counts sum to n."""
        if np.any(self._assign < 0) or np.any(self._assign >= self._n_slots):
            raise NumericalError("dangling assignment slot")
        if int(self._counts[:self._n_slots].sum()) != self.n:
            raise NumericalError("component counts do not sum to n")
        if np.any(self._counts[:self._n_slots] <= 0):
            raise NumericalError("empty component retained after compaction")
        if not self.alpha > 0:
            raise NumericalError("non-positive concentration")

    def check_consistency(self, rtol=1e-6):
        """Compare incremental component scale factors against the batch path."""
        for s in range(self._n_slots):
            rows = self.data[self._assign == s]
            batch = posterior_update(self.prior, rows)
            incr = self._chols[s] @ self._chols[s].T
            err = np.linalg.norm(incr - batch.psi0) / np.linalg.norm(batch.psi0)
            if err > rtol:
                raise NumericalError(
                    f"incremental stats drifted {err:.3e} from batch path")
            if int(self._counts[s]) != rows.shape[0]:
                raise NumericalError("count mismatch against batch recount")


def init_chain(data, prior, config):
    """Fresh chain: one component holding every observation, concentration
    drawn from its Gamma(1, 1) prior under the configured seed."""
    rng = np.random.default_rng(config.seed)
    return _init_chain(data, prior, rng)


def _init_chain(data, prior, rng):
    alpha = rng.gamma(1.0, 1.0)
    return ChainState(data, prior, alpha, rng)


def _sweep_args(state):
    prior = state.prior
    return (state.data, state._assign, state._counts, state._sums,
            state._chols, state._logdets, state._n_slots, state.alpha,
            prior.mu0, prior.kappa0, prior.nu0, prior.psi0,
            prior.chol_psi0, prior.log_det_psi0)


def plain_gibbs_sweep(state, data, prior, rng):
    """One single-site collapsed Gibbs pass over all observations.

    Each assignment is resampled from the conditional proportional to
    n_k times the component predictive for occupied components and alpha
    times the prior predictive for a fresh one. Mutates and returns state.
    """
    _check_bound(state, data, prior)
    state._ensure_capacity()
    prev = state._n_slots
    uniforms = rng.random(state.n)
    state._n_slots = kernels.plain_sweep(*_sweep_args(state), uniforms)
    state._compact(prev)
    state.step_index += 1
    return state


def block_gibbs_sweep(state, data, prior, rng, b):
    """One blocked collapsed Gibbs pass.

    A fresh permutation of the observations is split into consecutive
    b-sized blocks (the last may be shorter); block members are resampled
    independently given the state outside the block, and every in-block
    fresh-component draw opens its own component. Mutates and returns state.
    """
    if b < 1:
        raise ParameterError(f"block size must be >= 1, got {b}")
    _check_bound(state, data, prior)
    state._ensure_capacity()
    prev = state._n_slots
    perm = rng.permutation(state.n)
    uniforms = rng.random(state.n)
    state._n_slots = kernels.block_sweep(*_sweep_args(state), uniforms,
                                         perm, b)
    state._compact(prev)
    state.step_index += 1
    return state


def resample_alpha_value(alpha, k, n, rng):
    """One auxiliary-beta kernel step for the concentration.

    Under a Gamma(1, 1) prior, draw eta ~ Beta(alpha + 1, n) and then a new
    alpha from the two-component Gamma mixture whose odds depend on the
    component count k; iterating targets the conditional p(alpha | k, n).
    """
    a, b = 1.0, 1.0
    eta = rng.beta(alpha + 1.0, n)
    rate = b - math.log(eta)
    odds = (a + k - 1.0) / (n * rate)
    shape = a + k if rng.random() < odds / (1.0 + odds) else a + k - 1.0
    return rng.gamma(shape, 1.0 / rate)


def resample_alpha(state, rng):
    """Redraw the chain's concentration in place; returns state."""
    if state._n_slots < 1:
        raise ParameterError("need at least one component")
    state.alpha = resample_alpha_value(state.alpha, state._n_slots, state.n,
                                       rng)
    return state


def _check_bound(state, data, prior):
    data = np.atleast_2d(np.asarray(data))
    if data.shape != state.data.shape:
        raise ParameterError("data does not match the chain's dataset")
    if prior.d != state.prior.d:
        raise ParameterError("prior does not match the chain's prior")


def run(data, prior, config, validate=False):
    """Run the configured blocked chain and return retained snapshots.

    Executes config.sweeps block sweeps (concentration resampled after
    each when enabled) and keeps the states at sweep indices s with
    s >= burn_in and (s - burn_in) % thin == 0. Fully deterministic for a
    fixed (data, prior, config).

    With validate=True the incremental statistics are checked against the
    batch path every 50 sweeps.
    """
    rng = np.random.default_rng(config.seed)
    state = _init_chain(data, prior, rng)
    retained = []
    for s in range(config.sweeps):
        block_gibbs_sweep(state, data, prior, rng, config.block_size)
        if config.resample_alpha:
            resample_alpha(state, rng)
        if validate and (s + 1) % 50 == 0:
            state.check_invariants()
            state.check_consistency()
        if s >= config.burn_in and (s - config.burn_in) % config.thin == 0:
            state.check_invariants()
            retained.append(state.snapshot(step_index=s))
    return retained
