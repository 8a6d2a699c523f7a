"""Independent low-tech verifiers.

Nothing here reuses the optimizers or the einsum Born table of
:mod:`localroi.discrimination`: probabilities are recomputed with explicit
Kronecker products and traces, strategies are enumerated outright, and the
game is played out by sampling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import make_rng
from .discrimination import LO, LOCC1, DiscriminationTask, LocalStrategy
from .errors import ResourceError, ShapeError
from .linalg import kron_all
from .measurements import MeasurementSet, ResponseTable, apply_parent, random_povm

__all__ = [
    "SimulationResult",
    "strategy_count",
    "brute_force_product",
    "brute_force_psg",
    "simulate_game",
    "random_compatible_set",
]

ENUMERATION_CAP = 10**7


@dataclass(frozen=True)
class SimulationResult:
    trials: int
    successes: int
    empirical_rate: float
    std_error: float

    @classmethod
    def from_counts(cls, trials: int, successes: int) -> "SimulationResult":
        p = successes / trials
        return cls(trials, successes, p, math.sqrt(p * (1.0 - p) / trials))

    def within(self, expected: float, n_sigma: float) -> bool:
        """``|rate - expected| <= n_sigma * sigma``.

        ``sigma`` is the larger of the empirical standard error and the
        binomial one at ``expected``; the empirical one alone collapses to
        zero when every round succeeds (or fails).
        """
        p = min(max(expected, 0.0), 1.0)
        sigma = max(self.std_error, math.sqrt(p * (1.0 - p) / self.trials))
        return abs(self.empirical_rate - expected) <= n_sigma * sigma + 1e-15


def _born_probs(rho: np.ndarray, effects: Sequence[np.ndarray]) -> float:
    return float(np.trace(rho @ kron_all(effects)).real)


def _weighted_probs(task: DiscriminationTask, sets: Sequence[MeasurementSet], y: int, ks: Sequence[int]) -> np.ndarray:
    """``P[b, c_1, ..., c_n] = q(b|y) tr[rho_{b|y} (x) M_{c_i|k_i}]`` with the true outcome counts."""
    ens = task.ensembles[y]
    counts = [sets[i][k].n_outcomes for i, k in enumerate(ks)]
    out = np.zeros((len(ens.states), *counts))
    for b, (w, rho) in enumerate(zip(ens.weights, ens.states)):
        for cs in itertools.product(*(range(n) for n in counts)):
            out[(b, *cs)] = w * _born_probs(rho, [sets[i].effect(c, k) for i, (c, k) in enumerate(zip(cs, ks))])
    return out


def _best_guess_function(table: np.ndarray) -> float:
    """Max over every map from outcome tuples to guesses of ``sum_o table[g(o), o]`` by listing all maps."""
    B = table.shape[0]
    flat = table.reshape(B, -1)
    n_out = flat.shape[1]
    cols = np.arange(n_out)
    best = -np.inf
    # chunk over the B**n_out guess functions
    for chunk in _chunks(itertools.product(range(B), repeat=n_out), 4096):
        g = np.asarray(chunk)
        best = max(best, float(flat[g, cols].sum(axis=1).max()))
    return best


def _chunks(it, size):
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        yield block


def strategy_count(task: DiscriminationTask, sets: Sequence[MeasurementSet], mode: str = LO) -> int:
    """Number of deterministic per-ensemble strategies that :func:`brute_force_psg` enumerates."""
    total = 0
    for ens in task.ensembles:
        B = len(ens.states)
        if mode == LO:
            for ks in itertools.product(*(range(s.n_meas) for s in sets)):
                total += B ** math.prod(sets[i][k].n_outcomes for i, k in enumerate(ks))
        else:
            a, b = sets
            for k in range(a.n_meas):
                n_c = a[k].n_outcomes
                for ls in itertools.product(range(b.n_meas), repeat=n_c):
                    total += B ** sum(b[l].n_outcomes for l in ls)
    return total


def brute_force_psg(
    task: DiscriminationTask, sets: Sequence[MeasurementSet], mode: str = LO, cap: int = ENUMERATION_CAP
) -> float:
    """Exact optimum over deterministic strategies by enumeration.

    The success probability is a sum over ensembles ``y`` of terms that
    depend only on the strategy rows for that ``y``, so the global maximum
    over the product of all per-``y`` tables is the sum of per-``y`` maxima.
    Each per-``y`` maximum is found by listing every deterministic
    measurement choice (and, for ``LOCC1``, every map from the first
    party's outcome to the second party's choice) together with every
    guess function.
    """
    if len(sets) != task.n_parties:
        raise ShapeError("one measurement set per party is required")
    if mode == LOCC1 and task.n_parties != 2:
        raise ShapeError("LOCC1 enumeration is bipartite")
    n = strategy_count(task, sets, mode)
    if n > cap:
        raise ResourceError(f"{n} strategies exceed the enumeration cap {cap}")
    value = 0.0
    for y, ens in enumerate(task.ensembles):
        q = task.ensembles[y].prior
        best = -np.inf
        if mode == LO:
            for ks in itertools.product(*(range(s.n_meas) for s in sets)):
                best = max(best, _best_guess_function(_weighted_probs(task, sets, y, ks)))
        else:
            a, b = sets
            for k in range(a.n_meas):
                n_c = a[k].n_outcomes
                per_l = [_weighted_probs(task, sets, y, (k, l)) for l in range(b.n_meas)]
                for ls in itertools.product(range(b.n_meas), repeat=n_c):
                    # outcomes of this strategy are (c, d) with d ranging over N_{l(c)}
                    cols = [per_l[ls[c]][:, c, :] for c in range(n_c)]
                    best = max(best, _best_guess_function(np.concatenate(cols, axis=1)))
        value += q * best
    return float(value)


def brute_force_product(task: DiscriminationTask, sets: Sequence[MeasurementSet], cap: int = ENUMERATION_CAP) -> float:
    """LO optimum by enumerating the full product of per-ensemble strategies (tiny instances only)."""
    per_y: list[list[float]] = []
    for y, ens in enumerate(task.ensembles):
        vals = []
        for ks in itertools.product(*(range(s.n_meas) for s in sets)):
            table = _weighted_probs(task, sets, y, ks).reshape(len(ens.states), -1)
            cols = np.arange(table.shape[1])
            for g in itertools.product(range(len(ens.states)), repeat=table.shape[1]):
                vals.append(ens.prior * float(table[list(g), cols].sum()))
        per_y.append(vals)
    n = math.prod(len(v) for v in per_y)
    if n > cap:
        raise ResourceError(f"{n} joint strategies exceed the enumeration cap {cap}")
    return max(sum(combo) for combo in itertools.product(*per_y))


# --------------------------------------------------------------------------
# Monte Carlo


def _clean(p: np.ndarray, what: str) -> np.ndarray:
    if p.min() < -1e-9:
        raise ArithmeticError(f"{what}: negative probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > 1e-8:
        raise ArithmeticError(f"{what}: probabilities sum to {total!r}")
    return p / total


def _draw(p: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling from a clean probability vector."""
    cdf = np.cumsum(p)
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    return np.minimum(idx, len(p) - 1)


def _draw_grouped(keys: np.ndarray, probs_of, rng: np.random.Generator) -> np.ndarray:
    """Sample one index per row, grouping rows with equal ``keys`` (2-D int array)."""
    out = np.empty(len(keys), dtype=int)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    for g, key in enumerate(uniq):
        rows = np.nonzero(inverse == g)[0]
        out[rows] = _draw(probs_of(tuple(int(v) for v in key)), len(rows), rng)
    return out


def simulate_game(
    task: DiscriminationTask,
    sets: Sequence[MeasurementSet],
    strategy: LocalStrategy,
    trials: int,
    seed: int,
) -> SimulationResult:
    """Play the discrimination game ``trials`` times and count correct guesses.

    Draw order per round: ensemble ``y``, state ``b``, measurement choices,
    outcomes by the Born rule (the second party's choice after the first
    outcome in ``LOCC1`` mode), then the guess.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if len(sets) != task.n_parties:
        raise ShapeError("one measurement set per party is required")
    n = task.n_parties
    rng = make_rng(seed)
    y = _draw(_clean(task.priors, "priors"), trials, rng)
    b = _draw_grouped(y[:, None], lambda key: _clean(task.ensembles[key[0]].weights, "weights"), rng)

    def state(yy: int, bb: int) -> np.ndarray:
        return task.ensembles[yy].states[bb]

    if strategy.mode == LO:
        ks = [
            _draw_grouped(y[:, None], lambda key, i=i: _clean(strategy.choices[i][key[0]], "choice"), rng)
            for i in range(n)
        ]

        def joint(key):
            yy, bb, *kk = key
            counts = [sets[i][k].n_outcomes for i, k in enumerate(kk)]
            p = np.array([
                _born_probs(state(yy, bb), [sets[i].effect(c, k) for i, (c, k) in enumerate(zip(cs, kk))])
                for cs in itertools.product(*(range(m) for m in counts))
            ])
            return _clean(p, "Born")

        keys = np.column_stack([y, b, *ks])
        flat = _draw_grouped(keys, joint, rng)
        outcomes = []
        # unravel per row: outcome counts depend on the chosen measurements
        counts = np.column_stack([np.array([s[k].n_outcomes for k in range(s.n_meas)])[ks[i]] for i, s in enumerate(sets)])
        rem = flat.copy()
        for i in reversed(range(n)):
            outcomes.append(rem % counts[:, i])
            rem //= counts[:, i]
        outcomes.reverse()
    else:
        a, bset = sets
        k = _draw_grouped(y[:, None], lambda key: _clean(strategy.choices[0][key[0]], "choice"), rng)
        eye_b = np.eye(bset.dim)
        eye_a = np.eye(a.dim)

        def marginal_a(key):
            yy, bb, kk = key
            p = np.array([_born_probs(state(yy, bb), [a.effect(c, kk), eye_b]) for c in range(a[kk].n_outcomes)])
            return _clean(p, "Born")

        c = _draw_grouped(np.column_stack([y, b, k]), marginal_a, rng)
        l = _draw_grouped(np.column_stack([y, c]), lambda key: _clean(strategy.choices[1][key[0], key[1]], "choice"), rng)

        def conditional_b(key):
            yy, bb, kk, cc, ll = key
            rho = state(yy, bb)
            pc = _born_probs(rho, [a.effect(cc, kk), eye_b])
            p = np.array([_born_probs(rho, [a.effect(cc, kk), bset.effect(d, ll)]) for d in range(bset[ll].n_outcomes)])
            if pc <= 0:
                raise ArithmeticError("sampled an outcome of zero probability")
            return _clean(p / pc, "Born")

        d = _draw_grouped(np.column_stack([y, b, k, c, l]), conditional_b, rng)
        outcomes = [c, d]
        del eye_a

    guess_keys = np.column_stack([y, *outcomes])
    guess = _draw_grouped(guess_keys, lambda key: _clean(strategy.guess[key], "guess"), rng)
    return SimulationResult.from_counts(trials, int(np.count_nonzero(guess == b)))


def random_compatible_set(dim: int, n_meas: int, n_out: int, parent_out: int, seed: int) -> MeasurementSet:
    """Random parent POVM pushed through a random row-stochastic response table."""
    if min(dim, n_meas, n_out, parent_out) < 1:
        raise ValueError("all sizes must be positive")
    rng = make_rng(seed)
    parent = random_povm(dim, parent_out, rng)
    entries = np.empty((n_out, n_meas, parent_out))
    for k in range(n_meas):
        entries[:, k, :] = rng.dirichlet(np.ones(n_out), size=parent_out).T
    return apply_parent(parent, ResponseTable(entries, (n_out,) * n_meas))
