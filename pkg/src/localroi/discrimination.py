"""Local state-discrimination tasks and guessing-probability optimizers.

A task is a list of ensembles ``y`` chosen with prior ``q(y)``; ensemble
``y`` holds states ``rho_{b|y}`` on a multipartite space with weights
``q(b|y)``. Each party ``i`` holds a measurement set and the parties pool
their outcomes at the end.

Everything is computed from the weighted Born table::

    T[y, b, k_1..k_n, c_1..c_n] = q(y) q(b|y) tr[rho_{b|y} M^1_{c_1|k_1} (x) ... (x) M^n_{c_n|k_n}]

The success probability is multilinear in the independent strategy tables,
so its maximum sits at a deterministic strategy; the optimizers below are
nested maximizations over deterministic choices (cross-checked against
exhaustive enumeration in :mod:`localroi.oracle`).
"""

from __future__ import annotations

import logging
import math
import string
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np

from .config import DEFAULT_TOL, Tolerances, make_rng
from .conic import SdpProblem, inner, solve_sdp
from .errors import ShapeError, SolverError
from .incompatibility import RoiCertificate, compute_roi
from .linalg import as_hermitian, clip_psd, inv_sqrt, psd_residual, random_density
from .measurements import MeasurementSet, Povm, random_povm, string_count

__all__ = [
    "Ensemble",
    "DiscriminationTask",
    "LocalStrategy",
    "StrategyResult",
    "SeesawResult",
    "BoundReport",
    "weighted_born",
    "psg_fixed",
    "psg_best_lo",
    "psg_best_locc1",
    "psg_best_lo_n",
    "psg_parents",
    "psg_compatible_seesaw",
    "bound_report",
    "no_measurement_baseline",
    "random_task",
]

log = logging.getLogger(__name__)

LO = "LO"
LOCC1 = "LOCC1"


@dataclass(frozen=True)
class Ensemble:
    prior: float
    weights: np.ndarray
    states: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class DiscriminationTask:
    party_dims: tuple[int, ...]
    ensembles: tuple[Ensemble, ...]

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.party_dims)
        if not dims or min(dims) < 1:
            raise ShapeError("party_dims must be positive integers")
        object.__setattr__(self, "party_dims", dims)
        if not self.ensembles:
            raise ShapeError("a task needs at least one ensemble")
        total = math.prod(dims)
        ens = []
        for y, e in enumerate(self.ensembles):
            w = np.asarray(e.weights, dtype=float)
            if w.ndim != 1 or len(w) != len(e.states) or len(w) == 0:
                raise ShapeError(f"ensemble {y}: weights and states differ in length")
            if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ValueError(f"ensemble {y}: weights must be a probability vector")
            states = []
            for b, rho in enumerate(e.states):
                rho = as_hermitian(rho)
                if rho.shape[0] != total:
                    raise ShapeError(f"state ({y},{b}) has dim {rho.shape[0]}, expected {total}")
                if abs(np.trace(rho).real - 1.0) > 1e-8 or psd_residual(rho) < -1e-8:
                    raise ValueError(f"state ({y},{b}) is not a density matrix")
                rho.setflags(write=False)
                states.append(rho)
            w.setflags(write=False)
            ens.append(Ensemble(float(e.prior), w, tuple(states)))
        priors = np.array([e.prior for e in ens])
        if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-9:
            raise ValueError("ensemble priors must be a probability vector")
        object.__setattr__(self, "ensembles", tuple(ens))

    @classmethod
    def build(cls, party_dims: Sequence[int], priors: Sequence[float], ensembles: Sequence[tuple[Sequence[float], Sequence[np.ndarray]]]):
        """Convenience constructor: ``ensembles[y] = (weights, states)``."""
        return cls(
            tuple(party_dims),
            tuple(Ensemble(float(q), np.asarray(w, float), tuple(s)) for q, (w, s) in zip(priors, ensembles)),
        )

    @property
    def n_parties(self) -> int:
        return len(self.party_dims)

    @property
    def n_ensembles(self) -> int:
        return len(self.ensembles)

    @property
    def max_states(self) -> int:
        return max(len(e.states) for e in self.ensembles)

    @property
    def dim(self) -> int:
        return math.prod(self.party_dims)

    @property
    def priors(self) -> np.ndarray:
        return np.array([e.prior for e in self.ensembles])

    def joint_weights(self) -> np.ndarray:
        """``q(y) q(b|y)`` padded with zeros to shape (Y, max_states)."""
        out = np.zeros((self.n_ensembles, self.max_states))
        for y, e in enumerate(self.ensembles):
            out[y, : len(e.weights)] = e.prior * e.weights
        return out

    def padded_states(self) -> np.ndarray:
        out = np.zeros((self.n_ensembles, self.max_states, self.dim, self.dim), dtype=complex)
        for y, e in enumerate(self.ensembles):
            for b, rho in enumerate(e.states):
                out[y, b] = rho
        return out


@dataclass(frozen=True)
class LocalStrategy:
    """Conditional probability tables for one local protocol.

    ``choices[i]`` is ``p(k_i|y)`` with shape (Y, K_i); in ``LOCC1`` mode the
    second party's table is ``p(l|c, y)`` with shape (Y, C_1, K_2), where
    ``C_1`` is the first party's (padded) outcome count. ``guess`` is
    ``p(b|c_1..c_n, y)`` with shape (Y, C_1, ..., C_n, B).
    """

    mode: str
    choices: tuple[np.ndarray, ...]
    guess: np.ndarray

    def __post_init__(self) -> None:
        if self.mode not in (LO, LOCC1):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == LOCC1 and len(self.choices) != 2:
            raise ShapeError("LOCC1 strategies are defined for two parties")
        tables = tuple(np.asarray(c, dtype=float) for c in self.choices)
        guess = np.asarray(self.guess, dtype=float)
        for name, t in [*((f"choice[{i}]", t) for i, t in enumerate(tables)), ("guess", guess)]:
            if np.any(t < -1e-12) or np.max(np.abs(t.sum(axis=-1) - 1.0)) > 1e-9:
                raise ValueError(f"{name} is not row-stochastic")
        object.__setattr__(self, "choices", tables)
        object.__setattr__(self, "guess", guess)

    @property
    def choose_k(self) -> np.ndarray:
        return self.choices[0]

    @property
    def choose_l(self) -> np.ndarray:
        return self.choices[1]


class StrategyResult(NamedTuple):
    value: float
    strategy: LocalStrategy


def _check_sets(task: DiscriminationTask, sets: Sequence[MeasurementSet]) -> None:
    if len(sets) != task.n_parties:
        raise ShapeError(f"task has {task.n_parties} parties but {len(sets)} measurement sets were given")
    for i, (d, s) in enumerate(zip(task.party_dims, sets)):
        if s.dim != d:
            raise ShapeError(f"party {i}: set acts on dim {s.dim}, task expects {d}")


def _born(states: np.ndarray, dims: Sequence[int], effects: Sequence[np.ndarray]) -> np.ndarray:
    """``tr[rho (x)_i E_i[k_i, c_i]]`` for padded states (Y, B, D, D) and effects (K_i, C_i, d_i, d_i)."""
    n = len(dims)
    letters = iter(string.ascii_letters.replace("y", "").replace("b", ""))
    rows = [next(letters) for _ in range(n)]
    cols = [next(letters) for _ in range(n)]
    ks = [next(letters) for _ in range(n)]
    cs = [next(letters) for _ in range(n)]
    y, bb = states.shape[:2]
    rho = states.reshape((y, bb, *dims, *dims))
    subs = "yb" + "".join(rows) + "".join(cols)
    terms = [subs] + [ks[i] + cs[i] + cols[i] + rows[i] for i in range(n)]
    out = "yb" + "".join(ks) + "".join(cs)
    val = np.einsum(",".join(terms) + "->" + out, rho, *effects, optimize=True)
    if val.size and np.max(np.abs(val.imag)) > 1e-9:
        raise ValueError("Born probabilities have a large imaginary part")
    return val.real


def weighted_born(task: DiscriminationTask, sets: Sequence[MeasurementSet]) -> np.ndarray:
    """``T[y, b, k_1..k_n, c_1..c_n] = q(y) q(b|y) tr[rho_{b|y} (x)_i M^i_{c_i|k_i}]``."""
    _check_sets(task, sets)
    born = _born(task.padded_states(), task.party_dims, [s.padded_effects() for s in sets])
    q = task.joint_weights()
    return born * q.reshape(q.shape + (1,) * (born.ndim - 2))


def psg_fixed(task: DiscriminationTask, sets: Sequence[MeasurementSet], strategy: LocalStrategy) -> float:
    """Success probability of a fixed (possibly randomized) strategy."""
    T = weighted_born(task, sets)
    n = task.n_parties
    Y, B = T.shape[:2]
    ks = [s.n_meas for s in sets]
    cs = [s.max_outcomes for s in sets]
    if strategy.guess.shape != (Y, *cs, B):
        raise ShapeError(f"guess table shape {strategy.guess.shape} != {(Y, *cs, B)}")
    if strategy.mode == LO:
        for i, t in enumerate(strategy.choices):
            if t.shape != (Y, ks[i]):
                raise ShapeError(f"choice table {i} has shape {t.shape}, expected {(Y, ks[i])}")
        letters = string.ascii_lowercase.replace("y", "").replace("b", "")
        kl, cl = letters[:n], letters[n : 2 * n]
        subs = ["yb" + kl + cl] + [f"y{kl[i]}" for i in range(n)] + ["y" + cl + "b"]
        return float(np.einsum(",".join(subs) + "->", T, *strategy.choices, strategy.guess, optimize=True))
    if n != 2:
        raise ShapeError("LOCC1 is defined for two parties")
    pk, pl = strategy.choices
    if pk.shape != (Y, ks[0]) or pl.shape != (Y, cs[0], ks[1]):
        raise ShapeError("LOCC1 choice tables have the wrong shape")
    return float(np.einsum("ybklcd,yk,ycl,ycdb->", T, pk, pl, strategy.guess, optimize=True))


def _delta(index: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(index.shape + (size,))
    np.put_along_axis(out, index[..., None], 1.0, axis=-1)
    return out


def psg_best_lo_n(task: DiscriminationTask, sets: Sequence[MeasurementSet]) -> StrategyResult:
    """``sum_y max_{k_1..k_n} sum_{c_1..c_n} max_b T[y, b, k, c]`` with an optimal deterministic strategy."""
    T = weighted_born(task, sets)
    n = task.n_parties
    Y, B = T.shape[:2]
    ks = tuple(s.n_meas for s in sets)
    cs = tuple(s.max_outcomes for s in sets)
    best_b = T.max(axis=1)  # (Y, K..., C...)
    per_k = best_b.sum(axis=tuple(range(1 + n, 1 + 2 * n))).reshape(Y, -1)  # (Y, prod K)
    flat_k = per_k.argmax(axis=1)
    value = float(per_k.max(axis=1).sum())
    chosen = np.unravel_index(flat_k, ks)
    choices = tuple(_delta(chosen[i], ks[i]) for i in range(n))
    guess_idx = np.empty((Y, *cs), dtype=int)
    for y in range(Y):
        kidx = tuple(int(chosen[i][y]) for i in range(n))
        guess_idx[y] = T[(y, slice(None)) + kidx].argmax(axis=0)
    return StrategyResult(value, LocalStrategy(LO, choices, _delta(guess_idx, B)))


def psg_best_lo(task: DiscriminationTask, set_a: MeasurementSet, set_b: MeasurementSet) -> StrategyResult:
    return psg_best_lo_n(task, [set_a, set_b])


def psg_best_locc1(task: DiscriminationTask, set_a: MeasurementSet, set_b: MeasurementSet) -> StrategyResult:
    """One round of one-way communication from party 0 to party 1.

    ``sum_y max_k sum_c max_l sum_d max_b T[y, b, k, l, c, d]``.
    """
    T = weighted_born(task, [set_a, set_b])
    Y, B, K, L, C, D = T.shape
    per_cd = T.max(axis=1)  # (Y, K, L, C, D)
    per_lc = per_cd.sum(axis=-1)  # (Y, K, L, C)
    best_l = per_lc.argmax(axis=2)  # (Y, K, C)
    per_k = per_lc.max(axis=2).sum(axis=-1)  # (Y, K)
    k_star = per_k.argmax(axis=1)
    value = float(per_k.max(axis=1).sum())
    l_of_c = best_l[np.arange(Y), k_star]  # (Y, C)
    guess_idx = np.empty((Y, C, D), dtype=int)
    for y in range(Y):
        for c in range(C):
            guess_idx[y, c] = T[y, :, k_star[y], l_of_c[y, c], c, :].argmax(axis=0)
    strategy = LocalStrategy(LOCC1, (_delta(k_star, K), _delta(l_of_c, L)), _delta(guess_idx, B))
    return StrategyResult(value, strategy)


def no_measurement_baseline(task: DiscriminationTask) -> float:
    """``sum_y q(y) max_b q(b|y)``: guessing from the ensemble label alone."""
    return float(task.joint_weights().max(axis=1).sum())


def _parents_as_sets(parents: Sequence[Povm]) -> list[MeasurementSet]:
    return [MeasurementSet((p,)) for p in parents]


def psg_parents(task: DiscriminationTask, *parents: Povm) -> float:
    """Best post-processed success for one fixed parent per party.

    ``sum_{y, lam_1..lam_n} max_b q(y) q(b|y) tr[rho_{b|y} G^1_{lam_1} (x) ... (x) G^n_{lam_n}]``;
    the guess may depend on ``y`` (post-measurement information).
    """
    T = weighted_born(task, _parents_as_sets(parents))
    return float(T.max(axis=1).sum())


# --------------------------------------------------------------------------
# see-saw for the compatible baseline


@dataclass
class SeesawResult:
    value: float
    parents: tuple[Povm, ...]
    assignment: np.ndarray  # b = assignment[y, lam_1, ..., lam_n]
    history: list[float] = field(default_factory=list)
    restart_values: list[float] = field(default_factory=list)
    iterations: int = 0


def _parent_table(task: DiscriminationTask, parents: Sequence[Povm]) -> np.ndarray:
    """``T[y, b, lam_1..lam_n]`` for single-POVM parents."""
    T = weighted_born(task, _parents_as_sets(parents))
    n = len(parents)
    return T.reshape(T.shape[:2] + T.shape[2 + n :])


def _effective_operators(task: DiscriminationTask, parents: Sequence[Povm], assignment: np.ndarray, party: int) -> np.ndarray:
    """``A[lam]`` such that the objective equals ``sum_lam tr[G^party_lam A[lam]]`` for fixed assignment and other parents."""
    n = task.n_parties
    dims = task.party_dims
    Y, B = task.n_ensembles, task.max_states
    states = task.padded_states().reshape((Y, B, *dims, *dims))
    q = task.joint_weights()
    letters = iter(string.ascii_letters.replace("y", "").replace("b", ""))
    rows = [next(letters) for _ in range(n)]
    cols = [next(letters) for _ in range(n)]
    lams = [next(letters) for _ in range(n)]
    terms = ["yb" + "".join(rows) + "".join(cols)]
    ops = [states]
    for j in range(n):
        if j == party:
            continue
        terms.append(lams[j] + cols[j] + rows[j])
        ops.append(parents[j].as_array())
    others = [lams[j] for j in range(n) if j != party]
    # F[y, b, lam_{-i}, r_i, s_i]; objective term is tr[G F] = sum G[s, r] F[r, s]
    out = "yb" + "".join(others) + rows[party] + cols[party]
    F = np.einsum(",".join(terms) + "->" + out, *ops, optimize=True)
    F = F * q.reshape(Y, B, *([1] * (len(others) + 2)))
    n_lam = parents[party].n_outcomes
    d = dims[party]
    A = np.zeros((n_lam, d, d), dtype=complex)
    assign = np.moveaxis(assignment, 1 + party, 1)  # (Y, lam_i, lam_{-i}...)
    for lam in range(n_lam):
        b_idx = assign[:, lam]  # (Y, lam_{-i}...)
        gathered = np.take_along_axis(F, b_idx[:, None, ..., None, None], axis=1)[:, 0]
        A[lam] = gathered.reshape(-1, d, d).sum(axis=0)
    # F[r, s] contracts against G[s, r], i.e. tr[G F]; return the matrix M with tr[G M]
    return 0.5 * (A + np.conj(np.transpose(A, (0, 2, 1))))


def _best_povm(A: np.ndarray, tol: Tolerances) -> Povm | None:
    """``argmax sum_lam tr[G_lam A_lam]`` over POVMs (minimum-error type SDP)."""
    n_lam, d = A.shape[0], A.shape[1]
    p = SdpProblem("seesaw_step")
    G = [p.hermitian(f"G{i}", d) for i in range(n_lam)]
    p.add_eq(sum(G), np.eye(d))
    p.maximize(sum(inner(A[i], G[i]) for i in range(n_lam)))
    sol = solve_sdp(p, tol.solver_tol)
    if not sol.ok:
        return None
    effects = [clip_psd(sol.var_values[f"G{i}"]) for i in range(n_lam)]
    try:
        w = inv_sqrt(sum(effects))
    except np.linalg.LinAlgError:
        return None
    return Povm(tuple(w @ e @ w for e in effects))


def psg_compatible_seesaw(
    task: DiscriminationTask,
    parent_sizes: Sequence[int] | None = None,
    restarts: int = 10,
    seed: int = 0,
    max_iter: int = 200,
    rel_tol: float = 1e-9,
    tol: Tolerances = DEFAULT_TOL,
    sets: Sequence[MeasurementSet] | None = None,
) -> SeesawResult:
    """Feasible lower bound on the compatible-measurement success probability.

    Alternates: refresh the guess assignment by argmax, then re-optimize one
    parent at a time with the others fixed (an SDP). A step is kept only if
    it does not lower the value, so the recorded history is non-decreasing.
    Parent sizes default to the deterministic-string counts of ``sets``.
    """
    if parent_sizes is None:
        if sets is None:
            raise ValueError("give parent_sizes or the measurement sets to size the parents from")
        parent_sizes = [string_count(s.outcome_counts) for s in sets]
    parent_sizes = [int(m) for m in parent_sizes]
    if len(parent_sizes) != task.n_parties or min(parent_sizes) < 1:
        raise ShapeError("need one positive parent size per party")

    seeds = np.random.SeedSequence(seed).spawn(max(restarts, 1))
    best: SeesawResult | None = None
    restart_values = []
    for ss in seeds:
        rng = make_rng(ss)
        parents = [random_povm(d, m, rng) for d, m in zip(task.party_dims, parent_sizes)]
        table = _parent_table(task, parents)
        value = float(table.max(axis=1).sum())
        history = [value]
        it = 0
        for it in range(1, max_iter + 1):
            start = value
            for party in range(task.n_parties):
                assignment = table.argmax(axis=1)
                A = _effective_operators(task, parents, assignment, party)
                new = _best_povm(A, tol)
                if new is None:
                    continue
                trial = list(parents)
                trial[party] = new
                trial_table = _parent_table(task, trial)
                trial_value = float(trial_table.max(axis=1).sum())
                if trial_value >= value:
                    parents, table, value = trial, trial_table, trial_value
            history.append(value)
            if value - start <= rel_tol * max(abs(start), 1e-300):
                break
        result = SeesawResult(value, tuple(parents), table.argmax(axis=1), history, iterations=it)
        restart_values.append(value)
        if best is None or value > best.value:
            best = result
    assert best is not None
    best.restart_values = restart_values
    return best


# --------------------------------------------------------------------------
# bound report


@dataclass
class BoundReport:
    n_parties: int
    p_lo: float
    p_locc1: float | None
    rois: list[float]
    roi_gaps: list[float]
    proof_chain_value: float
    factor: float
    bound: float
    holds_lo: bool
    holds_locc1: bool | None
    compatible_lower_bound: float
    seesaw_value: float | None
    ratio: float
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)


def bound_report(
    task: DiscriminationTask,
    sets: Sequence[MeasurementSet],
    certs: Sequence[RoiCertificate] | None = None,
    restarts: int = 0,
    seed: int = 0,
    tol: Tolerances = DEFAULT_TOL,
    slack: float = 1e-7,
) -> BoundReport:
    """Check ``P_I <= prod_i (1 + I_i) * psg_parents(G*_1, ..., G*_n)`` along the proof chain.

    ``G*_i`` are the normalized primal-optimal parents. ``ratio`` divides the
    LO value by the best known compatible value (the proof-chain parents and,
    when ``restarts > 0``, the see-saw); it is informational only.
    """
    _check_sets(task, sets)
    if certs is None:
        certs = [compute_roi(s, tol) for s in sets]
    p_lo = psg_best_lo_n(task, sets).value
    p_locc1 = psg_best_locc1(task, sets[0], sets[1]).value if task.n_parties == 2 else None
    parents = [c.parent_povm() for c in certs]
    chain = psg_parents(task, *parents)
    factor = math.prod(c.primal_scale for c in certs)
    bound = factor * chain
    holds_lo = p_lo <= bound + slack
    holds_locc1 = None if p_locc1 is None else p_locc1 <= bound + slack
    seesaw_value = None
    if restarts > 0:
        seesaw_value = psg_compatible_seesaw(task, restarts=restarts, seed=seed, tol=tol, sets=sets).value
    pc = max(chain, seesaw_value or 0.0)
    return BoundReport(
        n_parties=task.n_parties,
        p_lo=p_lo,
        p_locc1=p_locc1,
        rois=[c.roi for c in certs],
        roi_gaps=[c.gap for c in certs],
        proof_chain_value=chain,
        factor=factor,
        bound=bound,
        holds_lo=holds_lo,
        holds_locc1=holds_locc1,
        compatible_lower_bound=pc,
        seesaw_value=seesaw_value,
        ratio=p_lo / pc if pc > 0 else math.inf,
        passed=bool(holds_lo and (holds_locc1 is not False)),
    )


def random_task(
    party_dims: Sequence[int], n_ensembles: int, n_states: int, seed: int, rank: int | None = None
) -> DiscriminationTask:
    """Random priors (flat Dirichlet) and random mixed states (Ginibre) on the joint space."""
    rng = make_rng(seed)
    dim = math.prod(party_dims)
    priors = rng.dirichlet(np.ones(n_ensembles))
    ensembles = []
    for _ in range(n_ensembles):
        w = rng.dirichlet(np.ones(n_states))
        ensembles.append((w, [random_density(dim, rng, rank) for _ in range(n_states)]))
    return DiscriminationTask.build(party_dims, priors, ensembles)
