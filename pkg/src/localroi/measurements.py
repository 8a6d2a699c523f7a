"""POVMs, measurement sets, post-processing tables and product constructions.

Indices are dense and 0-based. Composite labels are packed row-major:
the pair ``(i, j)`` with ``j`` ranging over ``n_j`` values becomes
``i * n_j + j`` (see :func:`encode_pair` / :func:`decode_pair`).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .config import DEFAULT_TOL, Tolerances, make_rng
from .errors import GenerationError, ResourceError, ShapeError
from .linalg import as_hermitian, inv_sqrt, kron, psd_residual

__all__ = [
    "Povm",
    "MeasurementSet",
    "ResponseTable",
    "DeterministicResponse",
    "Violation",
    "encode_pair",
    "decode_pair",
    "validate_set",
    "deterministic_strings",
    "string_count",
    "deterministic_mixture",
    "tensor_sets",
    "apply_parent",
    "random_povm",
    "random_set",
    "trivial_povm",
    "projective_povm",
]


def encode_pair(i: int, j: int, n_j: int) -> int:
    return i * n_j + j


def decode_pair(index: int, n_j: int) -> tuple[int, int]:
    return divmod(index, n_j)


@dataclass(frozen=True)
class Povm:
    effects: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.effects) == 0:
            raise ShapeError("a POVM needs at least one outcome")
        effects = tuple(as_hermitian(e) for e in self.effects)
        dims = {e.shape[0] for e in effects}
        if len(dims) != 1:
            raise ShapeError(f"effects have mismatched dimensions {sorted(dims)}")
        for e in effects:
            e.setflags(write=False)
        object.__setattr__(self, "effects", effects)

    @classmethod
    def of(cls, effects: Sequence[np.ndarray]) -> "Povm":
        return cls(tuple(effects))

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    def __len__(self) -> int:
        return len(self.effects)

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.effects)

    def __getitem__(self, c: int) -> np.ndarray:
        return self.effects[c]

    def as_array(self) -> np.ndarray:
        return np.stack(self.effects)


@dataclass(frozen=True)
class MeasurementSet:
    povms: tuple[Povm, ...]

    def __post_init__(self) -> None:
        povms = tuple(p if isinstance(p, Povm) else Povm.of(p) for p in self.povms)
        if not povms:
            raise ShapeError("a measurement set needs at least one POVM")
        dims = {p.dim for p in povms}
        if len(dims) != 1:
            raise ShapeError(f"POVMs act on different dimensions {sorted(dims)}")
        object.__setattr__(self, "povms", povms)

    @classmethod
    def of(cls, povms: Sequence[Sequence[np.ndarray] | Povm]) -> "MeasurementSet":
        return cls(tuple(p if isinstance(p, Povm) else Povm.of(p) for p in povms))

    @property
    def dim(self) -> int:
        return self.povms[0].dim

    @property
    def n_meas(self) -> int:
        return len(self.povms)

    @property
    def outcome_counts(self) -> tuple[int, ...]:
        return tuple(p.n_outcomes for p in self.povms)

    @property
    def max_outcomes(self) -> int:
        return max(self.outcome_counts)

    def __len__(self) -> int:
        return len(self.povms)

    def __iter__(self) -> Iterator[Povm]:
        return iter(self.povms)

    def __getitem__(self, k: int) -> Povm:
        return self.povms[k]

    def effect(self, c: int, k: int) -> np.ndarray:
        return self.povms[k].effects[c]

    def padded_effects(self) -> np.ndarray:
        """Array ``E[k, c]`` of shape (n_meas, max_outcomes, dim, dim); missing outcomes are zero."""
        out = np.zeros((self.n_meas, self.max_outcomes, self.dim, self.dim), dtype=complex)
        for k, povm in enumerate(self.povms):
            out[k, : povm.n_outcomes] = povm.as_array()
        return out


@dataclass(frozen=True)
class ResponseTable:
    """Post-processing ``p(c|k, lam)`` stored as ``entries[c, k, lam]``.

    Measurements with fewer than ``max(outcome_counts)`` outcomes are padded
    with zero rows.
    """

    entries: np.ndarray
    outcome_counts: tuple[int, ...]

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 3:
            raise ShapeError("response table must be 3-dimensional (c, k, lambda)")
        counts = tuple(int(n) for n in self.outcome_counts)
        if entries.shape[1] != len(counts) or entries.shape[0] < max(counts):
            raise ShapeError(f"response table shape {entries.shape} inconsistent with outcome counts {counts}")
        for k, n in enumerate(counts):
            if np.any(entries[n:, k, :] != 0):
                raise ShapeError(f"measurement {k} has weight on padded outcomes")
        if np.any(entries < -1e-12) or np.any(entries > 1 + 1e-12):
            raise ValueError("response probabilities must lie in [0, 1]")
        sums = entries.sum(axis=0)
        if np.max(np.abs(sums - 1.0)) > 1e-9:
            raise ValueError("response table is not normalized over outcomes")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "outcome_counts", counts)

    @property
    def n_parent(self) -> int:
        return self.entries.shape[2]

    @classmethod
    def from_strings(cls, strings: "DeterministicResponse") -> "ResponseTable":
        """Deterministic response ``p(c|k, string) = D(string, c, k)``."""
        table = strings.table()  # [string, k, c]
        return cls(np.transpose(table, (2, 1, 0)).astype(float), strings.outcome_counts)


@dataclass(frozen=True)
class DeterministicResponse:
    """All outcome strings ``(c_0, ..., c_{n-1})`` in lexicographic order."""

    outcome_counts: tuple[int, ...]
    strings: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.strings)

    def value(self, index: int, c: int, k: int) -> int:
        """``D(string, c, k)``: 1 iff the string assigns outcome ``c`` to measurement ``k``."""
        return int(self.strings[index][k] == c)

    def table(self) -> np.ndarray:
        """0/1 array ``D[string, k, c]`` (padded to the largest outcome count)."""
        arr = np.zeros((len(self.strings), len(self.outcome_counts), max(self.outcome_counts)), dtype=np.int8)
        idx = np.asarray(self.strings, dtype=int).reshape(len(self.strings), len(self.outcome_counts))
        for k in range(len(self.outcome_counts)):
            arr[np.arange(len(self.strings)), k, idx[:, k]] = 1
        return arr

    def members(self, c: int, k: int) -> list[int]:
        return [i for i, s in enumerate(self.strings) if s[k] == c]


@dataclass(frozen=True)
class Violation:
    kind: str  # "psd" | "completeness"
    povm: int
    outcome: int | None
    residual: float


def validate_set(s: MeasurementSet, tol: Tolerances = DEFAULT_TOL) -> list[Violation]:
    """Check positivity of every effect and completeness of every POVM.

    Returns an empty list when the set is valid; never raises for invalid
    numerical content.
    """
    report: list[Violation] = []
    eye = np.eye(s.dim)
    for k, povm in enumerate(s.povms):
        for c, effect in enumerate(povm.effects):
            r = psd_residual(effect)
            if r < -tol.psd_tol:
                report.append(Violation("psd", k, c, r))
        dev = float(np.max(np.abs(sum(povm.effects) - eye)))
        if dev > tol.eq_tol:
            report.append(Violation("completeness", k, None, dev))
    return report


def string_count(outcome_counts: Sequence[int]) -> int:
    return math.prod(outcome_counts)


def deterministic_strings(s: MeasurementSet | Sequence[int], cap: int = DEFAULT_TOL.string_cap) -> DeterministicResponse:
    counts = s.outcome_counts if isinstance(s, MeasurementSet) else tuple(int(n) for n in s)
    n = string_count(counts)
    if n > cap:
        raise ResourceError(f"{n} deterministic strings exceed the cap of {cap}")
    strings = tuple(itertools.product(*(range(m) for m in counts)))
    return DeterministicResponse(counts, strings)


def deterministic_mixture(cond: np.ndarray, outcome_counts: Sequence[int]) -> np.ndarray:
    """Weights ``p(string)`` with ``sum_string p(string) D(string, c, k) = cond[k, c]``.

    Uses the product decomposition ``p(string) = prod_k cond[k, string_k]``;
    ``cond[k, :]`` must be a distribution over the outcomes of measurement k.
    """
    strings = deterministic_strings(outcome_counts).strings
    weights = np.ones(len(strings))
    for i, st in enumerate(strings):
        for k, c in enumerate(st):
            weights[i] *= cond[k, c]
    return weights


def tensor_sets(a: MeasurementSet, b: MeasurementSet) -> MeasurementSet:
    """Product set ``{M_k (x) N_l}`` indexed by ``k * n_b + l`` with outcomes ``c * |N_l| + d``."""
    povms = []
    for pa in a.povms:
        for pb in b.povms:
            povms.append(Povm(tuple(kron(ea, eb) for ea in pa.effects for eb in pb.effects)))
    return MeasurementSet(tuple(povms))


def apply_parent(parent: Povm, r: ResponseTable) -> MeasurementSet:
    """``M_{c|k} = sum_lam p(c|k, lam) G_lam``."""
    if r.n_parent != parent.n_outcomes:
        raise ShapeError(f"response table has {r.n_parent} parent outcomes, parent POVM has {parent.n_outcomes}")
    g = parent.as_array()
    povms = []
    for k, n_c in enumerate(r.outcome_counts):
        effects = np.einsum("cl,lij->cij", r.entries[:n_c, k, :], g)
        povms.append(Povm(tuple(effects)))
    return MeasurementSet(tuple(povms))


def random_povm(dim: int, n_out: int, rng: np.random.Generator, attempts: int = 10) -> Povm:
    """Gaussian PSD factors ``G G^dagger`` whitened by the inverse square root of their sum."""
    for _ in range(attempts):
        g = rng.standard_normal((n_out, dim, dim)) + 1j * rng.standard_normal((n_out, dim, dim))
        raw = g @ np.conj(np.transpose(g, (0, 2, 1)))
        try:
            w = inv_sqrt(raw.sum(axis=0))
        except np.linalg.LinAlgError:
            continue
        effects = w @ raw @ w
        return Povm(tuple(0.5 * (e + e.conj().T) for e in effects))
    raise GenerationError(f"could not draw a well-conditioned POVM in {attempts} attempts")


def random_set(dim: int, n_meas: int, n_out: int, seed: int) -> MeasurementSet:
    if min(dim, n_meas, n_out) < 1:
        raise ValueError("dim, n_meas and n_out must be positive")
    rng = make_rng(seed)
    return MeasurementSet(tuple(random_povm(dim, n_out, rng) for _ in range(n_meas)))


def trivial_povm(dim: int) -> Povm:
    return Povm((np.eye(dim, dtype=complex),))


def projective_povm(observable: np.ndarray) -> Povm:
    """Spectral projectors of a Hermitian observable, ordered by descending eigenvalue."""
    w, v = np.linalg.eigh(as_hermitian(observable))
    effects = []
    for val in sorted(set(np.round(w, 10)), reverse=True):
        cols = v[:, np.isclose(w, val, atol=1e-10)]
        effects.append(cols @ cols.conj().T)
    return Povm(tuple(effects))
