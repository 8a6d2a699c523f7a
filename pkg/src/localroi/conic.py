"""Small SDP modelling layer over Hermitian matrix variables, solved with Clarabel.

Model
-----
Variables are complex Hermitian matrices (optionally constrained PSD) and
real scalars. Affine matrix expressions are

    sum_V a_V * V  +  sum_s s * C_s  +  K          (a_V real, C_s and K Hermitian)

and affine scalar expressions are ``sum_V tr[C_V V] + sum_s b_s s + k``.
Constraints are ``expr == 0`` (matrix or scalar) and ``expr >> 0``.

Lowering
--------
A Hermitian ``n x n`` variable is stored as ``n**2`` reals: the diagonal,
then the real parts of the strict upper triangle (row-major), then the
imaginary parts in the same order (:func:`hermitian_params`).

A complex PSD constraint ``H >> 0`` becomes the real constraint
``[[Re H, -Im H], [Im H, Re H]] >> 0`` of size ``2n`` (:func:`real_embedding`);
the embedded matrix has the spectrum of ``H`` with every eigenvalue doubled.
It is handed to Clarabel's ``PSDTriangleConeT`` in ``svec`` form: upper
triangle, column-major, off-diagonal entries scaled by ``sqrt(2)``
(:func:`svec`).

Solutions are always re-checked by :func:`verify_solution`, which evaluates
every constraint from the returned matrices with plain numpy and knows
nothing about the backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Mapping

import clarabel
import numpy as np
import scipy.sparse as sp

from .config import DEFAULT_TOL
from .errors import ShapeError
from .linalg import matrix_from_json, matrix_to_json, psd_residual

__all__ = [
    "MatExpr",
    "LinExpr",
    "HermVar",
    "ScalarVar",
    "inner",
    "SdpProblem",
    "SdpSolution",
    "ResidualReport",
    "solve_sdp",
    "verify_solution",
    "hermitian_params",
    "hermitian_from_params",
    "real_embedding",
    "svec",
]


# --------------------------------------------------------------------------
# lowering primitives


def real_embedding(h: np.ndarray) -> np.ndarray:
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def svec(s: np.ndarray) -> np.ndarray:
    """Upper triangle of a symmetric matrix, column-major, off-diagonals times sqrt(2)."""
    m = s.shape[0]
    rows, cols = _triu_colmajor(m)
    scale = np.where(rows == cols, 1.0, math.sqrt(2.0))
    return s[rows, cols] * scale


@lru_cache(maxsize=None)
def _triu_colmajor(m: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = [], []
    for j in range(m):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    return np.array(rows), np.array(cols)


@lru_cache(maxsize=None)
def _upper_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    iu = np.triu_indices(n, k=1)
    return iu[0], iu[1]


def hermitian_params(h: np.ndarray) -> np.ndarray:
    n = h.shape[0]
    i, j = _upper_pairs(n)
    return np.concatenate([np.diag(h).real, h[i, j].real, h[i, j].imag])


@lru_cache(maxsize=None)
def _hermitian_basis(n: int) -> np.ndarray:
    """Array ``E[p]`` with ``H = sum_p hermitian_params(H)[p] * E[p]``."""
    basis = np.zeros((n * n, n, n), dtype=complex)
    for d in range(n):
        basis[d, d, d] = 1.0
    iu, ju = _upper_pairs(n)
    off = len(iu)
    for t, (i, j) in enumerate(zip(iu, ju)):
        basis[n + t, i, j] = basis[n + t, j, i] = 1.0
        basis[n + off + t, i, j] = 1j
        basis[n + off + t, j, i] = -1j
    basis.setflags(write=False)
    return basis


def hermitian_from_params(x: np.ndarray, n: int) -> np.ndarray:
    return np.tensordot(x, _hermitian_basis(n), axes=1)


@lru_cache(maxsize=None)
def _svec_embed_map(n: int) -> np.ndarray:
    """Dense matrix sending hermitian_params(H) to svec(real_embedding(H))."""
    basis = _hermitian_basis(n)
    cols = [svec(real_embedding(basis[p])) for p in range(n * n)]
    out = np.stack(cols, axis=1)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _trace_weights(n: int) -> np.ndarray:
    # tr[C E_p] = weights[p] * hermitian_params(C)[p]
    w = np.ones(n * n)
    w[n:] = 2.0
    return w


# --------------------------------------------------------------------------
# expressions


class MatExpr:
    """Affine Hermitian-matrix-valued expression."""

    __array_ufunc__ = None  # make ndarray (op) MatExpr defer to our reflected operators

    def __init__(self, dim: int, var_terms=None, scalar_terms=None, const=None):
        self.dim = int(dim)
        self.var_terms: dict[str, float] = dict(var_terms or {})
        self.scalar_terms: dict[str, np.ndarray] = dict(scalar_terms or {})
        self.const = np.zeros((dim, dim), dtype=complex) if const is None else np.asarray(const, dtype=complex)
        if self.const.shape != (self.dim, self.dim):
            raise ShapeError(f"constant has shape {self.const.shape}, expected {(self.dim, self.dim)}")

    def _coerce(self, other) -> "MatExpr":
        if isinstance(other, MatExpr):
            if other.dim != self.dim:
                raise ShapeError(f"cannot combine {self.dim}x{self.dim} and {other.dim}x{other.dim} expressions")
            return other
        if isinstance(other, (int, float)) and other == 0:
            return MatExpr(self.dim)
        arr = np.asarray(other, dtype=complex)
        return MatExpr(self.dim, const=arr)

    def __add__(self, other) -> "MatExpr":
        o = self._coerce(other)
        vt = dict(self.var_terms)
        for k, v in o.var_terms.items():
            vt[k] = vt.get(k, 0.0) + v
        st = dict(self.scalar_terms)
        for k, v in o.scalar_terms.items():
            st[k] = st.get(k, 0.0) + v
        return MatExpr(self.dim, vt, st, self.const + o.const)

    __radd__ = __add__

    def __neg__(self) -> "MatExpr":
        return self * -1.0

    def __sub__(self, other) -> "MatExpr":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "MatExpr":
        return (-self) + other

    def __mul__(self, a) -> "MatExpr":
        if not isinstance(a, (int, float, np.floating, np.integer)):
            return NotImplemented
        a = float(a)
        return MatExpr(
            self.dim,
            {k: a * v for k, v in self.var_terms.items()},
            {k: a * v for k, v in self.scalar_terms.items()},
            a * self.const,
        )

    __rmul__ = __mul__

    def evaluate(self, values: Mapping[str, Any]) -> np.ndarray:
        out = self.const.copy()
        for name, a in self.var_terms.items():
            out = out + a * _lookup(values, name)
        for name, c in self.scalar_terms.items():
            out = out + float(_lookup(values, name)) * c
        return out

    def variables(self) -> set[str]:
        return set(self.var_terms) | set(self.scalar_terms)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "var_terms": {k: float(v) for k, v in sorted(self.var_terms.items())},
            "scalar_terms": {k: matrix_to_json(v) for k, v in sorted(self.scalar_terms.items())},
            "const": matrix_to_json(self.const),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MatExpr":
        return cls(
            obj["dim"],
            {k: float(v) for k, v in obj["var_terms"].items()},
            {k: matrix_from_json(v, None) for k, v in obj["scalar_terms"].items()},
            matrix_from_json(obj["const"], None),
        )


class LinExpr:
    """Affine real scalar expression ``sum tr[C_V V] + sum b_s s + k``."""

    __array_ufunc__ = None

    def __init__(self, var_terms=None, scalar_terms=None, const: float = 0.0):
        self.var_terms: dict[str, np.ndarray] = dict(var_terms or {})
        self.scalar_terms: dict[str, float] = dict(scalar_terms or {})
        self.const = float(const)

    @staticmethod
    def _coerce(other) -> "LinExpr":
        if isinstance(other, LinExpr):
            return other
        return LinExpr(const=float(other))

    def __add__(self, other) -> "LinExpr":
        o = self._coerce(other)
        vt = dict(self.var_terms)
        for k, v in o.var_terms.items():
            vt[k] = vt[k] + v if k in vt else v
        st = dict(self.scalar_terms)
        for k, v in o.scalar_terms.items():
            st[k] = st.get(k, 0.0) + v
        return LinExpr(vt, st, self.const + o.const)

    __radd__ = __add__

    def __neg__(self) -> "LinExpr":
        return self * -1.0

    def __sub__(self, other) -> "LinExpr":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "LinExpr":
        return (-self) + other

    def __mul__(self, a):
        if isinstance(a, np.ndarray):
            # (scalar expression) * constant matrix -> matrix expression
            if self.var_terms:
                raise TypeError("only scalar-variable expressions can scale a matrix")
            a = np.asarray(a, dtype=complex)
            return MatExpr(a.shape[0], scalar_terms={k: v * a for k, v in self.scalar_terms.items()}, const=self.const * a)
        if not isinstance(a, (int, float, np.floating, np.integer)):
            return NotImplemented
        a = float(a)
        return LinExpr(
            {k: a * v for k, v in self.var_terms.items()},
            {k: a * v for k, v in self.scalar_terms.items()},
            a * self.const,
        )

    __rmul__ = __mul__

    def evaluate(self, values: Mapping[str, Any]) -> float:
        out = self.const
        for name, c in self.var_terms.items():
            out += float(np.sum(c * np.asarray(_lookup(values, name)).T).real)
        for name, b in self.scalar_terms.items():
            out += b * float(_lookup(values, name))
        return out

    def variables(self) -> set[str]:
        return set(self.var_terms) | set(self.scalar_terms)

    def to_json(self) -> dict:
        return {
            "var_terms": {k: matrix_to_json(v) for k, v in sorted(self.var_terms.items())},
            "scalar_terms": {k: float(v) for k, v in sorted(self.scalar_terms.items())},
            "const": self.const,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LinExpr":
        return cls(
            {k: matrix_from_json(v, None) for k, v in obj["var_terms"].items()},
            {k: float(v) for k, v in obj["scalar_terms"].items()},
            float(obj["const"]),
        )


class HermVar(MatExpr):
    def __init__(self, name: str, dim: int, psd: bool = True):
        super().__init__(dim, {name: 1.0})
        self.name = name
        self.psd = psd


class ScalarVar(LinExpr):
    def __init__(self, name: str):
        super().__init__(scalar_terms={name: 1.0})
        self.name = name


def inner(c: np.ndarray, expr: MatExpr) -> LinExpr:
    """``tr[c * expr]`` as a scalar expression."""
    c = np.asarray(c, dtype=complex)
    if c.shape != (expr.dim, expr.dim):
        raise ShapeError(f"coefficient shape {c.shape} does not match expression dim {expr.dim}")
    var_terms = {k: a * c for k, a in expr.var_terms.items()}
    scalar_terms = {k: float(np.sum(c * m.T).real) for k, m in expr.scalar_terms.items()}
    return LinExpr(var_terms, scalar_terms, float(np.sum(c * expr.const.T).real))


def _lookup(values: Mapping[str, Any], name: str):
    try:
        return values[name]
    except KeyError:
        raise ValueError(f"missing value for variable {name!r}") from None


# --------------------------------------------------------------------------
# problem


class SdpProblem:
    """Builder for a linear SDP over Hermitian and scalar variables."""

    def __init__(self, name: str = "sdp"):
        self.name = name
        self.herm_vars: dict[str, HermVar] = {}
        self.scalar_vars: dict[str, ScalarVar] = {}
        self.objective: LinExpr = LinExpr()
        self.sense: str = "min"
        self.eq_constraints: list[MatExpr | LinExpr] = []
        self.psd_constraints: list[MatExpr] = []

    def hermitian(self, name: str, dim: int, psd: bool = True) -> HermVar:
        self._check_new(name)
        v = HermVar(name, dim, psd)
        self.herm_vars[name] = v
        return v

    def scalar(self, name: str) -> ScalarVar:
        self._check_new(name)
        v = ScalarVar(name)
        self.scalar_vars[name] = v
        return v

    def _check_new(self, name: str) -> None:
        if name in self.herm_vars or name in self.scalar_vars:
            raise ValueError(f"variable {name!r} already declared")

    def _check_refs(self, expr: MatExpr | LinExpr) -> None:
        unknown = expr.variables() - set(self.herm_vars) - set(self.scalar_vars)
        if unknown:
            raise ValueError(f"expression references undeclared variables {sorted(unknown)}")
        for name in set(expr.var_terms) & set(self.herm_vars):
            if isinstance(expr, MatExpr) and self.herm_vars[name].dim != expr.dim:
                raise ShapeError(f"variable {name!r} has dim {self.herm_vars[name].dim}, expression has {expr.dim}")
            if isinstance(expr, LinExpr) and expr.var_terms[name].shape[0] != self.herm_vars[name].dim:
                raise ShapeError(f"coefficient for {name!r} has wrong dimension")

    def add_eq(self, lhs: MatExpr | LinExpr, rhs: Any = 0) -> None:
        expr = lhs - rhs
        self._check_refs(expr)
        self.eq_constraints.append(expr)

    def add_psd(self, expr: MatExpr) -> None:
        self._check_refs(expr)
        self.psd_constraints.append(expr)

    def minimize(self, expr: LinExpr) -> None:
        self._check_refs(expr)
        self.objective, self.sense = expr, "min"

    def maximize(self, expr: LinExpr) -> None:
        self._check_refs(expr)
        self.objective, self.sense = expr, "max"

    @property
    def n_unknowns(self) -> int:
        return sum(v.dim**2 for v in self.herm_vars.values()) + len(self.scalar_vars)

    # -- sdp_dump.v1 --------------------------------------------------------

    def to_json(self) -> dict:
        def con(e):
            return {"kind": "matrix", **e.to_json()} if isinstance(e, MatExpr) else {"kind": "scalar", **e.to_json()}

        return {
            "schema": "sdp_dump.v1",
            "name": self.name,
            "sense": self.sense,
            "hermitian_vars": [{"name": v.name, "dim": v.dim, "psd": v.psd} for v in self.herm_vars.values()],
            "scalar_vars": list(self.scalar_vars),
            "objective": self.objective.to_json(),
            "eq_constraints": [con(e) for e in self.eq_constraints],
            "psd_constraints": [e.to_json() for e in self.psd_constraints],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SdpProblem":
        p = cls(obj.get("name", "sdp"))
        for v in obj["hermitian_vars"]:
            p.hermitian(v["name"], v["dim"], v["psd"])
        for name in obj["scalar_vars"]:
            p.scalar(name)
        for e in obj["eq_constraints"]:
            p.add_eq(MatExpr.from_json(e) if e["kind"] == "matrix" else LinExpr.from_json(e))
        for e in obj["psd_constraints"]:
            p.add_psd(MatExpr.from_json(e))
        obj_expr = LinExpr.from_json(obj["objective"])
        (p.minimize if obj["sense"] == "min" else p.maximize)(obj_expr)
        return p


@dataclass
class ResidualReport:
    max_eq_residual: float
    min_psd_residual: float
    objective: float
    objective_mismatch: float

    def within(self, tol: float) -> bool:
        return self.max_eq_residual <= tol and self.min_psd_residual >= -tol and self.objective_mismatch <= tol * max(
            1.0, abs(self.objective)
        )


@dataclass
class SdpSolution:
    status: str  # optimal | inaccurate | infeasible | failed
    objective_value: float
    var_values: dict[str, Any] = field(default_factory=dict)
    message: str = ""
    residuals: ResidualReport | None = None

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "inaccurate")


# --------------------------------------------------------------------------
# solve / verify


class _Triplets:
    def __init__(self) -> None:
        self.rows: list[np.ndarray] = []
        self.cols: list[np.ndarray] = []
        self.vals: list[np.ndarray] = []

    def add_dense(self, r0: int, c0: int, block: np.ndarray) -> None:
        r, c = np.nonzero(block)
        self.rows.append(r + r0)
        self.cols.append(c + c0)
        self.vals.append(block[r, c])

    def add_identity(self, r0: int, c0: int, m: int, a: float) -> None:
        idx = np.arange(m)
        self.rows.append(idx + r0)
        self.cols.append(idx + c0)
        self.vals.append(np.full(m, a))

    def build(self, shape: tuple[int, int]) -> sp.csc_matrix:
        if not self.rows:
            return sp.csc_matrix(shape)
        # duplicates are summed by the COO -> CSC conversion
        return sp.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))), shape=shape
        ).tocsc()


def _lower(p: SdpProblem):
    offsets: dict[str, int] = {}
    pos = 0
    for v in p.herm_vars.values():
        offsets[v.name] = pos
        pos += v.dim**2
    for name in p.scalar_vars:
        offsets[name] = pos
        pos += 1
    nx = pos

    q = np.zeros(nx)
    for name, c in p.objective.var_terms.items():
        n = p.herm_vars[name].dim
        q[offsets[name] : offsets[name] + n * n] += _trace_weights(n) * hermitian_params(c)
    for name, b in p.objective.scalar_terms.items():
        q[offsets[name]] += b
    if p.sense == "max":
        q = -q

    trip = _Triplets()
    bs: list[np.ndarray] = []
    row = 0
    for e in p.eq_constraints:
        if isinstance(e, MatExpr):
            m = e.dim * e.dim
            for name, a in e.var_terms.items():
                trip.add_identity(row, offsets[name], m, a)
            for name, c in e.scalar_terms.items():
                trip.add_dense(row, offsets[name], hermitian_params(c).reshape(-1, 1))
            bs.append(-hermitian_params(e.const))
            row += m
        else:
            for name, c in e.var_terms.items():
                n = p.herm_vars[name].dim
                trip.add_dense(row, offsets[name], (_trace_weights(n) * hermitian_params(c)).reshape(1, -1))
            for name, b in e.scalar_terms.items():
                trip.add_dense(row, offsets[name], np.array([[b]]))
            bs.append(np.array([-e.const]))
            row += 1
    n_zero = row

    cones = [clarabel.ZeroConeT(n_zero)] if n_zero else []
    psd_exprs = [v for v in p.herm_vars.values() if v.psd] + list(p.psd_constraints)
    for e in psd_exprs:
        t = _svec_embed_map(e.dim)
        for name, a in e.var_terms.items():
            trip.add_dense(row, offsets[name], -a * t)
        for name, c in e.scalar_terms.items():
            trip.add_dense(row, offsets[name], -svec(real_embedding(c)).reshape(-1, 1))
        bs.append(svec(real_embedding(e.const)))
        cones.append(clarabel.PSDTriangleConeT(2 * e.dim))
        row += t.shape[0]

    A = trip.build((row, nx))
    b = np.concatenate(bs) if bs else np.zeros(0)
    return offsets, nx, q, A, b, cones


_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "inaccurate",
    "PrimalInfeasible": "infeasible",
    "DualInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "AlmostDualInfeasible": "infeasible",
}


def solve_sdp(p: SdpProblem, solver_tol: float = DEFAULT_TOL.solver_tol, max_iter: int = 200) -> SdpSolution:
    """Solve with Clarabel, then re-verify.

    An ``optimal`` backend answer whose recomputed residuals exceed
    ``10 * solver_tol`` is downgraded to ``inaccurate``.
    """
    offsets, nx, q, A, b, cones = _lower(p)
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = solver_tol
    settings.tol_gap_rel = solver_tol
    settings.tol_feas = solver_tol
    settings.tol_ktratio = min(settings.tol_ktratio, solver_tol * 1e2)
    try:
        solver = clarabel.DefaultSolver(sp.csc_matrix((nx, nx)), q, A, b, cones, settings)
        res = solver.solve()
    except Exception as exc:  # backend raises plain exceptions (PanicException, ValueError)
        return SdpSolution("failed", float("nan"), message=f"backend error: {exc}")

    status_name = str(res.status).split(".")[-1]
    status = _STATUS.get(status_name, "failed")
    if status in ("infeasible", "failed"):
        return SdpSolution(status, float("nan"), message=f"clarabel status {status_name}")

    x = np.asarray(res.x)
    values: dict[str, Any] = {}
    for v in p.herm_vars.values():
        o = offsets[v.name]
        values[v.name] = hermitian_from_params(x[o : o + v.dim**2], v.dim)
    for name in p.scalar_vars:
        values[name] = float(x[offsets[name]])
    obj = p.objective.evaluate(values)
    sol = SdpSolution(status, obj, values, message=f"clarabel status {status_name}")
    sol.residuals = verify_solution(p, sol)
    if sol.status == "optimal" and not sol.residuals.within(10 * solver_tol):
        sol.status = "inaccurate"
    return sol


def verify_solution(p: SdpProblem, s: SdpSolution) -> ResidualReport:
    """Recompute every residual from the solution matrices.

    Equality residual is the largest absolute entry over all equality
    constraints; the PSD residual is the smallest eigenvalue over all PSD
    variables and constraints.
    """
    values = s.var_values
    for name in list(p.herm_vars) + list(p.scalar_vars):
        _lookup(values, name)
    eq = 0.0
    for e in p.eq_constraints:
        r = e.evaluate(values)
        eq = max(eq, float(np.max(np.abs(r))))
    psd = math.inf
    for v in p.herm_vars.values():
        if v.psd:
            psd = min(psd, psd_residual(np.asarray(values[v.name])))
    for e in p.psd_constraints:
        psd = min(psd, psd_residual(e.evaluate(values)))
    obj = p.objective.evaluate(values)
    mismatch = abs(obj - s.objective_value) if math.isfinite(s.objective_value) else math.inf
    return ResidualReport(eq, psd if math.isfinite(psd) else 0.0, obj, mismatch)
