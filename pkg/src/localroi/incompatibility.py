"""Robustness of incompatibility (ROI): primal and dual programs, certificates, noise.

The parent POVM is indexed by deterministic outcome strings. For a set
``{M_k}`` with strings ``c = (c_0, ..., c_{n-1})``:

primal::

    1 + I = min s   s.t.  sum_{c: c_k = c} G_c >= M_{c|k},  sum_c G_c = s*1,  G_c >= 0

dual::

    1 + I = max tr[sum_{c,k} w_{ck} M_{c|k}]
            s.t.  X >= sum_k w_{c_k k}  for every string c,  w_{ck} >= 0,  tr X = 1

Both programs are solved independently. The raw solver output is then
repaired into an exactly feasible point ("polished"), so the primal value is
a true upper bound and the dual value a true lower bound on ``1 + I``; the
certificate gap is the width of that bracket.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .conic import SdpProblem, inner, solve_sdp
from .errors import DegenerateCertificateError, InaccurateCertificateError, SolverError
from .linalg import clip_psd, psd_residual
from .measurements import (
    DeterministicResponse,
    MeasurementSet,
    Povm,
    ResponseTable,
    deterministic_strings,
    tensor_sets,
    validate_set,
)

__all__ = [
    "RoiPrimal",
    "RoiDual",
    "RoiCertificate",
    "TensorRoi",
    "build_primal_problem",
    "build_dual_problem",
    "roi_primal",
    "roi_dual",
    "compute_roi",
    "is_compatible",
    "extract_noise",
    "noise_reconstruction_residual",
    "tensor_roi",
]

log = logging.getLogger(__name__)


class RoiPrimal(NamedTuple):
    value: float
    primal_parent: tuple[np.ndarray, ...]
    primal_scale: float
    strings: DeterministicResponse


class RoiDual(NamedTuple):
    value: float
    X: np.ndarray
    w: tuple[tuple[np.ndarray, ...], ...]  # w[k][c]


class TensorRoi(NamedTuple):
    I_a: float
    I_b: float
    I_ab: float
    multiplicativity_residual: float


def _members_table(strings: DeterministicResponse) -> dict[tuple[int, int], list[int]]:
    table: dict[tuple[int, int], list[int]] = {}
    for i, st in enumerate(strings.strings):
        for k, c in enumerate(st):
            table.setdefault((c, k), []).append(i)
    return table


def build_primal_problem(s: MeasurementSet, strings: DeterministicResponse) -> SdpProblem:
    d = s.dim
    p = SdpProblem("roi_primal")
    G = [p.hermitian(f"G{i}", d) for i in range(len(strings))]
    scale = p.scalar("s")
    p.add_eq(sum(G) - scale * np.eye(d))
    members = _members_table(strings)
    for k, povm in enumerate(s.povms):
        for c, effect in enumerate(povm.effects):
            p.add_psd(sum(G[i] for i in members[(c, k)]) - effect)
    p.minimize(scale)
    return p


def build_dual_problem(s: MeasurementSet, strings: DeterministicResponse) -> SdpProblem:
    d = s.dim
    p = SdpProblem("roi_dual")
    X = p.hermitian("X", d, psd=False)
    w = [[p.hermitian(f"w_{c}_{k}", d) for c in range(n)] for k, n in enumerate(s.outcome_counts)]
    p.add_eq(inner(np.eye(d), X), 1.0)
    for st in strings.strings:
        p.add_psd(X - sum(w[k][c] for k, c in enumerate(st)))
    p.maximize(sum(inner(s.effect(c, k), w[k][c]) for k, n in enumerate(s.outcome_counts) for c in range(n)))
    return p


def _require(s: MeasurementSet, tol: Tolerances) -> None:
    bad = validate_set(s, tol)
    if bad:
        raise ValueError(f"invalid measurement set: {bad[:3]}")


def _polish_primal(s: MeasurementSet, strings: DeterministicResponse, G: list[np.ndarray]) -> tuple[list[np.ndarray], float]:
    """Turn an approximate primal solution into an exactly feasible one.

    Clip each G to PSD, add a multiple of the identity to every G to cover
    any remaining deficit in the domination constraints, then absorb
    ``lambda_max(sum G) * 1 - sum G`` into the first block.
    """
    d = s.dim
    G = [clip_psd(g) for g in G]
    members = _members_table(strings)
    deficit = 0.0
    for k, povm in enumerate(s.povms):
        for c, effect in enumerate(povm.effects):
            r = psd_residual(sum(G[i] for i in members[(c, k)]) - effect)
            deficit = max(deficit, -r)
    if deficit > 0:
        eps = deficit * s.max_outcomes / len(strings)
        G = [g + eps * np.eye(d) for g in G]
    total = sum(G)
    scale = float(np.linalg.eigvalsh(total)[-1])
    G[0] = G[0] + (scale * np.eye(d) - total)
    G[0] = 0.5 * (G[0] + G[0].conj().T)
    return G, scale


def _polish_dual(s: MeasurementSet, strings: DeterministicResponse, X: np.ndarray, w: list[list[np.ndarray]]):
    """Clip witnesses to PSD, lift X to dominate every string sum, renormalize tr X = 1."""
    d = s.dim
    w = [[clip_psd(x) for x in row] for row in w]
    X = 0.5 * (X + X.conj().T)
    excess = 0.0
    for st in strings.strings:
        top = float(np.linalg.eigvalsh(sum(w[k][c] for k, c in enumerate(st)) - X)[-1])
        excess = max(excess, top)
    if excess > 0:
        X = X + excess * np.eye(d)
    t = float(np.trace(X).real)
    if t <= 0:
        raise SolverError("dual witness has non-positive trace after repair")
    X = X / t
    w = [[x / t for x in row] for row in w]
    return X, w


def roi_primal(s: MeasurementSet, tol: Tolerances = DEFAULT_TOL) -> RoiPrimal:
    _require(s, tol)
    strings = deterministic_strings(s, tol.string_cap)
    prob = build_primal_problem(s, strings)
    sol = solve_sdp(prob, tol.solver_tol)
    if not sol.ok:
        raise SolverError(f"ROI primal: {sol.status} ({sol.message})")
    if sol.status == "inaccurate":
        log.info("ROI primal solved inaccurately (%s); polishing", sol.message)
    G = [sol.var_values[f"G{i}"] for i in range(len(strings))]
    G, scale = _polish_primal(s, strings, G)
    value = scale - 1.0
    if value < -1e-8:
        raise SolverError(f"ROI primal produced s = {scale!r} < 1")
    return RoiPrimal(max(value, 0.0), tuple(G), scale, strings)


def roi_dual(s: MeasurementSet, tol: Tolerances = DEFAULT_TOL) -> RoiDual:
    _require(s, tol)
    strings = deterministic_strings(s, tol.string_cap)
    prob = build_dual_problem(s, strings)
    sol = solve_sdp(prob, tol.solver_tol)
    if not sol.ok:
        raise SolverError(f"ROI dual: {sol.status} ({sol.message})")
    X = sol.var_values["X"]
    w = [[sol.var_values[f"w_{c}_{k}"] for c in range(n)] for k, n in enumerate(s.outcome_counts)]
    X, w = _polish_dual(s, strings, X, w)
    obj = sum(
        float(np.sum(w[k][c] * s.effect(c, k).T).real) for k, n in enumerate(s.outcome_counts) for c in range(n)
    )
    return RoiDual(obj - 1.0, X, tuple(tuple(row) for row in w))


@dataclass(frozen=True)
class RoiCertificate:
    """ROI value with an exactly feasible primal point and dual witness.

    ``primal_parent[i]`` is the unnormalized parent effect for
    ``strings.strings[i]``; ``dual_w[k][c]`` is the witness block ``w_{ck}``.
    """

    roi: float
    primal_parent: tuple[np.ndarray, ...]
    primal_scale: float
    strings: DeterministicResponse
    dual_X: np.ndarray
    dual_w: tuple[tuple[np.ndarray, ...], ...]
    dual_value: float
    gap: float
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def witness_trace(self) -> float:
        """``M* = tr[sum_{c,k} w_{ck}]``."""
        return float(sum(np.trace(x).real for row in self.dual_w for x in row))

    def parent_povm(self) -> Povm:
        """Normalized parent ``G_c = G~_c / s``."""
        return Povm(tuple(g / self.primal_scale for g in self.primal_parent))

    def check(self, s: MeasurementSet, tol: Tolerances = DEFAULT_TOL) -> list[str]:
        """List of violated certificate invariants (empty when valid)."""
        return [f"{k}={v:.3e}" for k, v in _certificate_residuals(s, self, tol).items() if k.startswith("fail:")]


def _certificate_residuals(s: MeasurementSet, cert: RoiCertificate, tol: Tolerances) -> dict[str, float]:
    d = s.dim
    members = _members_table(cert.strings)
    G = cert.primal_parent
    out: dict[str, float] = {}
    out["scale_vs_roi"] = abs(cert.primal_scale - (1.0 + cert.roi))
    out["completeness"] = float(np.max(np.abs(sum(G) - cert.primal_scale * np.eye(d))))
    out["parent_psd"] = min(psd_residual(g) for g in G)
    out["domination_psd"] = min(
        psd_residual(sum(G[i] for i in members[(c, k)]) - s.effect(c, k))
        for k, n in enumerate(s.outcome_counts)
        for c in range(n)
    )
    out["dual_trace"] = abs(float(np.trace(cert.dual_X).real) - 1.0)
    out["witness_psd"] = min(psd_residual(x) for row in cert.dual_w for x in row)
    out["dual_domination_psd"] = min(
        psd_residual(cert.dual_X - sum(cert.dual_w[k][c] for k, c in enumerate(st))) for st in cert.strings.strings
    )
    out["gap"] = cert.gap
    checks = {
        "scale_vs_roi": out["scale_vs_roi"] <= 1e-8,
        "completeness": out["completeness"] <= tol.eq_tol,
        "parent_psd": out["parent_psd"] >= -tol.psd_tol,
        "domination_psd": out["domination_psd"] >= -tol.psd_tol,
        "dual_trace": out["dual_trace"] <= 1e-9,
        "witness_psd": out["witness_psd"] >= -tol.psd_tol,
        "dual_domination_psd": out["dual_domination_psd"] >= -tol.psd_tol,
        "gap": out["gap"] <= tol.gap_tol,
    }
    for k, ok in checks.items():
        if not ok:
            out[f"fail:{k}"] = out[k]
    return out


def compute_roi(s: MeasurementSet, tol: Tolerances = DEFAULT_TOL) -> RoiCertificate:
    """Solve both programs and assemble a checked certificate.

    Raises :class:`InaccurateCertificateError` when the bracket
    ``[1 + dual, 1 + primal]`` is wider than ``tol.gap_tol``.
    """
    primal = roi_primal(s, tol)
    dual = roi_dual(s, tol)
    gap = abs(primal.primal_scale - (1.0 + dual.value))
    if gap > tol.gap_tol:
        raise InaccurateCertificateError(primal.primal_scale - 1.0, dual.value, tol.gap_tol)
    cert = RoiCertificate(
        roi=primal.value,
        primal_parent=primal.primal_parent,
        primal_scale=primal.primal_scale,
        strings=primal.strings,
        dual_X=dual.X,
        dual_w=dual.w,
        dual_value=dual.value,
        gap=gap,
    )
    object.__setattr__(cert, "residuals", _certificate_residuals(s, cert, tol))
    return cert


def is_compatible(s: MeasurementSet, tol: float = 1e-6, tolerances: Tolerances = DEFAULT_TOL) -> bool:
    return compute_roi(s, tolerances).roi <= tol


def extract_noise(s: MeasurementSet, cert: RoiCertificate) -> tuple[MeasurementSet, ResponseTable]:
    """Noise ``Lambda`` and deterministic response with ``(M + r Lambda) / (1 + r) = sum_lam p G_lam``.

    ``Lambda_{c|k} = (sum_{c: c_k = c} G~_c - M_{c|k}) / r`` with ``r`` the ROI.
    """
    r = cert.roi
    if r <= 1e-9:
        raise DegenerateCertificateError(f"robustness {r:.3e} is zero; the set is already compatible")
    members = _members_table(cert.strings)
    G = cert.primal_parent
    povms = []
    for k, n in enumerate(s.outcome_counts):
        effects = [(sum(G[i] for i in members[(c, k)]) - s.effect(c, k)) / r for c in range(n)]
        povms.append(Povm(tuple(effects)))
    return MeasurementSet(tuple(povms)), ResponseTable.from_strings(cert.strings)


def noise_reconstruction_residual(
    s: MeasurementSet, cert: RoiCertificate, noise: MeasurementSet, response: ResponseTable
) -> float:
    """Max entrywise deviation of ``(M + r Lambda)/(1 + r)`` from ``sum_lam p(c|k,lam) G_lam``."""
    r = cert.roi
    parent = cert.parent_povm().as_array()
    worst = 0.0
    for k, n in enumerate(s.outcome_counts):
        for c in range(n):
            lhs = (s.effect(c, k) + r * noise.effect(c, k)) / (1.0 + r)
            rhs = np.tensordot(response.entries[c, k, :], parent, axes=1)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def tensor_roi(a: MeasurementSet, b: MeasurementSet, tol: Tolerances = DEFAULT_TOL) -> TensorRoi:
    ia = compute_roi(a, tol).roi
    ib = compute_roi(b, tol).roi
    iab = compute_roi(tensor_sets(a, b), tol).roi
    return TensorRoi(ia, ib, iab, abs((1.0 + iab) - (1.0 + ia) * (1.0 + ib)))
