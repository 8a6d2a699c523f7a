"""Dense complex Hermitian matrix helpers.

Operators (states, effects, witnesses) are plain ``numpy`` complex arrays.
:func:`as_hermitian` is the single validation gate; everything else assumes
its inputs already passed through it.
"""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np

from .config import DEFAULT_TOL
from .errors import ShapeError

__all__ = [
    "as_hermitian",
    "hermiticity_residual",
    "kron",
    "kron_all",
    "frob_inner",
    "psd_residual",
    "is_psd",
    "clip_psd",
    "inv_sqrt",
    "random_density",
    "random_pure_projector",
    "matrix_to_json",
    "matrix_from_json",
]


def hermiticity_residual(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def as_hermitian(a: Any, tol: float = DEFAULT_TOL.herm_tol) -> np.ndarray:
    """Return ``a`` as a complex square array, checking Hermiticity to ``tol``.

    The result is symmetrized exactly so downstream eigensolvers see a
    Hermitian matrix bit-for-bit.
    """
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise ShapeError(f"expected a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    res = hermiticity_residual(arr)
    if res > tol:
        raise ValueError(f"matrix is not Hermitian (max deviation {res:.3e} > {tol:.1e})")
    return 0.5 * (arr + arr.conj().T)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def frob_inner(a: np.ndarray, b: np.ndarray, tol: float = DEFAULT_TOL.herm_tol) -> float:
    """``tr[a b]`` for Hermitian ``a`` and ``b``; the imaginary residue is checked then dropped."""
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")
    # tr[ab] = sum_ij a_ij b_ji
    val = np.sum(a * b.T)
    scale = max(1.0, float(np.abs(val)))
    if abs(val.imag) > tol * scale * max(1, a.shape[0]):
        raise ValueError(f"tr[ab] has imaginary part {val.imag:.3e}; inputs not Hermitian?")
    return float(val.real)


def psd_residual(a: np.ndarray) -> float:
    """Smallest eigenvalue of ``a``."""
    return float(np.linalg.eigvalsh(a)[0])


def is_psd(a: np.ndarray, psd_tol: float = DEFAULT_TOL.psd_tol) -> bool:
    return psd_residual(a) >= -psd_tol


def clip_psd(a: np.ndarray) -> np.ndarray:
    """Project onto the PSD cone by zeroing negative eigenvalues."""
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def inv_sqrt(a: np.ndarray, cond_cap: float = 1e12) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    if w[0] <= 0 or w[-1] / w[0] > cond_cap:
        raise np.linalg.LinAlgError("matrix is singular or ill-conditioned")
    return (v / np.sqrt(w)) @ v.conj().T


def _ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = _ginibre(rng, dim, rank or dim)
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    return 0.5 * (rho + rho.conj().T)


def random_pure_projector(dim: int, rng: np.random.Generator) -> np.ndarray:
    psi = _ginibre(rng, dim, 1)[:, 0]
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def matrix_to_json(a: np.ndarray) -> dict[str, list[list[float]]]:
    a = np.asarray(a, dtype=complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def matrix_from_json(obj: dict[str, Any], herm_tol: float | None = DEFAULT_TOL.herm_tol) -> np.ndarray:
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj["im"], dtype=float)
    if re.shape != im.shape:
        raise ShapeError(f"re/im shape mismatch: {re.shape} vs {im.shape}")
    a = re + 1j * im
    if herm_tol is None:
        return a
    return as_hermitian(a, herm_tol)
