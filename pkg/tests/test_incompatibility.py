from __future__ import annotations

import numpy as np
import pytest

from conftest import SX, SY, SZ, xz_set, z_set
from localroi.config import Tolerances
from localroi.errors import DegenerateCertificateError, InaccurateCertificateError
from localroi.incompatibility import (
    compute_roi,
    extract_noise,
    is_compatible,
    noise_reconstruction_residual,
    roi_dual,
    roi_primal,
    tensor_roi,
)
from localroi.measurements import MeasurementSet, apply_parent, projective_povm, random_set, validate_set
from localroi.oracle import random_compatible_set


def test_xz_primal_dual_agree():
    p, d = roi_primal(xz_set()), roi_dual(xz_set())
    assert p.value > 0.1
    assert abs(p.value - d.value) <= 1e-6
    # exact feasibility makes the pair a bracket
    assert d.value <= p.value + 1e-12


def test_certificate_invariants_xz():
    cert = compute_roi(xz_set())
    assert cert.check(xz_set()) == []
    assert cert.gap <= 1e-6
    assert cert.primal_scale == pytest.approx(1.0 + cert.roi)
    parent = cert.parent_povm()
    assert np.allclose(sum(parent.effects), np.eye(2), atol=1e-9)
    # the witness trace is 1 + dual value divided by the average witness overlap; it is positive
    assert cert.witness_trace > 0


def test_single_povm_is_compatible():
    cert = compute_roi(z_set())
    assert cert.roi <= 1e-7
    assert is_compatible(z_set())


def test_xyz_more_incompatible_than_xz():
    xyz = MeasurementSet.of([projective_povm(SX), projective_povm(SY), projective_povm(SZ)])
    assert compute_roi(xyz).roi > compute_roi(xz_set()).roi + 1e-3


def test_apply_parent_outputs_are_compatible():
    for seed in range(5):
        s = random_compatible_set(2, 3, 2, 4, seed)
        assert compute_roi(s).roi <= 1e-6
    s = random_compatible_set(3, 2, 3, 5, 9)
    assert is_compatible(s)


@pytest.mark.parametrize("s", [xz_set(), random_set(2, 3, 2, 0)], ids=["xz", "random-triple"])
def test_extract_noise_reconstructs(s):
    cert = compute_roi(s)
    assert cert.roi > 1e-3
    noise, response = extract_noise(s, cert)
    assert validate_set(noise, Tolerances(psd_tol=1e-6, eq_tol=1e-6)) == []
    assert noise_reconstruction_residual(s, cert, noise, response) <= 1e-7
    # the recovered mixture is generated by the parent: it is compatible
    mixed = apply_parent(cert.parent_povm(), response)
    assert compute_roi(mixed).roi <= 1e-6


def test_extract_noise_degenerate():
    with pytest.raises(DegenerateCertificateError):
        extract_noise(z_set(), compute_roi(z_set()))


def test_tight_gap_tolerance_raises():
    with pytest.raises(InaccurateCertificateError):
        compute_roi(xz_set(), Tolerances(gap_tol=1e-15))


def test_invalid_set_rejected():
    bad = MeasurementSet.of([[np.diag([1.5, 1.0]), np.diag([-0.5, 0.0])]])
    with pytest.raises(ValueError):
        compute_roi(bad)


def test_tensor_with_single_povm():
    r = tensor_roi(xz_set(), z_set())
    assert r.I_b <= 1e-7
    assert r.multiplicativity_residual <= 1e-5


def test_qutrit_set_certificate():
    s = random_set(3, 2, 3, 4)
    cert = compute_roi(s)
    assert cert.check(s) == []
