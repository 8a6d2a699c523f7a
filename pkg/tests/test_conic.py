from __future__ import annotations

import numpy as np
import pytest

from localroi.conic import (
    SdpProblem,
    hermitian_from_params,
    hermitian_params,
    inner,
    real_embedding,
    solve_sdp,
    verify_solution,
)
from localroi.config import make_rng
from localroi.linalg import random_density


def test_param_round_trip():
    h = random_density(3, make_rng(1))
    assert np.allclose(hermitian_from_params(hermitian_params(h), 3), h)


def test_real_embedding_preserves_spectrum():
    h = random_density(3, make_rng(2))
    a = np.sort(np.linalg.eigvalsh(h))
    b = np.sort(np.linalg.eigvalsh(real_embedding(h)))
    assert np.allclose(np.repeat(a, 2), b)


def test_minimize_scale():
    p = SdpProblem("scale")
    s = p.scalar("s")
    p.add_psd(s * np.eye(2) - np.diag([1.0, 0.3]))
    p.minimize(s)
    sol = solve_sdp(p)
    assert sol.ok and sol.objective_value == pytest.approx(1.0, abs=1e-7)


def test_max_eigenvalue_complex():
    # max tr[C W] with tr W = 1, W >= 0 is the top eigenvalue of C
    c = np.array([[1.0, 1j], [-1j, 1.0]])
    p = SdpProblem("maxeig")
    w = p.hermitian("W", 2)
    p.add_eq(inner(np.eye(2), w), 1.0)
    p.maximize(inner(c, w))
    sol = solve_sdp(p)
    assert sol.objective_value == pytest.approx(2.0, abs=1e-7)
    rep = verify_solution(p, sol)
    assert rep.within(1e-6)


def test_helstrom_bound():
    rng = make_rng(3)
    r0, r1 = random_density(2, rng), random_density(2, rng)
    p = SdpProblem("helstrom")
    e0, e1 = p.hermitian("E0", 2), p.hermitian("E1", 2)
    p.add_eq(e0 + e1, np.eye(2))
    p.maximize(inner(0.5 * r0, e0) + inner(0.5 * r1, e1))
    sol = solve_sdp(p)
    expected = 0.5 + 0.25 * np.abs(np.linalg.eigvalsh(r0 - r1)).sum()
    assert sol.objective_value == pytest.approx(expected, abs=1e-7)


def test_infeasible_detected():
    p = SdpProblem("infeasible")
    w = p.hermitian("W", 2)
    p.add_eq(inner(np.eye(2), w), -1.0)
    p.minimize(inner(np.eye(2), w))
    assert solve_sdp(p).status == "infeasible"


def test_dump_round_trip():
    p = SdpProblem("dump")
    w = p.hermitian("W", 2)
    s = p.scalar("s")
    p.add_eq(inner(np.eye(2), w), 1.0)
    p.add_psd(s * np.eye(2) - w)
    p.minimize(s)
    q = SdpProblem.from_json(p.to_json())
    assert q.to_json() == p.to_json()
    assert solve_sdp(q).objective_value == pytest.approx(0.5, abs=1e-7)


def test_unknown_variable_rejected():
    p = SdpProblem("a")
    other = SdpProblem("b").hermitian("Z", 2)
    with pytest.raises(ValueError):
        p.add_psd(other)
