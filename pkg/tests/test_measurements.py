from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SX, SZ, xz_set
from localroi.errors import ResourceError, ShapeError
from localroi.measurements import (
    MeasurementSet,
    Povm,
    ResponseTable,
    apply_parent,
    decode_pair,
    deterministic_mixture,
    deterministic_strings,
    encode_pair,
    projective_povm,
    random_set,
    tensor_sets,
    trivial_povm,
    validate_set,
)


def test_xz_is_valid():
    s = xz_set()
    assert validate_set(s) == []
    assert s.outcome_counts == (2, 2)
    assert np.allclose(s.effect(0, 1), np.diag([1, 0]))


def test_validate_reports_violations():
    bad = MeasurementSet.of([[np.diag([1.5, 1.0]), np.diag([-0.5, 0.0])]])
    kinds = {v.kind for v in validate_set(bad)}
    assert kinds == {"psd"}
    incomplete = MeasurementSet.of([[np.diag([0.5, 0.5])]])
    assert [v.kind for v in validate_set(incomplete)] == ["completeness"]


def test_mismatched_dims_rejected():
    with pytest.raises(ShapeError):
        Povm((np.eye(2), np.eye(3)))
    with pytest.raises(ShapeError):
        MeasurementSet((trivial_povm(2), trivial_povm(3)))


def test_pair_encoding():
    for i in range(3):
        for j in range(4):
            assert decode_pair(encode_pair(i, j, 4), 4) == (i, j)


def test_deterministic_strings_order_and_cap():
    d = deterministic_strings((2, 3))
    assert d.strings[:4] == ((0, 0), (0, 1), (0, 2), (1, 0))
    assert len(d) == 6
    table = d.table()
    assert table.shape == (6, 2, 3)
    assert np.all(table.sum(axis=2) == 1)
    assert d.members(1, 0) == [3, 4, 5]
    with pytest.raises(ResourceError):
        deterministic_strings((3, 3, 3), cap=26)


def test_deterministic_mixture_reproduces_conditionals():
    cond = np.array([[0.2, 0.8], [0.6, 0.4]])
    w = deterministic_mixture(cond, (2, 2))
    d = deterministic_strings((2, 2)).table()
    assert np.allclose(np.einsum("s,skc->kc", w, d), cond)


def test_tensor_of_xz():
    t = tensor_sets(xz_set(), xz_set())
    assert t.n_meas == 4 and t.outcome_counts == (4, 4, 4, 4) and t.dim == 4
    assert validate_set(t) == []
    # measurement k * n_b + l, outcome c * |N_l| + d: here k=1, l=0, c=0, d=1
    assert np.allclose(t.effect(0 * 2 + 1, 1 * 2 + 0), np.kron(xz_set().effect(0, 1), xz_set().effect(1, 0)))


def test_apply_parent_and_table_validation():
    parent = projective_povm(SZ)
    entries = np.zeros((2, 2, 2))
    entries[:, 0, :] = [[1, 0], [0, 1]]  # copy
    entries[:, 1, :] = [[0.5, 0.5], [0.5, 0.5]]  # coin
    s = apply_parent(parent, ResponseTable(entries, (2, 2)))
    assert np.allclose(s.effect(0, 0), np.diag([1, 0]))
    assert np.allclose(s.effect(0, 1), 0.5 * np.eye(2))
    with pytest.raises(ValueError):
        ResponseTable(entries * 2, (2, 2))
    with pytest.raises(ShapeError):
        apply_parent(trivial_povm(2), ResponseTable(entries, (2, 2)))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(0, 10**6))
def test_random_set_valid_and_deterministic(dim, n_meas, n_out, seed):
    s = random_set(dim, n_meas, n_out, seed)
    assert validate_set(s) == []
    again = random_set(dim, n_meas, n_out, seed)
    assert all(np.array_equal(a, b) for p, q in zip(s, again) for a, b in zip(p, q))


def test_projective_povm_orders_eigenvalues():
    p = projective_povm(SX)
    plus = np.array([1, 1]) / np.sqrt(2)
    assert np.allclose(p[0], np.outer(plus, plus))
