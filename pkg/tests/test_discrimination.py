from __future__ import annotations

import numpy as np
import pytest

from conftest import SZ, xz_set, z_set
from localroi.discrimination import (
    LO,
    LOCC1,
    DiscriminationTask,
    LocalStrategy,
    bound_report,
    no_measurement_baseline,
    psg_best_lo,
    psg_best_lo_n,
    psg_best_locc1,
    psg_compatible_seesaw,
    psg_fixed,
    psg_parents,
    random_task,
)
from localroi.errors import ShapeError
from localroi.incompatibility import compute_roi
from localroi.measurements import MeasurementSet, projective_povm, random_set, trivial_povm
from localroi.oracle import brute_force_psg, random_compatible_set

E00 = np.diag([1.0, 0, 0, 0])
E11 = np.diag([0, 0, 0, 1.0])


def product_task() -> DiscriminationTask:
    return DiscriminationTask.build((2, 2), [1.0], [([0.5, 0.5], [E00, E11])])


def identical_task() -> DiscriminationTask:
    rho = np.eye(4) / 4
    return DiscriminationTask.build((2, 2), [1.0], [([0.7, 0.3], [rho, rho])])


def lo_strategy(guess: np.ndarray) -> LocalStrategy:
    return LocalStrategy(LO, (np.ones((1, 1)), np.ones((1, 1))), guess)


def test_task_validation():
    with pytest.raises(ValueError):
        DiscriminationTask.build((2, 2), [0.5], [([1.0], [E00])])
    with pytest.raises(ValueError):
        DiscriminationTask.build((2, 2), [1.0], [([0.5, 0.6], [E00, E11])])
    with pytest.raises(ShapeError):
        DiscriminationTask.build((2, 2), [1.0], [([1.0], [np.eye(2) / 2])])
    with pytest.raises(ValueError):
        DiscriminationTask.build((2, 2), [1.0], [([1.0], [2 * E00])])


def test_strategy_validation():
    with pytest.raises(ValueError):
        LocalStrategy(LO, (np.array([[0.5, 0.4]]),), np.ones((1, 2, 1)))
    with pytest.raises(ValueError):
        LocalStrategy("adaptive", (np.ones((1, 1)),), np.ones((1, 1, 1)))


def test_fixed_strategies_on_product_task():
    z = z_set()
    copy = np.zeros((1, 2, 2, 2))
    copy[0, 0, 0, 0] = copy[0, 1, 1, 1] = 1.0
    copy[0, 0, 1, 0] = copy[0, 1, 0, 0] = 1.0
    assert psg_fixed(product_task(), [z, z], lo_strategy(copy)) == pytest.approx(1.0)
    flipped = copy[..., ::-1]
    assert psg_fixed(product_task(), [z, z], lo_strategy(flipped)) == pytest.approx(0.0)
    uniform = np.full((1, 2, 2, 2), 0.5)
    assert psg_fixed(product_task(), [z, z], lo_strategy(uniform)) == pytest.approx(0.5)


def test_fixed_strategy_shape_mismatch():
    with pytest.raises(ShapeError):
        psg_fixed(product_task(), [z_set(), z_set()], lo_strategy(np.full((1, 2, 2, 3), 1 / 3)))


def test_best_on_trivial_tasks():
    z = z_set()
    xz = xz_set()
    best = psg_best_lo(product_task(), xz, xz)
    assert best.value == pytest.approx(1.0)
    assert np.argmax(best.strategy.choose_k[0]) == 1  # sigma_z
    assert psg_best_locc1(product_task(), z, z).value == pytest.approx(1.0)
    assert psg_best_lo(identical_task(), xz, xz).value == pytest.approx(0.7)
    assert no_measurement_baseline(identical_task()) == pytest.approx(0.7)


def test_returned_strategies_reproduce_values():
    task = random_task((2, 2), 3, 3, seed=4)
    a, b = random_set(2, 2, 2, 1), random_set(2, 3, 2, 2)
    for res in (psg_best_lo(task, a, b), psg_best_locc1(task, a, b)):
        assert psg_fixed(task, [a, b], res.strategy) == pytest.approx(res.value, abs=1e-12)
        assert all(set(np.unique(t)) <= {0.0, 1.0} for t in (*res.strategy.choices, res.strategy.guess))


def test_xz_against_brute_force():
    task = random_task((2, 2), 2, 2, seed=8)
    xz = xz_set()
    assert abs(psg_best_lo(task, xz, xz).value - brute_force_psg(task, [xz, xz], LO)) <= 1e-12
    assert abs(psg_best_locc1(task, xz, xz).value - brute_force_psg(task, [xz, xz], LOCC1)) <= 1e-12


def test_locc1_single_second_measurement_equals_lo():
    task = random_task((2, 2), 3, 2, seed=5)
    a, b = random_set(2, 3, 2, 6), z_set()
    assert psg_best_locc1(task, a, b).value == psg_best_lo(task, a, b).value


def test_conditioning_can_help():
    # seed found by scanning: LOCC1 strictly above LO
    for seed in range(40):
        task = random_task((2, 2), 2, 3, seed=seed)
        a, b = random_set(2, 2, 2, seed), random_set(2, 2, 2, seed + 1)
        lo, l1 = psg_best_lo(task, a, b).value, psg_best_locc1(task, a, b).value
        if l1 > lo + 1e-6:
            assert abs(l1 - brute_force_psg(task, [a, b], LOCC1)) <= 1e-12
            return
    pytest.fail("no instance where communication helps")


def test_ordering_properties():
    for seed in range(10):
        task = random_task((2, 2), 3, 2, seed=seed)
        a, b = random_set(2, 2, 2, 50 + seed), random_set(2, 2, 3, 80 + seed)
        lo, l1 = psg_best_lo(task, a, b).value, psg_best_locc1(task, a, b).value
        assert no_measurement_baseline(task) - 1e-12 <= lo <= l1 + 1e-12 <= 1 + 1e-12


def test_three_party_ghz_diagonal():
    # GHZ-basis-diagonal task measured in sigma_z: states |000>+|111> and |000>-|111> look identical
    ghz_p = np.zeros(8)
    ghz_p[[0, 7]] = 1 / np.sqrt(2)
    ghz_m = ghz_p.copy()
    ghz_m[7] *= -1
    w_p = np.zeros(8)
    w_p[[1, 6]] = 1 / np.sqrt(2)
    states = [np.outer(v, v) for v in (ghz_p, ghz_m, w_p)]
    task = DiscriminationTask.build((2, 2, 2), [1.0], [([0.5, 0.3, 0.2], states)])
    z = z_set()
    # z outcomes: 000/111 from either GHZ state (guess the likelier: 0.5), 001/110 from w_p (0.2)
    assert psg_best_lo_n(task, [z, z, z]).value == pytest.approx(0.7)


def test_three_party_brute_force():
    task = random_task((2, 2, 2), 2, 2, seed=3)
    sets = [random_set(2, 2, 2, 10 + i) for i in range(3)]
    assert abs(psg_best_lo_n(task, sets).value - brute_force_psg(task, sets, LO)) <= 1e-12


def test_n2_matches_pairwise():
    task = random_task((2, 2), 2, 2, seed=1)
    a, b = random_set(2, 2, 2, 3), random_set(2, 2, 2, 4)
    assert psg_best_lo_n(task, [a, b]).value == psg_best_lo(task, a, b).value


def test_parents():
    z = projective_povm(SZ)
    assert psg_parents(product_task(), z, z) == pytest.approx(1.0)
    task = random_task((2, 2), 3, 3, seed=2)
    assert psg_parents(task, trivial_povm(2), trivial_povm(2)) == pytest.approx(no_measurement_baseline(task))


def test_parents_proof_chain():
    task = random_task((2, 2), 3, 3, seed=6)
    xz = xz_set()
    cert = compute_roi(xz)
    val = psg_parents(task, cert.parent_povm(), cert.parent_povm())
    assert val >= psg_best_lo(task, xz, xz).value / (1 + cert.roi) ** 2 - 1e-9


def test_seesaw_trivial_cases():
    assert psg_compatible_seesaw(product_task(), [2, 2], restarts=3, seed=0).value == pytest.approx(1.0, abs=1e-7)
    res = psg_compatible_seesaw(identical_task(), [2, 2], restarts=2, seed=0)
    assert res.value == pytest.approx(0.7, abs=1e-9)


def test_seesaw_monotone_and_deterministic():
    task = random_task((2, 2), 3, 3, seed=9)
    a = psg_compatible_seesaw(task, restarts=4, seed=3, sets=[xz_set(), xz_set()])
    b = psg_compatible_seesaw(task, restarts=4, seed=3, sets=[xz_set(), xz_set()])
    assert a.value == b.value and a.restart_values == b.restart_values
    assert all(y >= x - 1e-10 for x, y in zip(a.history, a.history[1:]))
    assert len(a.parents) == 2 and all(p.n_outcomes == 4 for p in a.parents)


def test_seesaw_needs_sizes():
    with pytest.raises(ValueError):
        psg_compatible_seesaw(product_task())


def test_bound_report_compatible_sets():
    task = random_task((2, 2), 3, 3, seed=12)
    a, b = random_compatible_set(2, 2, 2, 3, 1), random_compatible_set(2, 2, 2, 3, 2)
    rep = bound_report(task, [a, b], restarts=3)
    assert rep.passed
    assert rep.ratio <= 1 + 1e-6


def test_bound_report_xz():
    task = random_task((2, 2), 3, 3, seed=13)
    rep = bound_report(task, [xz_set(), xz_set()])
    assert rep.passed and rep.holds_locc1
    assert rep.factor == pytest.approx((1 + rep.rois[0]) * (1 + rep.rois[1]))
