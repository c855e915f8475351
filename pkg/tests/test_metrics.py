import math

import numpy as np
import pytest

from tbes import boundary_map, gfm, pri, voi


def brute_force_pri(test, truth):
    """All-pairs consistency count; only viable for tiny maps."""
    a = test.ravel()
    b = truth.ravel()
    n = a.size
    consistent = 0
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += 1
            if (a[i] == a[j]) == (b[i] == b[j]):
                consistent += 1
    return consistent / total


def test_pri_identical_maps(rng):
    labels = rng.integers(0, 4, size=(6, 6))
    res = pri(labels, [labels])
    assert res.value == 1.0
    assert res.per_ground_truth == [1.0]


def test_pri_three_pixel_fixture():
    test = np.array([[0, 0, 1]])
    truth = np.array([[0, 1, 1]])
    assert pri(test, [truth]).value == pytest.approx(1 / 3)
    assert pri(test, [truth]).value == pytest.approx(brute_force_pri(test, truth))


def test_pri_singletons_vs_single_region():
    n = 12
    test = np.arange(n).reshape(3, 4)
    truth = np.zeros((3, 4), dtype=int)
    assert pri(test, [truth]).value == 0.0


def test_pri_symmetry(rng):
    a = rng.integers(0, 5, size=(7, 7))
    b = rng.integers(0, 3, size=(7, 7))
    assert pri(a, [b]).value == pytest.approx(pri(b, [a]).value, rel=1e-12)


def test_pri_contingency_equals_bruteforce(rng):
    for _ in range(50):
        a = rng.integers(0, 5, size=(8, 8))
        b = rng.integers(0, 4, size=(8, 8))
        assert pri(a, [b]).value == pytest.approx(brute_force_pri(a, b), abs=1e-12)


def test_pri_multiple_truths_average(rng):
    test = rng.integers(0, 3, size=(5, 5))
    truths = [rng.integers(0, 3, size=(5, 5)) for _ in range(4)]
    res = pri(test, truths)
    assert len(res.per_ground_truth) == 4
    assert res.value == pytest.approx(np.mean(res.per_ground_truth))


def test_voi_identical_is_zero(rng):
    labels = rng.integers(0, 4, size=(6, 6))
    assert voi(labels, [labels]).value == 0.0


def test_voi_two_bit_fixture():
    test = np.array([[0, 0, 1, 1]])
    truth = np.array([[0, 1, 0, 1]])
    assert voi(test, [truth]).value == pytest.approx(2.0, abs=1e-12)


def test_voi_refinement_half_split():
    truth = np.zeros((2, 2), dtype=int)
    test = np.array([[0, 0], [1, 1]])
    # splitting one region in half costs exactly its split entropy: 1 bit
    assert voi(test, [truth]).value == pytest.approx(1.0, abs=1e-12)


def test_voi_symmetry_and_nonnegativity(rng):
    for _ in range(50):
        a = rng.integers(0, 4, size=(6, 6))
        b = rng.integers(0, 5, size=(6, 6))
        vab = voi(a, [b]).value
        vba = voi(b, [a]).value
        assert vab == pytest.approx(vba, abs=1e-12)
        assert vab >= 0.0


def test_voi_zero_iff_identical_partition(rng):
    a = rng.integers(0, 4, size=(5, 5))
    relabeled = 3 - a  # same partition, different ids
    assert voi(a, [relabeled]).value == pytest.approx(0.0, abs=1e-12)
    b = a.copy()
    b[0, 0] = b.max() + 1
    assert voi(a, [b]).value > 0.0


def test_boundary_map_definition():
    labels = np.array([[0, 0, 1], [0, 0, 1], [2, 2, 1]])
    expected = np.array(
        [[False, True, True], [True, True, True], [True, True, True]]
    )
    np.testing.assert_array_equal(boundary_map(labels), expected)


def test_gfm_identical_maps(rng):
    labels = np.zeros((10, 10), dtype=int)
    labels[:, 5:] = 1
    res = gfm(labels, [labels])
    assert res.value == 1.0
    assert res.precision == 1.0
    assert res.recall == 1.0


def test_gfm_no_test_boundary():
    test = np.zeros((8, 8), dtype=int)
    truth = np.zeros((8, 8), dtype=int)
    truth[:, 4:] = 1
    res = gfm(test, [truth])
    assert res.recall == 0.0
    assert res.value == 0.0


def test_gfm_offset_boundary_within_tolerance():
    truth = np.zeros((16, 16), dtype=int)
    truth[:, 8:] = 1
    test = np.zeros((16, 16), dtype=int)
    test[:, 9:] = 1
    res = gfm(test, [truth], tolerance_px=2.0)
    assert res.precision == 1.0
    assert res.recall == 1.0
    assert res.value == 1.0
    # distance oracle: brute-force min distance on the 16x16 fixture
    tb = np.argwhere(boundary_map(test))
    gb = np.argwhere(boundary_map(truth))
    worst = max(min(math.dist(p, q) for q in gb) for p in tb)
    assert worst <= 2.0


def test_gfm_outside_tolerance_drops():
    truth = np.zeros((16, 16), dtype=int)
    truth[:, 8:] = 1
    test = np.zeros((16, 16), dtype=int)
    test[:, 13:] = 1
    res = gfm(test, [truth], tolerance_px=2.0)
    assert res.precision == 0.0
    assert res.value == 0.0


def test_gfm_relabel_invariant(rng):
    labels = rng.integers(0, 3, size=(12, 12))
    perm = np.array([2, 0, 1])
    truth = rng.integers(0, 3, size=(12, 12))
    a = gfm(labels, [truth], tolerance_px=1.5)
    b = gfm(perm[labels], [truth], tolerance_px=1.5)
    assert a.value == pytest.approx(b.value)


def test_gfm_default_tolerance_is_diagonal_fraction():
    test = np.zeros((30, 40), dtype=int)
    test[:, 20:] = 1
    shifted = np.zeros((30, 40), dtype=int)
    shifted[:, 21:] = 1
    # diagonal = 50, tolerance = 0.375 < 1 px -> offset boundary misses
    res = gfm(shifted, [test])
    assert res.value < 1.0


def test_metric_errors():
    with pytest.raises(ValueError):
        pri(np.zeros((2, 2), dtype=int), [])
    with pytest.raises(ValueError, match="shape"):
        voi(np.zeros((2, 2), dtype=int), [np.zeros((3, 3), dtype=int)])
    with pytest.raises(ValueError):
        gfm(np.zeros((2, 2), dtype=int), [np.zeros((2, 2), dtype=int)], tolerance_px=-1)
