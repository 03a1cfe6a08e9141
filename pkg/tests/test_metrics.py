import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpdetect.core import ChangePointVector, PiecewiseSignal
from cpdetect.metrics import (
    check_detec,
    check_nosp,
    d_h1_point,
    d_hausdorff,
    d_screen,
    d_wasserstein,
    detec_bound,
)

points = st.lists(st.integers(2, 500), min_size=1, max_size=15, unique=True).map(sorted)


def test_d_h1_point():
    assert d_h1_point([10, 20], 12) == 2
    assert d_h1_point([10, 20], 20) == 0
    assert d_h1_point([], 7) == math.inf
    assert d_h1_point(ChangePointVector(np.array([4]), 10), 9) == 5


def test_d_hausdorff_examples():
    assert d_hausdorff([10, 20], [10, 20]) == 0
    assert d_hausdorff([10, 20], [12, 25]) == 5
    assert d_hausdorff([], []) == 0
    assert d_hausdorff([], [3]) == math.inf


def test_screening_is_asymmetric():
    assert d_screen([10, 20], [12]) == 2
    assert d_screen([12], [10, 20]) == 8
    assert d_screen([], []) == 0 and d_screen([], [3]) == math.inf


def test_d_wasserstein_examples():
    assert d_wasserstein([10, 20], [10, 20]) == 0
    assert d_wasserstein([10, 20], [12, 25]) == 7
    assert d_wasserstein([7], [3]) == 4
    with pytest.raises(ValueError):
        d_wasserstein([1, 2], [3])


@given(points, points)
def test_hausdorff_symmetric_and_separating(a, b):
    assert d_hausdorff(a, b) == d_hausdorff(b, a)
    assert (d_hausdorff(a, b) == 0) == (set(a) == set(b))


@given(st.integers(1, 10).flatmap(lambda k: st.tuples(*[st.lists(st.integers(0, 300), min_size=k, max_size=k)] * 3)))
def test_wasserstein_triangle_inequality(vecs):
    a, b, c = vecs
    assert d_wasserstein(a, c) <= d_wasserstein(a, b) + d_wasserstein(b, c)
    assert d_wasserstein(a, b) == d_wasserstein(b, a)


def test_check_nosp_examples():
    assert check_nosp([], [10])
    assert check_nosp([10], [10])
    assert not check_nosp([9, 11], [10])
    assert check_nosp([], []) and not check_nosp([5], [])


def test_check_nosp_half_open_bins():
    # the midpoint 15 of (10, 20) belongs to the left bin
    assert check_nosp([15, 20], [10, 20])
    assert not check_nosp([10, 15], [10, 20])
    # midpoint 15.5 of (10, 21): 15 left, 16 right
    assert check_nosp([15, 16], [10, 21])
    assert not check_nosp([16, 17], [10, 21])


@given(points)
def test_check_nosp_truth_against_itself(t):
    assert check_nosp(t, t)


def test_detec_bound():
    sig = PiecewiseSignal.from_lists((21, 41), (0, 2, 0), 60)
    rate = 1.0 * (math.log(60 * 4) + 0.5) / 4
    assert detec_bound(sig, 1, 0.5, 1.0) == pytest.approx(min(10, rate))
    assert detec_bound(sig, 1, 0.5, 100.0) == 10


def test_check_detec_examples():
    sig = PiecewiseSignal.from_lists((51, 101, 151), (0, 5, 0, 0.01), 200)
    rep = check_detec(sig.taus, sig, 1.0, 1.0, 1.0)
    np.testing.assert_array_equal(rep.high_energy, [True, True, False])
    assert rep.passed and rep.n_high_energy == 2
    np.testing.assert_array_equal(rep.distance, 0)
    missing = check_detec([51, 160], sig, 1.0, 1.0, 1.0)
    assert not missing.detected[1] and not missing.passed
    # the low-energy change does not affect pass/fail
    assert check_detec([51, 101], sig, 1.0, 1.0, 1.0).passed
    assert not check_detec([], sig, 1.0, 1.0, 1.0).passed
    with pytest.raises(ValueError):
        check_detec([], PiecewiseSignal.from_lists((), (0,), 10), 1.0, 1.0, 1.0)


@given(points, st.floats(0.1, 5))
def test_detected_iff_within_bound(est, c):
    sig = PiecewiseSignal.from_lists((100, 250, 400), (0, 1.0, -0.5, 2.0), 500)
    rep = check_detec(est, sig, 1.0, 0.0, c)
    np.testing.assert_array_equal(rep.detected, rep.distance <= rep.bound)
