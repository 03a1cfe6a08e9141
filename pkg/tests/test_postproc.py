import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpdetect.calibrate import dyadic_lengths
from cpdetect.core import PrefixSums
from cpdetect.postproc import (
    detect_full,
    global_confidence_region,
    local_improve,
    merge_intervals,
    postprocess,
    prune,
    radii,
    radius,
    triad_at,
)
from cpdetect.stats import cusum

seeds = st.integers(0, 2**32 - 1)


def step(n, tau, h):
    return np.where(np.arange(1, n + 1) >= tau, h, 0.0)


def naive_radius(y, tau, zeta, grid):
    n = len(y)
    p = PrefixSums(y)
    for r in grid:
        t = triad_at(tau, int(r), n)
        thr = math.sqrt(2 * math.log(n * (t.t3 - t.t1) / (t.d1 * t.d2))) + zeta
        if abs(cusum(p, t)) > thr:
            return int(r), (t.t1 + 1, t.t3 - 1)
    return math.inf, None


def naive_prune(y, taus, zeta, dyadic):
    # direct transcription of the scan over sorted candidates
    n = len(y)
    grid = dyadic_lengths(n) if dyadic else range(1, n + 1)
    info = [(t, *naive_radius(y, t, zeta, grid)) for t in taus]
    order = sorted(info, key=lambda x: (-x[1], x[0]))
    keep = []
    for l, (t, r, iv) in enumerate(order):
        if r == math.inf:
            continue
        later = [o[2] for o in order[l + 1 :] if o[2] is not None]
        if l < len(order) - 1 and any(iv[0] <= b and a <= iv[1] for a, b in later):
            continue
        keep.append(t)
    return sorted(keep)


@pytest.mark.parametrize(
    "tau, r, n, expected", [(5, 2, 10, (3, 5, 7)), (2, 5, 10, (1, 2, 7)), (9, 4, 10, (5, 9, 11))]
)
def test_triad_at(tau, r, n, expected):
    assert tuple(triad_at(tau, r, n)) == expected


def test_triad_at_validation():
    with pytest.raises(ValueError):
        triad_at(1, 2, 10)
    with pytest.raises(ValueError):
        triad_at(5, 0, 10)


def test_radius_examples():
    y = step(16, 9, 10.0)
    res = radius(y, 9, 2.0)
    assert res.radius == 1 and res.interval == (9, 9)
    assert 10 / math.sqrt(2) > math.sqrt(2 * math.log(32)) + 2
    assert radius(y, 9, 2.0, dyadic=True).radius == 1
    flat = radius(np.ones(16), 5, 0.1)
    assert flat.radius == math.inf and flat.interval is None and not flat.finite


def test_radius_validation():
    with pytest.raises(ValueError):
        radius(np.zeros(10), 5, 0.0)
    with pytest.raises(ValueError):
        radius(np.zeros(10), 11, 1.0)


@given(st.integers(3, 40), seeds, st.floats(0.1, 3), st.booleans())
def test_radii_match_naive_scan(n, seed, zeta, dyadic):
    y = np.random.default_rng(seed).standard_normal(n) + step(n, n // 2 + 1, 3.0)
    grid = dyadic_lengths(n) if dyadic else range(1, n + 1)
    for res in radii(y, np.arange(2, n + 1), zeta, dyadic):
        r, iv = naive_radius(y, res.tau, zeta, grid)
        assert res.radius == r and res.interval == iv
        if res.finite:
            assert 2 <= iv[0] <= res.tau <= iv[1] <= n


@given(st.integers(4, 60), seeds, st.floats(0.5, 3))
def test_dyadic_radius_never_smaller(n, seed, zeta):
    y = np.random.default_rng(seed).standard_normal(n) + step(n, n // 3 + 2, 2.0)
    taus = np.arange(2, n + 1)
    for f, d in zip(radii(y, taus, zeta), radii(y, taus, zeta, True)):
        if d.finite:
            assert f.finite and f.radius <= d.radius


@given(st.integers(4, 80), st.data(), st.floats(0.5, 5), st.floats(0.2, 2))
def test_dyadic_radius_bracket_on_noiseless_steps(n, data, h, zeta):
    y = step(n, data.draw(st.integers(2, n)), h)
    taus = np.arange(2, n + 1)
    top = int(dyadic_lengths(n)[-1])
    for f, d in zip(radii(y, taus, zeta), radii(y, taus, zeta, True)):
        if f.finite and 1 << (int(f.radius) - 1).bit_length() <= top:
            assert d.finite and f.radius <= d.radius < 2 * f.radius


def test_prune_examples():
    y = step(16, 9, 10.0)
    assert prune(y, [8, 9, 10], 2.0).tolist() == [9]
    assert prune(np.ones(16), [4, 8, 12], 1.0).K == 0
    two = step(40, 11, 10.0) + step(40, 31, 10.0)
    assert prune(two, [11, 31], 1.0).tolist() == [11, 31]


@given(st.integers(4, 50), seeds, st.floats(0.1, 2), st.booleans(), st.data())
def test_prune_matches_naive(n, seed, zeta, dyadic, data):
    y = np.random.default_rng(seed).standard_normal(n) + step(n, n // 2 + 1, 3.0)
    taus = sorted(data.draw(st.sets(st.integers(2, n), max_size=n - 1)))
    assert prune(y, taus, zeta, dyadic).tolist() == naive_prune(y, taus, zeta, dyadic)


@given(st.integers(4, 80), seeds, st.floats(0.1, 2), st.booleans())
def test_survivor_intervals_disjoint(n, seed, zeta, dyadic):
    y = np.random.default_rng(seed).standard_normal(n) + step(n, n // 2 + 1, 2.0)
    rep = detect_full(y, zeta, dyadic)
    ivs = sorted(rep.intervals)
    assert all(a[1] < b[0] for a, b in zip(ivs, ivs[1:]))
    assert rep.improved.K == rep.pruned.K
    for iv, x in zip(rep.intervals, sorted(rep.improved.tolist())):
        assert iv[0] <= x <= iv[1]


def test_local_improve_examples():
    y = step(16, 9, 10.0)
    assert local_improve(y, 10, 2.0) == 9
    assert local_improve(y, 9, 2.0) == 9
    with pytest.raises(ValueError):
        local_improve(np.ones(16), 5, 1.0)


def test_local_improve_near_boundary():
    y = step(20, 3, 8.0)
    assert local_improve(y, 2, 1.0) == 3


def test_postprocess_examples():
    y = step(40, 20, 6.0)
    assert postprocess(y, [], 1.0).improved.K == 0
    rep = postprocess(y, [22], 1.0)
    assert rep.improved.tolist() == [20]
    assert postprocess(np.ones(40), np.arange(2, 41), 1.0).improved.K == 0


def test_detect_full_examples():
    assert detect_full(np.ones(64), 1.0).improved.K == 0
    y = step(100, 30, 8.0) - step(100, 70, 8.0)
    for dyadic in (True, False):
        assert detect_full(y, 2.0, dyadic).improved.tolist() == [30, 70]
    with pytest.raises(ValueError):
        detect_full(np.ones(2), 1.0)


@given(st.integers(3, 100), seeds, st.floats(-1e3, 1e3))
def test_detect_full_shift_invariant(n, seed, c):
    y = np.random.default_rng(seed).standard_normal(n) + step(n, n // 2 + 1, 3.0)
    a = detect_full(y, 1.0).improved
    b = detect_full(y + c, 1.0).improved
    # shifts change the data only through rounding; the centred sums absorb them
    assert a == b


def test_global_confidence_region():
    assert global_confidence_region(np.ones(20), [], 1.0) == []
    assert merge_intervals([(7, 11)]) == [(7, 11)]
    assert merge_intervals([(5, 9), (8, 12)]) == [(5, 12)]
    assert merge_intervals([(8, 12), (1, 3)]) == [(1, 3), (8, 12)]
    y = step(16, 9, 10.0)
    # intervals (7, 9), (9, 9) and (9, 11) merge into one
    assert global_confidence_region(y, [8, 9, 10], 2.0) == [(7, 11)]
