import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quantvol.bootstrap import BootstrapSpec
from quantvol.errors import DegenerateStatisticError
from quantvol.quantilogram import (
    CrossQuantilogramResult,
    auto_quantilogram,
    box_ljung,
    box_pierce,
    cross_quantilogram,
    hit_process,
    quantilogram_curve,
    quantilogram_grid,
)
from quantvol.series import DEFAULT_GRID, AlignedPair, QuantileRange, ReturnSeries

import _reference as ref


def make_pair(a, b):
    dates = np.datetime64("2001-01-01") + np.arange(len(a))
    return AlignedPair(ReturnSeries("a", dates, a), ReturnSeries("b", dates, b))


probs = st.integers(0, 20).map(lambda i: i / 20)


@st.composite
def ranges(draw):
    lo, hi = sorted(draw(st.lists(probs, min_size=2, max_size=2, unique=True)))
    return QuantileRange(lo, hi)


@st.composite
def pairs(draw, min_size=8, max_size=50):
    n = draw(st.integers(min_size, max_size))
    # eighths in [-100, 100]: exact floats with frequent ties that stay distinct under exp
    vals = st.lists(st.integers(-800, 800).map(lambda i: i / 8), min_size=n, max_size=n)
    return make_pair(np.array(draw(vals)), np.array(draw(vals)))


class TestHitProcess:
    def test_lower_tail(self):
        y = np.arange(1.0, 101.0)
        psi = hit_process(y, QuantileRange(0, 0.05)).psi
        assert np.all(psi[:5] == 0.95) and np.all(psi[5:] == -0.05)

    def test_full_range_is_zero(self):
        assert np.all(hit_process(np.random.default_rng(1).normal(size=30), QuantileRange(0, 1)).psi == 0)

    def test_middle_range_counts(self):
        psi = hit_process(np.arange(1.0, 101.0), QuantileRange(0.4, 0.6)).psi
        assert np.isclose(psi[psi > 0], 0.8).all() and np.sum(psi > 0) == 20
        assert np.isclose(psi[psi < 0], -0.2).all()

    def test_grid_partitions_sample(self, rng):
        y = rng.standard_t(3, size=997)
        inside = sum(hit_process(y, r).hits.astype(int) for r in DEFAULT_GRID)
        assert np.all(inside == 1)

    @given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=60), ranges())
    def test_values_and_mean(self, xs, r):
        psi = hit_process(xs, r).psi
        w = r.hi - r.lo
        assert np.all((psi == 1 - w) | (psi == -w))
        assert -w - 1e-12 <= psi.mean() <= 1 - w + 1e-12
        assert psi.tolist() == ref.hits(xs, r.lo, r.hi)


class TestCrossQuantilogram:
    def test_self_correlation_at_lag_zero(self, rng):
        y = rng.normal(size=200)
        r = QuantileRange(0.1, 0.3)
        assert math.isclose(cross_quantilogram(make_pair(y, y), r, r, 0), 1.0, rel_tol=1e-15)

    def test_lagged_copy(self, rng):
        b = rng.normal(size=300)
        a = np.roll(b, 1)
        r = QuantileRange(0, 0.2)
        # circular shift: hits of a at t equal hits of b at t-1 for t >= 1
        assert math.isclose(cross_quantilogram(make_pair(a, b), r, r, 1), 1.0, rel_tol=1e-12)

    def test_independent_large_sample(self):
        g = np.random.default_rng(7)
        pair = make_pair(g.normal(size=10000), g.normal(size=10000))
        for r in (QuantileRange(0, 0.05), QuantileRange(0.4, 0.6), QuantileRange(0.95, 1)):
            assert abs(cross_quantilogram(pair, r, r, 1)) < 0.05

    def test_degenerate(self):
        pair = make_pair(np.ones(20), np.arange(20.0))
        with pytest.raises(DegenerateStatisticError):
            cross_quantilogram(pair, QuantileRange(0.2, 0.4), QuantileRange(0.2, 0.4), 1)

    def test_lag_guard(self):
        pair = make_pair(np.arange(3.0), np.arange(3.0))
        with pytest.raises(ValueError):
            cross_quantilogram(pair, QuantileRange(0, 0.5), QuantileRange(0, 0.5), 3)
        with pytest.raises(ValueError):
            cross_quantilogram(pair, QuantileRange(0, 0.5), QuantileRange(0, 0.5), -1)

    @given(pairs(), ranges(), ranges(), st.integers(0, 5))
    def test_matches_reference_exactly(self, pair, r1, r2, k):
        want = ref.cross_quantilogram(pair.a.ret.tolist(), pair.b.ret.tolist(), (r1.lo, r1.hi), (r2.lo, r2.hi), k)
        x1 = np.asarray(ref.hits(pair.a.ret.tolist(), r1.lo, r1.hi))[k:]
        x2 = np.asarray(ref.hits(pair.b.ret.tolist(), r2.lo, r2.hi))[: len(pair) - k]
        if want is None or np.ptp(x1) == 0 or np.ptp(x2) == 0:
            with pytest.raises(DegenerateStatisticError):
                cross_quantilogram(pair, r1, r2, k)
            return
        assert cross_quantilogram(pair, r1, r2, k) == want

    @given(pairs(), ranges(), ranges(), st.integers(0, 5))
    def test_bounded_and_rank_invariant(self, pair, r1, r2, k):
        try:
            rho = cross_quantilogram(pair, r1, r2, k)
        except DegenerateStatisticError:
            return
        assert abs(rho) <= 1.0 + 1e-15
        scale = 1.0 / 50.0
        moved = make_pair(np.exp(pair.a.ret * scale), np.arctan(pair.b.ret) * 3.0 + 1.0)
        for before, after in ((pair.a.ret, moved.a.ret), (pair.b.ret, moved.b.ret)):
            order = np.argsort(before, kind="stable")
            # the transforms must stay strictly increasing after rounding
            assert np.array_equal(np.diff(before[order]) > 0, np.diff(after[order]) > 0)
        assert cross_quantilogram(moved, r1, r2, k) == rho

    @given(pairs(), ranges(), ranges())
    def test_lag_zero_symmetry(self, pair, r1, r2):
        mirrored = AlignedPair(pair.b, pair.a)
        try:
            rho = cross_quantilogram(pair, r1, r2, 0)
        except DegenerateStatisticError:
            return
        assert math.isclose(cross_quantilogram(mirrored, r2, r1, 0), rho, rel_tol=1e-14, abs_tol=1e-15)


class TestPortmanteau:
    def test_box_ljung_hand_value(self):
        q = box_ljung([0.1, 0.05], 100)
        assert abs(q[1] - 100 * 102 * (0.01 / 99 + 0.0025 / 98)) < 1e-10
        assert abs(q[1] - 1.2905) < 1e-4

    def test_zero(self):
        assert np.all(box_ljung(np.zeros(5), 50) == 0)
        assert np.all(box_pierce(np.zeros(5), 50) == 0)

    def test_box_pierce_hand_value(self):
        assert abs(box_pierce([0.1], 100)[0] - 1.0) < 1e-12

    def test_guard(self):
        with pytest.raises(ValueError):
            box_ljung([0.1, 0.2], 2)
        with pytest.raises(ValueError):
            box_pierce([0.1, 0.2], 1)

    @given(st.lists(st.floats(-1, 1), min_size=1, max_size=20), st.integers(21, 5000))
    def test_monotone_and_ordered(self, rho, T):
        ql = box_ljung(rho, T)
        qp = box_pierce(rho, T)
        assert np.all(np.diff(ql) >= 0)
        assert np.all(qp <= ql * (1 + 1e-12))


class TestCurve:
    def test_single_lag_consistency(self, rng):
        pair = make_pair(rng.normal(size=300), rng.normal(size=300))
        r = QuantileRange(0, 0.1)
        res = quantilogram_curve(pair, r, r, max_lag=1, boot=BootstrapSpec(B=50, seed=1))
        assert res.rho[0] == cross_quantilogram(pair, r, r, 1)
        assert res.lags.tolist() == [1]

    def test_result_invariants(self, rng):
        pair = make_pair(rng.normal(size=400), rng.normal(size=400))
        r = QuantileRange(0.05, 0.1)
        res = quantilogram_curve(pair, r, QuantileRange(0, 0.05), max_lag=8, boot=BootstrapSpec(B=120, seed=3))
        assert np.all(res.ci_lo <= 0) and np.all(res.ci_hi >= 0)
        assert np.all(np.abs(res.rho) <= 1)
        assert np.all(np.diff(res.q_bl) >= 0)
        np.testing.assert_allclose(res.q_bl, box_ljung(res.rho, 400))
        assert res.significant.shape == (8,)

    def test_grid_cells_do_not_interact(self, rng):
        pair = make_pair(rng.normal(size=250), rng.normal(size=250))
        boot = BootstrapSpec(B=60, seed=5)
        cells = [(r, r) for r in DEFAULT_GRID[:3]]
        together = quantilogram_grid(pair, cells, 3, boot)
        alone = quantilogram_curve(pair, *cells[1], max_lag=3, boot=boot)
        np.testing.assert_array_equal(together[1].ci_lo, alone.ci_lo)
        np.testing.assert_array_equal(together[1].q_bl_crit, alone.q_bl_crit)

    def test_deterministic(self, rng):
        pair = make_pair(rng.normal(size=200), rng.normal(size=200))
        r = QuantileRange(0.9, 1)
        a = quantilogram_curve(pair, r, r, 4, BootstrapSpec(B=40, seed=9))
        b = quantilogram_curve(pair, r, r, 4, BootstrapSpec(B=40, seed=9))
        assert a.to_csv() == b.to_csv()

    def test_auto_quantilogram(self):
        g = np.random.default_rng(11)
        y = g.normal(size=500)
        dates = np.datetime64("2001-01-01") + np.arange(500)
        res = auto_quantilogram(ReturnSeries("y", dates, y), QuantileRange(0.4, 0.6), 5, BootstrapSpec(B=100, seed=2))
        assert res.labels == ("y", "y")
        assert res.significant.sum() <= 2

    def test_serialization(self, rng):
        pair = make_pair(rng.normal(size=150), rng.normal(size=150))
        res = quantilogram_curve(pair, QuantileRange(0, 0.2), QuantileRange(0, 0.2), 3, BootstrapSpec(B=30))
        back = CrossQuantilogramResult.from_dict(res.to_dict())
        np.testing.assert_array_equal(back.rho, res.rho)
        np.testing.assert_array_equal(back.q_bl_crit, res.q_bl_crit)
        assert back.tau1 == res.tau1
        header = res.to_csv().splitlines()[0]
        assert header == "lag,rho,ci_lo,ci_hi,q_bl,q_crit"

    def test_too_short(self):
        pair = make_pair(np.arange(5.0), np.arange(5.0))
        with pytest.raises(ValueError):
            quantilogram_curve(pair, QuantileRange(0, 0.5), QuantileRange(0, 0.5), max_lag=5)
