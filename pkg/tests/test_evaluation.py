import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from quantvol import evaluation
from quantvol.errors import DegenerateTestError, EstimationError, FitError
from quantvol.evaluation import (
    LossSeries,
    dmw_test,
    insample_compare,
    newey_west_avar,
    nw_lags,
    parse_models,
    proxy_scale_ok,
    qlike,
    rolling_oos,
)
from quantvol.qa import fit_qa
from quantvol.series import ReturnSeries
from quantvol.simulate import DgpSpec, simulate

import _reference as ref


class TestQlike:
    def test_minimum(self):
        assert qlike(3.0, 3.0) == 0.0

    def test_hand_value(self):
        assert abs(qlike(1.0, 2.0) - (2 - math.log(2) - 1)) < 1e-10
        assert abs(qlike(1.0, 2.0) - 0.30685) < 1e-5

    def test_domain(self):
        with pytest.raises(ValueError):
            qlike(0.0, 1.0)
        with pytest.raises(ValueError):
            qlike(1.0, -1.0)
        with pytest.raises(ValueError):
            qlike(np.array([1.0, np.nan]), np.array([1.0, 1.0]))

    def test_vectorized(self):
        out = qlike(np.array([1.0, 2.0]), np.array([2.0, 2.0]))
        assert out.shape == (2,) and out[1] == 0.0

    def test_nonnegative_on_grid(self):
        r = np.exp(np.linspace(-5, 5, 2001))
        loss = qlike(np.ones_like(r), r)
        assert np.all(loss >= 0)
        assert np.all(loss[r != 1.0] > 0)


class TestNeweyWest:
    def test_hand_value(self):
        assert abs(newey_west_avar([1, -1, 1, -1], 1) - 0.25) < 1e-10

    def test_no_lags_is_variance(self, rng):
        d = rng.normal(size=50)
        assert newey_west_avar(d, 0) == pytest.approx(np.var(d), rel=1e-14)

    def test_iid_consistency(self):
        g = np.random.default_rng(1)
        est = [newey_west_avar(g.normal(scale=2.0, size=20_000), nw_lags(20_000)) for _ in range(40)]
        assert np.mean(est) == pytest.approx(4.0, rel=0.02)

    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=40), st.integers(0, 6))
    def test_matches_reference(self, d, lags):
        assert newey_west_avar(d, lags) == pytest.approx(ref.newey_west(d, lags), abs=1e-9)

    def test_guards(self):
        with pytest.raises(ValueError):
            newey_west_avar([1.0], 0)
        with pytest.raises(ValueError):
            newey_west_avar([1.0, 2.0], -1)


def test_nw_lags_exact_cube_roots():
    assert [nw_lags(n) for n in (1, 7, 8, 26, 27, 999, 1000, 454, 10**6, 10**6 - 1)] == [1, 1, 2, 2, 3, 9, 10, 7, 100, 99]


def losses(values, name, start="2010-01-01"):
    dates = np.datetime64(start) + np.arange(len(values))
    return LossSeries(dates, np.asarray(values, float), name)


class TestDmw:
    def test_identical_is_degenerate(self, rng):
        x = rng.chisquare(1, size=100)
        with pytest.raises(DegenerateTestError):
            dmw_test(losses(x, "a"), losses(x, "b"))

    def test_antisymmetry(self, rng):
        a, b = rng.chisquare(1, size=200), rng.chisquare(1, size=200)
        r1 = dmw_test(losses(a, "a"), losses(b, "b"))
        r2 = dmw_test(losses(b, "b"), losses(a, "a"))
        assert r1.statistic == -r2.statistic
        assert r1.p_value == r2.p_value
        assert r1.nw_lags == nw_lags(200) == 5

    def test_sign_favours_smaller_alt_loss(self, rng):
        base = rng.chisquare(1, size=300) + 0.5
        res = dmw_test(losses(base, "gjr"), losses(base * 0.7, "qa"))
        assert res.statistic > 0 and res.mean_diff > 0
        assert res.base == "gjr" and res.alt == "qa" and res.stars == "**"
        assert 0 <= res.p_value <= 1

    def test_guards(self, rng):
        with pytest.raises(ValueError):
            dmw_test(rng.normal(size=29), rng.normal(size=29))
        with pytest.raises(ValueError):
            dmw_test(losses(rng.normal(size=40), "a"), losses(rng.normal(size=40), "b", start="2011-01-01"))

    def test_missing_days_dropped(self, rng):
        a, b = rng.chisquare(1, size=100), rng.chisquare(1, size=100)
        a[5] = np.nan
        res = dmw_test(a, b)
        assert res.T == 99

    def test_size_under_equal_accuracy(self):
        g = np.random.default_rng(2)
        inside = 0
        trials = 300
        for _ in range(trials):
            rv = g.chisquare(1, size=500)
            f1 = np.exp(g.normal(scale=0.3, size=500))
            f2 = np.exp(g.normal(scale=0.3, size=500))
            inside += abs(dmw_test(qlike(f1, rv), qlike(f2, rv)).statistic) < 1.96
        assert 0.90 <= inside / trials <= 0.99


def test_insample_collapse_is_degenerate():
    sim = simulate(DgpSpec("qa", 1500, seed=4))
    fit = fit_qa(sim.y.ret, sim.driver.ret)
    import dataclasses

    unit = dataclasses.replace(fit, sigma2=fit.base.h.copy())
    with pytest.raises(DegenerateTestError):
        insample_compare(fit.base, unit, sim.y.rv)
    res = insample_compare(fit.base, fit, sim.y.rv)
    assert res.T == 1500 and res.nw_lags == 11


def test_proxy_scale():
    assert proxy_scale_ok([1.0, 2.0], [1.5, 1.5])
    assert not proxy_scale_ok([100.0, 200.0], [1.0, 1.0])


class TestParseModels:
    def test_names(self):
        specs = parse_models("gjr, gjr-t,heavy,qa-gjr,qa-heavy,qa-gjr_t,qa-gjr-resid,garchx,garchx-resid")
        kinds = [(s.kind, s.base, s.tail.source) for s in specs]
        assert kinds[0] == ("base", "gjr", "returns")
        assert kinds[1] == ("base", "gjr_t", "returns")
        assert kinds[5] == ("qa", "gjr_t", "returns")
        assert kinds[6] == ("qa", "gjr", "residuals")
        assert kinds[8] == ("garch_x", "gjr", "residuals")
        assert specs[4].needs_rv and not specs[7].needs_rv

    def test_unknown(self):
        with pytest.raises(ValueError):
            parse_models("egarch")
        with pytest.raises(ValueError):
            parse_models("gjr-resid")
        with pytest.raises(ValueError):
            parse_models("")


@pytest.fixture(scope="module")
def oos_data():
    sim = simulate(DgpSpec("qa", 330, seed=21))
    return sim.y, sim.driver


class TestRollingOos:
    def test_alignment_and_no_look_ahead(self, oos_data):
        y, d = oos_data
        out = rolling_oos(y, d, "gjr,qa-gjr", window=300)
        assert set(out) == {"gjr", "qa-gjr"}
        for ls in out.values():
            assert len(ls) == 30
            np.testing.assert_array_equal(ls.dates, y.dates[300:])
            assert np.all(ls.fit_through < ls.dates)
            np.testing.assert_array_equal(ls.fit_through, y.dates[299:-1])
            assert np.all(ls.loss >= 0) and ls.n_missing == 0

    def test_matches_direct_refit(self, oos_data):
        y, d = oos_data
        out = rolling_oos(y, d, "qa-gjr", window=320)
        fit = fit_qa(y.ret[9:329], d.ret[9:329])
        from quantvol.qa import forecast_one_step

        assert out["qa-gjr"].forecast[-1] == forecast_one_step(fit)
        assert out["qa-gjr"].loss[-1] == qlike(forecast_one_step(fit), y.rv[329])

    def test_single_forecast(self, oos_data):
        y, _ = oos_data
        out = rolling_oos(y, None, "gjr", window=len(y) - 1)
        assert len(out["gjr"]) == 1

    def test_deterministic_and_parallel_invariant(self, oos_data):
        y, d = oos_data
        a = rolling_oos(y, d, "gjr,heavy,garchx", window=318)
        b = rolling_oos(y, d, "gjr,heavy,garchx", window=318, n_jobs=2)
        for k in a:
            np.testing.assert_array_equal(a[k].loss, b[k].loss)

    def test_guards(self, oos_data):
        y, d = oos_data
        with pytest.raises(ValueError):
            rolling_oos(y, d, "gjr", window=len(y))
        with pytest.raises(ValueError):
            rolling_oos(y, None, "qa-gjr", window=300)
        with pytest.raises(ValueError):
            rolling_oos(ReturnSeries("x", y.dates, y.ret), None, "gjr", window=300)
        rv = np.array(y.rv)
        rv[-1] = 0.0
        with pytest.raises(ValueError, match="proxy"):
            rolling_oos(ReturnSeries("x", y.dates, y.ret, rv), None, "gjr", window=300)

    def test_fallback_once_then_missing(self, oos_data, monkeypatch):
        y, _ = oos_data
        real = evaluation.fit_base
        calls = {"n": 0}
        fail_on = {3, 10, 11}

        def flaky(yy, model, rm):
            i = calls["n"]
            calls["n"] += 1
            if i in fail_on:
                raise FitError("injected")
            return real(yy, model, rm)

        monkeypatch.setattr(evaluation, "fit_base", flaky)
        out = rolling_oos(y, None, "gjr", window=300, max_failure_rate=0.2)["gjr"]
        assert out.fallback.tolist().count(True) == 2
        assert out.fallback[3] and out.fallback[10] and not out.fallback[11]
        assert np.isnan(out.loss[11]) and out.n_missing == 1

    def test_too_many_failures_abort(self, oos_data, monkeypatch):
        y, _ = oos_data

        def broken(yy, model, rm):
            raise FitError("injected")

        monkeypatch.setattr(evaluation, "fit_base", broken)
        with pytest.raises(EstimationError, match="30 of 30"):
            rolling_oos(y, None, "gjr", window=300)
