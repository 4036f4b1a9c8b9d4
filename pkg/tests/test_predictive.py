import math

import numpy as np
import pytest

from crease import gp
from crease.fit import PosteriorDraws
from crease.model import AbilityParams, career_from_scores
from crease.predictive import (
    compare,
    conditional_log_mu2,
    extrapolate,
    nu_curve,
    nu_of_params,
    nu_values,
    pair_outcomes,
)


def make_draws(c, d, m, sigma, ell, log_mu2):
    log_mu2 = np.atleast_2d(np.asarray(log_mu2, dtype=float))
    n = log_mu2.shape[0]
    col = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
    return PosteriorDraws(col(c), col(d), col(m), col(sigma), col(ell), log_mu2, np.zeros_like(log_mu2))


def brute_nu(p, x_max=100_000):
    a = np.arange(x_max)
    mu = p.mu2 + (p.mu1 - p.mu2) * np.exp(-a / p.big_l)
    return float(np.cumprod(mu / (mu + 1.0)).sum())


class TestNu:
    @pytest.mark.parametrize("mu", [1.0, 9.0, 25.0, 49.99])
    def test_geometric(self, mu):
        assert abs(nu_of_params(AbilityParams.constant(mu)) - mu) < 1e-9

    def test_curved_bounds_and_oracle(self):
        p = AbilityParams(20.0, 40.0, 5.0)
        nu = nu_of_params(p)
        assert 20.0 < nu < 40.0
        assert abs(nu - brute_nu(p)) < 1e-6

    def test_vectorised_matches_scalar(self):
        rng = np.random.default_rng(8)
        c, d, mu2 = rng.uniform(0.05, 1, 40), rng.uniform(0.01, 1, 40), rng.uniform(1, 150, 40)
        got = nu_values(c, d, mu2)
        want = [nu_of_params(AbilityParams.from_shape(*v)) for v in zip(c, d, mu2)]
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_threads_do_not_change_result(self, monkeypatch):
        import crease.predictive as pred

        monkeypatch.setattr(pred, "BLOCK_ELEMENTS", 50_000)
        rng = np.random.default_rng(2)
        args = rng.uniform(0.1, 1, 300), rng.uniform(0.05, 0.5, 300), rng.uniform(5, 90, 300)
        assert np.array_equal(nu_values(*args), nu_values(*args, threads=4))

    def test_monotone_in_mu2(self):
        mu2 = np.linspace(1, 200, 400)
        assert np.all(np.diff(nu_values(0.4, 0.2, mu2)) > 0)


class TestCurve:
    def test_zero_sigma_point_mass(self):
        draws = make_draws(0.5, 0.2, 30.0, 0.0, 10.0, np.full((5, 12), math.log(30.0)))
        curve = nu_curve(None, draws)
        flat = nu_of_params(AbilityParams.from_shape(0.5, 0.2, 30.0))
        np.testing.assert_allclose(curve.median, flat, rtol=1e-12)
        assert np.array_equal(curve.band_low, curve.median)
        assert np.array_equal(curve.band_high, curve.median)

    def test_two_draws_full_level(self):
        rng = np.random.default_rng(0)
        log_mu2 = np.log(rng.uniform(10, 60, (2, 15)))
        draws = make_draws([0.3, 0.6], [0.1, 0.2], 25.0, 0.1, 10.0, log_mu2)
        curve = nu_curve(None, draws, level=1.0)
        each = nu_values(draws.c[:, None], draws.d[:, None], np.exp(log_mu2))
        np.testing.assert_allclose(curve.band_low, each.min(axis=0))
        np.testing.assert_allclose(curve.band_high, each.max(axis=0))

    @pytest.mark.parametrize("level", [0.5, 0.68, 0.95])
    def test_band_order(self, level):
        rng = np.random.default_rng(1)
        draws = make_draws(rng.uniform(0.1, 0.9, 80), rng.uniform(0.05, 0.5, 80), 25.0, 0.1, 10.0,
                           np.log(rng.uniform(10, 60, (80, 20))))
        curve = nu_curve(None, draws, level=level)
        assert np.all(curve.band_low <= curve.median) and np.all(curve.median <= curve.band_high)
        assert np.all(curve.band_low > 0) and len(curve) == 20

    def test_length_mismatch(self):
        draws = make_draws(0.5, 0.2, 30.0, 0.1, 10.0, np.zeros((3, 4)))
        with pytest.raises(ValueError):
            nu_curve(career_from_scores("p", [1, 2, 3]), draws)


class TestExtrapolate:
    def test_independence_limit(self):
        rng = np.random.default_rng(3)
        f = math.log(30.0) + 0.3 * rng.standard_normal(10)
        mean, cov = conditional_log_mu2(f, 30.0, 0.3, 1e-3, 1)
        assert mean[0] == pytest.approx(math.log(30.0), abs=1e-12)
        assert cov[0, 0] == pytest.approx(0.09, rel=1e-12)

    def test_zero_sigma_flat(self):
        draws = make_draws(0.5, 0.2, 30.0, 0.0, 10.0, np.full((4, 6), math.log(30.0)))
        fc = extrapolate(None, draws, horizon=5)
        flat = nu_of_params(AbilityParams.from_shape(0.5, 0.2, 30.0))
        np.testing.assert_allclose(fc.curve.median, flat, rtol=1e-12)
        assert fc.next_innings_nu == pytest.approx(flat, rel=1e-12)
        assert list(fc.curve.t_values) == [7, 8, 9, 10, 11]

    def test_two_point_kriging(self):
        m, sigma, ell = 25.0, 0.4, 3.0
        f = np.array([math.log(20.0), math.log(35.0)])
        k = lambda dt: sigma**2 * math.exp(-0.5 * (dt / ell) ** 2)
        v = sigma**2 * (1 + 1e-8)
        a, b = v, k(1.0)
        det = a * a - b * b
        inv = np.array([[a, -b], [-b, a]]) / det
        kstar = np.array([k(2.0), k(1.0)])
        expected_mean = math.log(m) + kstar @ inv @ (f - math.log(m))
        expected_var = sigma**2 - kstar @ inv @ kstar
        mean, cov = conditional_log_mu2(f, m, sigma, ell, 1)
        assert mean[0] == pytest.approx(expected_mean, abs=1e-9)
        assert cov[0, 0] == pytest.approx(expected_var, abs=1e-9)

    def test_continuity_long_length_scale(self):
        ell = 1e3
        f = np.full(30, math.log(40.0))
        mean, _ = conditional_log_mu2(f, 25.0, 0.3, ell, 1)
        # the fixed 1e-8 relative jitter leaves a ~5e-6 floor at this length scale
        assert abs(mean[0] - f[-1]) < 10.0 / ell**2

    def test_reproducible(self):
        rng = np.random.default_rng(6)
        draws = make_draws(0.4, 0.1, 30.0, 0.2, rng.uniform(2, 50, 10), np.log(rng.uniform(20, 40, (10, 8))))
        a = extrapolate(None, draws, horizon=4, seed=11)
        b = extrapolate(None, draws, horizon=4, seed=11)
        assert np.array_equal(a.log_mu2, b.log_mu2)
        sub = extrapolate(None, draws.subset(slice(0, 5)), horizon=4, seed=11)
        assert np.array_equal(sub.log_mu2, a.log_mu2[:5])

    def test_bad_horizon(self):
        draws = make_draws(0.4, 0.1, 30.0, 0.2, 5.0, np.zeros((2, 3)))
        with pytest.raises(ValueError):
            extrapolate(None, draws, horizon=0)


def geometric_pmf(mu, n):
    h = 1.0 / (mu + 1.0)
    return h * (1 - h) ** np.arange(n)


def forecast_for(draws):
    return extrapolate(None, draws, horizon=1, seed=0)


class TestCompare:
    def test_symmetry(self):
        rng = np.random.default_rng(12)
        draws = make_draws(rng.uniform(0.2, 0.8, 30), rng.uniform(0.05, 0.3, 30), 30.0, 0.15, 20.0,
                           np.log(rng.uniform(20, 50, (30, 10))))
        fc = forecast_for(draws)
        cmp = compare(fc, draws, fc, draws, seed=5)
        assert cmp.expected_margin == 0.0
        assert cmp.p_outscore == pytest.approx((1 - cmp.p_tie) / 2, abs=1e-12)
        sub = compare(fc, draws, fc, draws, seed=5, n_draws=12)
        assert sub.expected_margin == 0.0 and sub.p_outscore == sub.p_reverse

    def test_geometric_oracle(self):
        n = 10_001
        pa, pb = geometric_pmf(99.0, n), geometric_pmf(9.0, n)
        p_out = 0.0
        for start in range(0, n, 1000):
            block = np.add.outer(np.arange(start, min(n, start + 1000)), -np.arange(n)) > 0
            p_out += float(pa[start:start + 1000] @ block @ pb)
        got = pair_outcomes(AbilityParams.constant(99.0), AbilityParams.constant(9.0))
        assert abs(got[0] - p_out) < 1e-6
        assert abs(sum(got) - 1.0) < 1e-9

    def test_degenerate_opponent(self):
        pa = AbilityParams(12.0, 40.0, 4.0)
        p_out, _, _ = pair_outcomes(pa, AbilityParams.constant(1e-12))
        assert p_out == pytest.approx(1.0 - 1.0 / 13.0, abs=1e-10)

    def test_outcomes_sum_to_one(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            pa = AbilityParams.from_shape(*rng.uniform([0.05, 0.01, 1], [1, 1, 150]))
            pb = AbilityParams.from_shape(*rng.uniform([0.05, 0.01, 1], [1, 1, 150]))
            assert abs(sum(pair_outcomes(pa, pb)) - 1.0) < 1e-9

    def test_mixture_equals_pair_average(self):
        rng = np.random.default_rng(14)
        da = make_draws(rng.uniform(0.2, 0.8, 4), rng.uniform(0.05, 0.3, 4), 30.0, 0.1, 10.0,
                        np.log(rng.uniform(20, 60, (4, 5))))
        db = make_draws(rng.uniform(0.2, 0.8, 3), rng.uniform(0.05, 0.3, 3), 30.0, 0.1, 10.0,
                        np.log(rng.uniform(10, 40, (3, 5))))
        fa, fb = forecast_for(da), forecast_for(db)
        cmp = compare(fa, da, fb, db)
        pairs = [
            pair_outcomes(
                AbilityParams.from_shape(da.c[i], da.d[i], math.exp(fa.log_mu2[i, 0])),
                AbilityParams.from_shape(db.c[j], db.d[j], math.exp(fb.log_mu2[j, 0])),
            )
            for i in range(4) for j in range(3)
        ]
        avg = np.mean(pairs, axis=0)
        assert cmp.p_outscore == pytest.approx(avg[0], abs=1e-12)
        assert cmp.p_tie == pytest.approx(avg[1], abs=1e-12)
        assert cmp.p_reverse == pytest.approx(avg[2], abs=1e-12)
        assert abs(cmp.p_outscore + cmp.p_tie + cmp.p_reverse - 1) < 1e-9
