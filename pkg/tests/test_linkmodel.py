import math

import numpy as np
import pytest

from telesim import linkmodel as lm
from telesim.errors import ValidationError


def budget(**kw):
    base = dict(attenuation_db=31.0, n_hz=400.0, tau_s=3e-9,
                p_bsm_hz=1000.0, v0=0.9)
    base.update(kw)
    return lm.LinkBudget(**base)


class TestSnr:
    def test_paper_operating_point(self):
        # 31 dB, 400 Hz darks, 3 ns window
        assert lm.snr(budget()) == pytest.approx(10 ** -3.1 / 1.2e-6, rel=1e-12)

    def test_deep_attenuation(self):
        assert lm.snr(budget(attenuation_db=50.0)) == pytest.approx(
            10 ** -5.0 / 1.2e-6, rel=1e-12)
        assert lm.snr(budget(attenuation_db=50.0)) == pytest.approx(8.333, abs=5e-3)

    def test_unit_case(self):
        assert lm.snr(budget(attenuation_db=0.0, n_hz=1.0, tau_s=1.0)) == 1.0

    def test_noiseless_is_infinite_not_error(self):
        assert lm.snr(budget(n_hz=0.0)) == float("inf")
        assert lm.snr(budget(tau_s=0.0)) == float("inf")

    def test_monotone_decreasing(self, rng):
        for _ in range(1000):
            db = rng.uniform(0, 60)
            n = rng.uniform(1, 1000)
            tau = rng.uniform(1e-10, 1e-7)
            b = budget(attenuation_db=db, n_hz=n, tau_s=tau)
            assert lm.snr(budget(attenuation_db=db + 1, n_hz=n, tau_s=tau)) < lm.snr(b)
            assert lm.snr(budget(attenuation_db=db, n_hz=n * 1.1, tau_s=tau)) < lm.snr(b)
            assert lm.snr(budget(attenuation_db=db, n_hz=n, tau_s=tau * 1.1)) < lm.snr(b)


class TestClassicalBounds:
    def test_exact_relation(self):
        assert lm.ClassicalBounds.V_CLASSICAL == \
            2 * lm.ClassicalBounds.F_CLASSICAL - 1
        assert float(lm.ClassicalBounds.V_CLASSICAL) == pytest.approx(1 / 3)
        assert lm.ClassicalBounds.fidelity() == pytest.approx(2 / 3)


class TestPredict:
    def test_noiseless_limit_returns_v0(self):
        b = budget(n_hz=0.0, s2_frac=0.0, attenuation_db=0.0)
        pts = lm.predict_rate_visibility(b, [0.0])
        assert pts[0].visibility == pytest.approx(0.9)
        assert pts[0].rate_hz == pytest.approx(1000.0)

    def test_rate_floor_at_deep_attenuation(self):
        pts = lm.predict_rate_visibility(budget(), [150.0, 200.0])
        floor = 1000.0 * 400.0 * 3e-9
        for p in pts:
            assert p.rate_hz == pytest.approx(floor, rel=1e-4)

    def test_visibility_monotone_rate_decreasing(self):
        grid = np.arange(0, 80, 2.5)
        pts = lm.predict_rate_visibility(budget(s2_frac=0.1, v2=0.2), grid)
        vis = [p.visibility for p in pts]
        rate = [p.rate_hz for p in pts]
        assert all(v1 >= v2 - 1e-12 for v1, v2 in zip(vis, vis[1:]))
        assert all(r1 > r2 for r1, r2 in zip(rate, rate[1:]))
        assert rate[-1] > 1000.0 * 400.0 * 3e-9 * 0.999

    def test_crossover_matches_closed_form(self):
        b = budget(s2_frac=0.0)
        db_star = lm.crossover_attenuation_db(b)
        eta_star = 400.0 * 3e-9 / (3 * 0.9 - 1)
        assert db_star == pytest.approx(-10 * math.log10(eta_star), abs=1e-9)
        # and the model visibility at the crossover equals 1/3
        assert lm.model_visibility(b.at(db_star)) == pytest.approx(1 / 3, abs=1e-9)

    def test_crossover_unreachable_flagged(self):
        with pytest.raises(ValidationError):
            lm.crossover_attenuation_db(budget(v0=0.3))


class TestFitBudget:
    def test_exact_recovery(self):
        truth = budget(p_bsm_hz=1234.0, v0=0.87, s2_frac=0.15)
        grid = np.arange(0, 65, 5.0)
        pts = lm.predict_rate_visibility(truth, grid)
        fit = lm.fit_budget(grid, [p.rate_hz for p in pts],
                            [p.visibility for p in pts],
                            n_hz=400.0, tau_s=3e-9)
        assert not fit.flagged
        assert fit.budget.p_bsm_hz == pytest.approx(1234.0, rel=1e-6)
        assert fit.budget.v0 == pytest.approx(0.87, abs=1e-6)
        assert fit.budget.s2_frac == pytest.approx(0.15, abs=1e-6)

    def test_noisy_recovery(self, rng):
        truth = budget(p_bsm_hz=500.0, v0=0.9, s2_frac=0.0)
        grid = np.arange(0, 65, 5.0)
        pts = lm.predict_rate_visibility(truth, grid)
        rate = np.array([p.rate_hz for p in pts]) * rng.normal(1.0, 0.02, grid.size)
        vis = np.array([p.visibility for p in pts]) + rng.normal(0, 0.01, grid.size)
        fit = lm.fit_budget(grid, rate, np.clip(vis, -1, 1), n_hz=400.0, tau_s=3e-9)
        assert fit.budget.p_bsm_hz == pytest.approx(500.0, rel=0.1)
        assert fit.budget.v0 == pytest.approx(0.9, abs=0.05)

    def test_floor_only_points_flagged(self):
        truth = budget(p_bsm_hz=1000.0, v0=0.9)
        grid = np.array([150.0, 160.0, 170.0, 180.0])
        pts = lm.predict_rate_visibility(truth, grid)
        fit = lm.fit_budget(grid, [p.rate_hz for p in pts],
                            [p.visibility for p in pts], n_hz=400.0, tau_s=3e-9)
        assert fit.flagged

    def test_too_few_points_rejected(self):
        with pytest.raises(ValidationError):
            lm.fit_budget([0, 10, 20], [1, 2, 3], [0.9, 0.9, 0.9],
                          n_hz=400.0, tau_s=3e-9)


class TestEffectiveDarkRate:
    def test_zero_jitter_doubles(self):
        assert lm.effective_dark_rate_hz(580.0, 3000, 0.0) == pytest.approx(1160.0)

    def test_typical_geometry(self):
        eff = lm.effective_dark_rate_hz(580.0, 3000, 500.0)
        assert 580.0 < eff < 1160.0
