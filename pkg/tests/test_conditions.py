import csv
import math

import mpmath
import numpy as np
import pytest

from phivar import conditions as C
from phivar.funcs import ExpBeta, ExpLogPow, Power, PowerLogLogMinus, PowerLogLogPlus


def _power_cfg(p=2.0, alpha=2.0, c=1.0):
    return C.Theorem1Config(Power(p), Power(p), alpha, c)


class TestConfig:
    def test_defaults(self):
        cfg = _power_cfg(alpha=0.5)
        assert cfg.M == 1.0 and cfg.K_alpha == 4.0
        assert _power_cfg(alpha=2.0).K_alpha == 1.0

    @pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(C=-1.0), dict(M=math.inf)])
    def test_invalid(self, kw):
        args = dict(phi=Power(2), psi=Power(2), alpha=2.0, C=1.0) | kw
        with pytest.raises(ValueError):
            C.Theorem1Config(**args)


class TestYm:
    def test_power_oracle(self):
        mpmath.mp.dps = 30
        p, alpha, m = 2.0, 2.0, 10
        f = lambda e: mpmath.log(1 + 1 / e) ** (1 / alpha) * e ** (1 / p - 1)
        ref = float(mpmath.quad(f, [0, mpmath.mpf(2) ** -m]) / p)
        np.testing.assert_allclose(C.y_m(_power_cfg(p, alpha), m), ref, rtol=1e-6)

    def test_strictly_decreasing(self):
        cfg = _power_cfg()
        y = [C.y_m(cfg, m) for m in range(41)]
        assert np.all(np.diff(y) < 0)

    def test_expbeta_oracle(self):
        mpmath.mp.dps = 30
        beta0, alpha = 1.0, 2.0
        cfg = C.Theorem1Config(ExpBeta(0.8), ExpBeta(beta0), alpha, 1.0)
        top = mpmath.log(2) ** -beta0
        f = lambda u: mpmath.log(1 + mpmath.exp(u ** (-1 / beta0))) ** (1 / alpha)
        ref = float(mpmath.quad(f, [0, top]))
        np.testing.assert_allclose(C.y_m(cfg, 1), ref, rtol=1e-6)
        assert C.y_m(cfg, 5) < C.y_m(cfg, 1)

    def test_far_tail_in_log_space(self):
        cfg = _power_cfg()
        ly = C.log_y_m(cfg, 5000)
        assert np.isfinite(ly) and ly < -1000

    def test_negative_m(self):
        with pytest.raises(ValueError):
            C.y_m(_power_cfg(), -1)


class TestXm:
    def test_K_alpha_p_oracle(self):
        mpmath.mp.dps = 30
        for alpha, p in [(2.0, 2.0), (1.0, 1.0), (1.0, 4.0), (0.5, 2.0)]:
            # v = w^p makes the integrand bounded, so tanh-sinh is accurate
            f = lambda w: mpmath.log(1 + w ** -p) ** (1 / alpha)
            ref = float(mpmath.quad(f, [0, 1]))
            np.testing.assert_allclose(C.K_alpha_p(alpha, p), ref, rtol=1e-10)

    @pytest.mark.parametrize("p,alpha", [(2.0, 2.0), (1.0, 1.0), (4.0, 0.5)])
    def test_denominator_scaling(self, p, alpha):
        cfg = _power_cfg(p, alpha)
        K = C.K_alpha_p(alpha, p)
        for m in (5, 10, 20):
            den = Power(p).inverse(2.0 ** -m) / (cfg.K_alpha * C.x_m(cfg, m))
            np.testing.assert_allclose(den * 2 ** (m / p), K, rtol=1e-6)

    def test_m_independent_for_equal_powers(self):
        p, alpha = 2.0, 1.5
        cfg = _power_cfg(p, alpha)
        ref = 1 / (cfg.K_alpha * C.K_alpha_p(alpha, p))
        np.testing.assert_allclose([C.x_m(cfg, m) for m in (0, 3, 10, 40)], ref, rtol=1e-6)

    def test_doubling_C(self):
        p = 3.0
        a, b = _power_cfg(p, 2.0, 1.0), _power_cfg(p, 2.0, 2.0)
        for m in (2, 9):
            np.testing.assert_allclose(C.x_m(b, m) / C.x_m(a, m), 2 ** (1 / p), rtol=1e-13)

    @pytest.mark.parametrize("case,kw", [(1, dict(p=2, alpha=2)), (1, dict(p=1, alpha=1)),
                                         (2, dict(p=2, alpha=2)), (2, dict(p=4, alpha=1))])
    def test_log_growth(self, case, kw):
        # x_m^α ~ const·log m; over [50, 200] the offset inside log*_2 still
        # inflates the fitted exponent, which drifts down to 1 as m grows
        cfg = C.preset(case, **kw)
        exps = []
        for lo in (50, 10**4, 10**6):
            ms = np.geomspace(lo, 4 * lo, 30).round().astype(int)
            la = np.array([cfg.alpha * C.log_x_m(cfg, int(m)) for m in ms])
            exps.append(np.polyfit(np.log(np.log(ms)), la, 1)[0])
        assert np.all(np.diff(exps) < 0)
        assert exps[0] > 1
        assert abs(exps[-1] - 1) < 0.15


class TestPresets:
    def test_case1(self):
        cfg = C.preset(1, p=2, alpha=2)
        assert cfg.phi == PowerLogLogMinus(2, 2) and cfg.psi == Power(2)
        K = C.K_alpha_p(2, 2)
        np.testing.assert_allclose(cfg.C, 3 * K ** 2, rtol=1e-14)
        lit = C.preset(1, p=2, alpha=2, constant="literal")
        np.testing.assert_allclose(lit.C, 3 * K ** -2, rtol=1e-14)

    def test_case2(self):
        cfg = C.preset(2, p=4, alpha=1)
        assert cfg.phi == Power(4) and cfg.psi == PowerLogLogPlus(4, 1)

    def test_case3(self):
        cfg = C.preset(3, alpha=2, beta0=1, beta=1.4)
        assert cfg.phi == ExpBeta(1.4) and cfg.psi == ExpBeta(1) and cfg.C == 1.0
        with pytest.raises(ValueError, match="beta <"):
            C.preset(3, alpha=2, beta0=1, beta=1.6)
        with pytest.raises(ValueError, match="beta0 >"):
            C.preset(3, alpha=2, beta0=0.4, beta=0.2)

    def test_case4(self):
        cfg = C.preset(4, c=2, r=1)
        assert cfg.phi == ExpLogPow(2, 2) and cfg.psi == ExpLogPow(2, 1)
        with pytest.raises(ValueError, match="v > r"):
            C.preset(4, c=1, r=1, v=1)

    def test_bad_case(self):
        with pytest.raises(ValueError):
            C.preset(5)
        with pytest.raises(ValueError):
            C.preset(1, constant="other")


class TestSeriesCheck:
    def test_case1_converges(self):
        v = C.series_check(C.preset(1, p=2, alpha=2), 200)
        assert v.status == C.CONVERGES

    def test_small_constant_does_not_converge(self):
        cfg = C.preset(1, p=2, alpha=2)
        v = C.series_check(C.Theorem1Config(cfg.phi, cfg.psi, cfg.alpha, cfg.C / 100), 200)
        assert v.status != C.CONVERGES
        sums = np.array([s for _, s in v.partial_sums])
        assert sums[-1] > 1.5 * sums[len(sums) // 2]

    def test_literal_constant_diverges(self):
        v = C.series_check(C.preset(1, p=2, alpha=2, constant="literal"), 200)
        assert v.status == C.DIVERGES

    def test_case4_double_exponential(self):
        v = C.series_check(C.preset(4, c=1, r=1), 50)
        assert v.status == C.CONVERGES and v.tail_ratio < 1e-12

    def test_case3_small_beta(self):
        v = C.series_check(C.preset(3, alpha=2, beta0=1, beta=0.3), 200)
        assert v.status == C.CONVERGES

    def test_partial_sums_monotone(self):
        v = C.series_check(C.preset(2, p=2, alpha=2), 100)
        terms = np.array([row[3] for row in v.table])
        assert np.all(terms >= 0)
        sums = np.array([s for _, s in v.partial_sums])
        assert np.all(np.diff(sums) >= 0)

    def test_first_index(self):
        # ExpBeta never reaches 2^0 = 1, so the series starts at m = 1
        v = C.series_check(C.preset(3, alpha=2, beta0=1, beta=0.3), 20)
        assert v.partial_sums[0][0] == 1

    def test_geometric_divergence(self):
        cfg = C.Theorem1Config(Power(0.5), Power(2), 2.0, 1.0)
        assert C.series_check(cfg, 60).status == C.DIVERGES

    def test_m_max(self):
        with pytest.raises(ValueError):
            C.series_check(_power_cfg(), 5)

    def test_csv(self, tmp_path):
        v = C.series_check(C.preset(1), 20)
        v.to_csv(tmp_path / "s.csv")
        rows = list(csv.reader(open(tmp_path / "s.csv")))
        assert rows[0] == ["m", "y_m", "x_m", "term", "partial_sum"]
        assert len(rows) == len(v.table) + 1
        np.testing.assert_allclose(float(rows[-1][4]), v.partial_sums[-1][1], rtol=1e-15)
