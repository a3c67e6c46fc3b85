import math

import mpmath
import numpy as np
import pytest

from phivar import hermite
from phivar.hermite import (
    HermiteKernel,
    a_n,
    a_n_lhs,
    discretize_kernel,
    kernel_Q,
    norming_c0,
    q_norm_closed_form,
    q_norm_quadrature,
    sigma_mH,
    ss_hopm,
)


class TestKernel:
    def test_exponent(self):
        k = HermiteKernel(2, 0.75, 1.0)
        assert k.gamma == pytest.approx(0.625)
        for m in (1, 2, 3):
            for H in (0.51, 0.75, 0.99):
                assert 0.5 < HermiteKernel(m, H, 1.0).gamma < 1

    def test_domain(self):
        for m, H in [(0, 0.7), (1, 0.5), (2, 1.0), (1.5, 0.7)]:
            with pytest.raises(ValueError):
                HermiteKernel(m, H)

    def test_default_c0_is_norming(self):
        assert HermiteKernel(2, 0.7).c0 == norming_c0(2, 0.7)

    def test_vanishes_above_t(self):
        k = HermiteKernel(2, 0.7)
        assert kernel_Q(k, 0.5, [0.6, -1.0]) == 0.0
        assert kernel_Q(k, 0.0, [-0.3, -1.0]) == 0.0

    @pytest.mark.parametrize("H,t,u", [(0.75, 1.0, -0.5), (0.6, 0.3, -2.0), (0.9, 0.8, 0.2), (0.55, 1.0, -1e-3)])
    def test_m1_closed_form(self, H, t, u):
        k = HermiteKernel(1, H, 1.0)
        g1 = 1 - k.gamma
        lo = max(u, 0.0)
        ref = ((t - u) ** g1 - (lo - u) ** g1) / g1
        np.testing.assert_allclose(kernel_Q(k, t, [u]), ref, rtol=1e-8)

    def test_m2_against_mpmath(self):
        mpmath.mp.dps = 25
        k = HermiteKernel(2, 0.7, 1.0)
        g = k.gamma
        u1, u2 = -0.4, 0.1
        f = lambda v: (v - u1) ** -g * (v - u2) ** -g
        ref = float(mpmath.quad(f, [u2, 0.5, 1.0]))
        np.testing.assert_allclose(kernel_Q(k, 1.0, [u1, u2]), ref, rtol=1e-8)

    def test_permutation_symmetry(self):
        k = HermiteKernel(3, 0.8)
        u = [-0.3, 0.2, -1.7]
        vals = {kernel_Q(k, 0.9, p) for p in ([-0.3, 0.2, -1.7], [0.2, -1.7, -0.3], [-1.7, -0.3, 0.2])}
        assert len(vals) == 1
        assert kernel_Q(k, 0.9, u) > 0

    def test_monotone_in_t(self):
        k = HermiteKernel(2, 0.65)
        vals = [kernel_Q(k, t, [-0.2, 0.1]) for t in np.linspace(0, 1, 11)]
        assert np.all(np.diff(vals) >= 0)


class TestNorm:
    def test_beta_oracle(self):
        mpmath.mp.dps = 30
        # t = w^4 removes the endpoint singularity at 0
        B = mpmath.quad(lambda w: 4 * (1 - w ** 4) ** -0.5, [0, 1])
        ref = float(mpmath.sqrt(B / (0.75 * 0.5)))
        np.testing.assert_allclose(q_norm_closed_form(1, 0.75), ref, rtol=1e-10)

    @pytest.mark.parametrize("m", [1, 2, 3])
    @pytest.mark.parametrize("H", [0.55, 0.6, 0.75, 0.9, 0.95])
    def test_norming(self, m, H):
        c0 = norming_c0(m, H)
        assert 0 < c0 < math.inf
        np.testing.assert_allclose(math.factorial(m) * q_norm_closed_form(m, H, c0) ** 2, 1.0, rtol=1e-10)

    def test_m1_c0(self):
        np.testing.assert_allclose(norming_c0(1, 0.7), 1 / q_norm_closed_form(1, 0.7), rtol=1e-14)

    def test_closed_form_domain(self):
        with pytest.raises(ValueError):
            q_norm_closed_form(2, 0.5)

    def test_quadrature_m1(self):
        q = q_norm_quadrature(1, 0.75, U=1e3)
        np.testing.assert_allclose(q.value, q_norm_closed_form(1, 0.75), rtol=1e-6)

    def test_quadrature_m2(self):
        np.testing.assert_allclose(q_norm_quadrature(2, 0.6).value, q_norm_closed_form(2, 0.6), rtol=1e-4)
        np.testing.assert_allclose(q_norm_quadrature(2, 0.75).value, q_norm_closed_form(2, 0.75), rtol=1e-3)

    def test_truncation_study(self):
        a, b = q_norm_quadrature(1, 0.75, U=1e2), q_norm_quadrature(1, 0.75, U=1e3)
        assert abs(a.value / b.value - 1) < 1e-4
        # the raw truncated integral grows with U; the tail term accounts for it
        assert a.truncated < b.truncated < b.value
        assert b.tail_error < 1e-12

    def test_quadrature_limits(self):
        with pytest.raises(NotImplementedError):
            q_norm_quadrature(4, 0.75)
        with pytest.raises(ValueError):
            q_norm_quadrature(1, 0.75, U=5)


class TestSigma:
    @pytest.mark.parametrize("H", [0.55, 0.6, 0.75, 0.9])
    def test_m1_duality(self, H):
        r = sigma_mH(1, H)
        np.testing.assert_allclose(r.sigma, 2 ** (1 / (2 * H)), rtol=1e-3)
        np.testing.assert_allclose(r.sup, 1.0, rtol=1e-3)

    def test_brownian(self):
        assert sigma_mH(1, 0.5).sigma == 2.0

    @pytest.mark.parametrize("H", [0.6, 0.75])
    def test_m2_strict_gap(self, H):
        r = sigma_mH(2, H)
        fine = sigma_mH(2, H, n_cells=256)
        assert math.sqrt(2) - r.sigma ** H >= 1e-3
        assert abs(fine.sigma / r.sigma - 1) < 5e-3
        assert r.method == "eigh" and not r.lower_bound

    def test_m2_power_iteration_matches_eigensolve(self):
        disc = discretize_kernel(2, 0.75, 64)
        M = disc.S.T @ (disc.weights[:, None] * disc.S)
        ev = np.linalg.eigvalsh(M)
        z0 = np.random.default_rng(0).standard_normal(disc.n_cells)
        val, z, ok = ss_hopm(disc.S, disc.weights, 2, z0)
        assert ok
        top = ev[-1] if ev[-1] >= -ev[0] else ev[0]
        np.testing.assert_allclose(val, top, rtol=1e-8)

    @pytest.mark.parametrize("m,H", [(2, 0.6), (2, 0.9), (3, 0.75)])
    def test_upper_bound(self, m, H):
        r = sigma_mH(m, H, n_cells=64, restarts=4)
        assert r.sigma ** H <= 2 ** (m / 2) / math.sqrt(math.factorial(m))

    def test_m3_labelled_lower_bound(self):
        r = sigma_mH(3, 0.75, n_cells=64, restarts=4)
        assert r.method == "ss-hopm" and r.lower_bound and r.converged
        assert r.sigma > 0

    def test_disc_mismatch(self):
        with pytest.raises(ValueError):
            sigma_mH(2, 0.7, disc=discretize_kernel(2, 0.75, 32))


class TestDiscretization:
    def test_gram_is_exact(self):
        # Gram of cell indicators under R(v, v') = B |v - v'|^{1-2γ}, against mpmath
        disc = discretize_kernel(2, 0.75, 8)
        g = hermite.kernel_exponent(2, 0.75)
        b = float(mpmath.beta(1 - g, 2 * g - 1))
        e = disc.edges
        f = lambda x, y: abs(x - y) ** (1 - 2 * g)
        ref = b * float(mpmath.quad(f, [e[2], e[3]], [e[5], e[6]]))
        np.testing.assert_allclose(disc.gram[2, 5], ref, rtol=1e-8)
        np.testing.assert_allclose(disc.gram, disc.gram.T, rtol=1e-14)

    def test_cache_round_trip(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PHIVAR_CACHE", str(tmp_path))
        a = discretize_kernel(2, 0.7, 16)
        files = list(tmp_path.glob("kernel-*.npz"))
        assert len(files) == 1 and a.key() in files[0].name
        b = discretize_kernel(2, 0.7, 16)
        np.testing.assert_array_equal(a.S, b.S)
        np.testing.assert_array_equal(a.gram, b.gram)
        assert a.c0 == b.c0

    def test_cache_version_mismatch(self, tmp_path):
        a = discretize_kernel(2, 0.7, 16, cache_dir=tmp_path)
        path = next(tmp_path.glob("kernel-*.npz"))
        with np.load(path) as f:
            data = dict(f)
        data["meta"][0] = hermite.CACHE_VERSION + 1
        data["S"] = np.zeros_like(data["S"])
        np.savez(path, **data)
        b = discretize_kernel(2, 0.7, 16, cache_dir=tmp_path)
        np.testing.assert_array_equal(a.S, b.S)

    def test_distinct_keys(self):
        keys = {hermite.cache_key(2, 0.7, 16, 8), hermite.cache_key(2, 0.7, 32, 8),
                hermite.cache_key(3, 0.7, 16, 8), hermite.cache_key(2, 0.71, 16, 8)}
        assert len(keys) == 4


class TestAn:
    def test_lhs_against_mpmath(self):
        mpmath.mp.dps = 30
        for n, a in [(1, 0.3), (3, 0.1), (6, 0.05)]:
            x = mpmath.mpf(2) * mpmath.mpf(a) ** (mpmath.mpf(2) / n) / n
            ref = n * mpmath.mpf(a) ** (mpmath.mpf(1) / n) + mpmath.nsum(
                lambda k: (k * x) ** k / mpmath.factorial(k), [n + 1, mpmath.inf])
            np.testing.assert_allclose(a_n_lhs(n, a), float(ref), rtol=1e-13)

    @pytest.mark.parametrize("n", range(1, 7))
    def test_root(self, n):
        a = a_n(n)
        assert a > 0
        assert abs(a_n_lhs(n, a) - 2) < 1e-10
        assert a_n_lhs(n, 1.001 * a) > 2

    def test_n1_below_radius(self):
        assert a_n(1) < 1 / math.sqrt(2 * math.e)

    def test_outside_radius(self):
        assert a_n_lhs(1, 0.5) == math.inf

    def test_invalid(self):
        with pytest.raises(ValueError):
            a_n(0)
