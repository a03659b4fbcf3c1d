import math

import numpy as np
import pytest
from scipy.integrate import quad

from specstats import theory as th
from specstats.errors import EstimationFailure
from specstats.spectra import CurveWithErrors


def brute_y2_gse(r):
    """Direct evaluation of the printed GSE cluster function: numeric
    derivative of sin(2 pi r)/(2 pi r) times the quadrature of its primitive."""
    integral, _ = quad(lambda x: np.sinc(2 * x), 0, r, limit=200)
    h = 1e-6
    fp = (np.sinc(2 * (r + h)) - np.sinc(2 * (r - h))) / (2 * h)
    return np.sinc(2 * r) ** 2 - fp * integral


class TestClusterY2:
    def test_gue_r0(self):
        assert th.cluster_y2("GUE", 0.0) == pytest.approx(1.0, abs=1e-12)

    def test_gue_half(self):
        assert th.cluster_y2("GUE", 0.5) == pytest.approx((2 / np.pi) ** 2,
                                                          rel=1e-12)

    def test_gse_r0(self):
        assert th.cluster_y2("GSE", 0.0) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("r", [0.1, 0.3, 0.7, 1.0, 1.9, 2.7, 5.3])
    def test_gse_vs_quadrature(self, r):
        assert th.cluster_y2("GSE", r) == pytest.approx(brute_y2_gse(r),
                                                        abs=1e-8)

    def test_decay_at_large_r(self):
        # GUE decays like 1/r^2; the GSE oscillation envelope only decays
        # like 1/(4r), so its bound at r = 50 is correspondingly weaker
        assert abs(th.cluster_y2("GUE", 50.25)) < 1e-3
        r = np.linspace(49.0, 51.0, 400)
        assert np.max(np.abs(th.cluster_y2("GSE", r))) < 6e-3

    def test_gue_bounds(self):
        r = np.linspace(0.01, 10, 500)
        y = th.cluster_y2("GUE", r)
        assert np.all(y >= 0) and np.all(y <= 1)

    def test_gse_bounded_but_signed(self):
        # the symplectic cluster function overshoots below zero (e.g. near
        # r = 1); only |Y2| <= 1 holds
        r = np.linspace(0.01, 10, 500)
        y = th.cluster_y2("GSE", r)
        assert np.all(np.abs(y) <= 1.0)
        assert y.min() < -0.1

    def test_negative_r_rejected(self):
        with pytest.raises(ValueError):
            th.cluster_y2("GUE", -0.5)


class TestFormFactor:
    def test_gue_values(self):
        assert th.form_b("GUE", 0.5) == pytest.approx(0.5, abs=1e-15)
        assert th.form_b("GUE", 0.0) == 1.0
        assert th.form_b("GUE", 1.5) == 0.0

    def test_gse_values(self):
        assert th.form_b("GSE", 0.0) == 1.0
        expected = 1 - 0.25 + 0.125 * math.log(0.5)
        assert th.form_b("GSE", 0.5) == pytest.approx(expected, rel=1e-12)
        assert th.form_b("GSE", 2.0) == 0.0
        assert th.form_b("GSE", 5.0) == 0.0

    def test_gse_log_singularity_signaled(self):
        with pytest.raises(ValueError):
            th.form_b("GSE", 1.0)
        # nearby points are fine
        assert np.isfinite(th.form_b("GSE", 1.0 - 1e-9))

    def test_symmetry_in_tau(self):
        for cls in ("GUE", "GSE"):
            assert th.form_b(cls, -0.3) == th.form_b(cls, 0.3)

    def test_form_factor_complement(self):
        assert th.form_factor("GUE", 0.25) == pytest.approx(0.25, abs=1e-15)


def trapezoid_sigma2(cls, L, n0=2000, refinements=6, tol=1e-6):
    """Independent trapezoid-refinement quadrature of the Sigma^2 integral."""
    prev = None
    n = n0
    for _ in range(refinements):
        r = np.linspace(0, L, n + 1)
        f = (L - r) * th.cluster_y2(cls, r)
        val = L - 2 * np.trapezoid(f, r)
        if prev is not None and abs(val - prev) < tol:
            return val
        prev = val
        n *= 2
    return prev


class TestSigma2Delta3:
    def test_small_L_limits(self):
        assert th.sigma2_complete("GUE", 1e-4) == pytest.approx(1e-4, rel=1e-3)
        assert th.delta3_complete("GSE", 1e-3) == pytest.approx(1e-3 / 15,
                                                               rel=1e-3)

    def test_sigma2_gue_against_second_quadrature(self):
        assert th.sigma2_complete("GUE", 1.0) == pytest.approx(
            trapezoid_sigma2("GUE", 1.0), abs=2e-6)

    def test_gse_stiffer_than_gue(self):
        for L in np.arange(0.2, 2.01, 0.2):
            assert th.sigma2_complete("GSE", L) < th.sigma2_complete("GUE", L)

    def test_monotone_and_positive(self):
        # Delta_3 increases for both classes; Sigma^2 increases strictly for
        # GUE but for GSE it rings around its asymptote (a real feature of
        # the symplectic two-point function), so only the unit-window trend
        # is monotone there
        for cls in ("GUE", "GSE"):
            grid = np.arange(0.05, 3.001, 0.05)
            s = np.array([th.sigma2_complete(cls, L) for L in grid])
            d = np.array([th.delta3_complete(cls, L) for L in grid])
            assert np.all(s > 0)
            assert np.all(d > 0)
            assert np.all(np.diff(d) > 0)
            if cls == "GUE":
                assert np.all(np.diff(s) > 0)
            else:
                assert np.all(s[20:] > s[:-20])  # trend over one spacing

    @pytest.mark.parametrize("cls", ["GUE", "GSE"])
    def test_delta3_consistent_with_sigma2(self, cls):
        # Delta_3(L) = (2/L^4) Int_0^L (L^3 - 2 L^2 r + r^3) Sigma^2(r) dr
        L = 2.0
        val, _ = quad(lambda r: (L ** 3 - 2 * L * L * r + r ** 3)
                      * th.sigma2_complete(cls, r), 0, L, limit=100)
        assert th.delta3_complete(cls, L) == pytest.approx(2 * val / L ** 4,
                                                           rel=1e-6)

    def test_invalid_L(self):
        with pytest.raises(ValueError):
            th.sigma2_complete("GUE", 0.0)
        with pytest.raises(ValueError):
            th.delta3_complete("GSE", -1.0)


class TestSurmise:
    def test_gue_closed_form(self):
        f = th.surmise_fit("GUE")
        assert f.gamma == pytest.approx(32 / np.pi ** 2, rel=1e-12)
        assert f.mu == 2.0
        assert f.chi == pytest.approx(4 / np.pi, rel=1e-12)

    def test_gse_closed_form(self):
        f = th.surmise_fit("GSE")
        assert f.gamma == pytest.approx(2 ** 18 / (3 ** 6 * np.pi ** 3),
                                        rel=1e-12)
        assert f.mu == 4.0
        assert f.chi == pytest.approx(64 / (9 * np.pi), rel=1e-12)

    def test_constrained_family_area_mean(self):
        for mu, mean in [(3.3, 1.0), (13.7, 2.0), (27.5, 3.0)]:
            g, c = th.constrained_gamma_chi(mu, mean)
            area, m = th.model_area_mean(g, mu, c)
            assert area == pytest.approx(1.0, rel=1e-10)
            assert m == pytest.approx(mean, rel=1e-10)

    def test_spacing_fit_invariants(self):
        with pytest.raises(ValueError):
            th.SpacingFit(order=0, gamma=1.0, mu=4.0, chi=1.0)  # wrong area
        with pytest.raises(ValueError):
            th.SpacingFit(order=0, gamma=-1.0, mu=4.0, chi=1.0)


class TestPMissing:
    def test_phi_one_reduces_to_surmise(self):
        s = np.linspace(0.0, 5.0, 101)
        for cls in ("GUE", "GSE"):
            params = th.default_missing_params(cls, 1.0)
            base = th.surmise_fit(cls)
            assert np.max(np.abs(th.p_missing(params, s)
                                 - base.density(s))) < 1e-12

    @pytest.mark.parametrize("phi", [0.7, 0.85, 0.95])
    def test_unit_area_and_mean(self, phi):
        params = th.default_missing_params("GSE", phi)
        area, _ = quad(lambda s: th.p_missing(params, s), 0, 30, limit=400)
        mean, _ = quad(lambda s: s * th.p_missing(params, s), 0, 30, limit=400)
        assert area == pytest.approx(1.0, abs=1e-3)
        assert mean == pytest.approx(1.0, abs=1e-3)

    def test_nonnegative(self):
        params = th.default_missing_params("GUE", 0.7)
        s = np.linspace(0, 12, 600)
        assert np.all(th.p_missing(params, s) >= 0)

    def test_missing_fit_raises(self):
        params = th.MissingLevelParams(ensemble=th.EnsembleClass.GSE,
                                       phi=0.8, spacing_fits=())
        with pytest.raises(ValueError):
            th.p_missing(params, 1.0)

    def test_invalid_phi(self):
        with pytest.raises(ValueError):
            th.default_missing_params("GSE", 0.0)
        with pytest.raises(ValueError):
            th.default_missing_params("GSE", 1.2)


class TestMissingSigma2Delta3:
    def test_phi_one_exact_reduction(self):
        for cls in ("GUE", "GSE"):
            for L in (0.3, 1.0, 2.5, 5.0):
                assert th.sigma2_missing(cls, 1.0, L) == pytest.approx(
                    th.sigma2_complete(cls, L), abs=1e-12)
                assert th.delta3_missing(cls, 1.0, L) == pytest.approx(
                    th.delta3_complete(cls, L), abs=1e-12)

    def test_poisson_limit(self):
        L = 2.0
        assert th.sigma2_missing("GUE", 1e-6, L) == pytest.approx(L, rel=1e-4)
        assert th.delta3_missing("GUE", 1e-6, L) == pytest.approx(L / 15,
                                                                 rel=1e-4)

    @pytest.mark.parametrize("phi", [0.7, 0.85, 0.95])
    @pytest.mark.parametrize("cls", ["GUE", "GSE"])
    def test_thinned_cluster_identity(self, cls, phi):
        # sigma^2(L) from the rescaled formula equals the direct quadrature
        # with the thinned cluster function y2(r) = Y2(r / phi)
        for L in (0.5, 1.7, 3.1):
            direct, _ = quad(lambda r: (L - r) * th.cluster_y2(cls, r / phi),
                             0, L, epsabs=1e-12, epsrel=1e-12, limit=400)
            assert th.sigma2_missing(cls, phi, L) == pytest.approx(
                L - 2 * direct, abs=1e-8)


def series_b_gse(tau):
    """ln|1 - tau| by power series, |tau| < 1: independent evaluation path."""
    t = abs(tau)
    ln = -sum(t ** k / k for k in range(1, 200))
    return 1 - t / 2 + t / 4 * ln


class TestPowerMissing:
    def test_symmetry(self):
        for cls in ("GUE", "GSE"):
            for phi in (0.7, 1.0):
                a = th.power_missing(cls, phi, 0.25)
                b = th.power_missing(cls, phi, 0.75)
                assert a == pytest.approx(b, rel=1e-14)

    def test_one_over_f_slope_at_phi_one(self):
        ts = np.logspace(-2, -1, 40)
        vals = [th.power_missing("GUE", 1.0, t) for t in ts]
        slope = np.polyfit(np.log(ts), np.log(vals), 1)[0]
        assert slope == pytest.approx(-1.0, abs=0.05)

    def test_dual_path_gse(self):
        phi, t = 0.7, 0.25
        direct = th.power_missing("GSE", phi, t)
        k1 = 1 - series_b_gse(phi * t)
        k2 = 1 - series_b_gse(phi * (1 - t))
        assembled = (phi / (4 * np.pi ** 2)
                     * ((k1 - 1) / t ** 2 + (k2 - 1) / (1 - t) ** 2)
                     + 1 / (4 * np.sin(np.pi * t) ** 2) - phi ** 2 / 12)
        assert direct == pytest.approx(assembled, abs=1e-10)

    def test_pole_errors(self):
        for bad in (0.0, 1.0, -0.2, 1.3):
            with pytest.raises(ValueError):
                th.power_missing("GUE", 0.9, bad)


class TestEstimatePhi:
    def test_self_consistency_on_theory_curve(self):
        grid = np.arange(0.02, 0.501, 0.01)
        y = np.array([th.power_missing("GUE", 0.85, t) for t in grid])
        curve = CurveWithErrors(grid, y, np.zeros_like(grid))
        phi_hat, se = th.estimate_phi(curve, "GUE", "power")
        assert abs(phi_hat - 0.85) < 1e-3
        assert se < 1e-3

    def test_self_consistency_sigma2(self):
        grid = np.arange(0.1, 3.01, 0.1)
        y = np.array([th.sigma2_missing("GSE", 0.9, L) for L in grid])
        curve = CurveWithErrors(grid, y, np.zeros_like(grid))
        phi_hat, _ = th.estimate_phi(curve, "GSE", "sigma2")
        assert abs(phi_hat - 0.9) < 1e-3

    def test_poisson_power_input_fails(self):
        grid = np.arange(0.02, 0.501, 0.01)
        y = 1.0 / (2 * np.sin(np.pi * grid) ** 2)  # pure Poisson spectrum
        curve = CurveWithErrors(grid, y, np.zeros_like(grid))
        with pytest.raises(EstimationFailure):
            th.estimate_phi(curve, "GUE", "power")

    def test_domain_validation(self):
        grid = np.arange(0.1, 0.9, 0.1)  # beyond tau=1/2
        curve = CurveWithErrors(grid, np.ones_like(grid), np.zeros_like(grid))
        with pytest.raises(ValueError):
            th.estimate_phi(curve, "GUE", "power")
        grid = np.arange(1.0, 5.0, 0.5)  # beyond L=3
        curve = CurveWithErrors(grid, np.ones_like(grid), np.zeros_like(grid))
        with pytest.raises(ValueError):
            th.estimate_phi(curve, "GUE", "sigma2")
