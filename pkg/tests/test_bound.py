from dataclasses import replace

import numpy as np
import pytest

from ehfl.bound import (
    A_coeff,
    BoundParams,
    X_factor,
    Y_term,
    Y_terms,
    asymptotic_floor,
    bound_trace,
    corollary_closed_form,
    figure3_alphas,
    figure3_params,
    product_form,
    scenario_traces,
)


class TestX:
    def test_zero_rate(self):
        assert X_factor(BoundParams(eta0=0.0, eta_decay=0.0), 0) == 1.0

    def test_single_step(self):
        p = BoundParams(eta0=0.03, eta_decay=0.0, mu=2.0)
        assert X_factor(p, 5) == pytest.approx(1 - 2.0 * 0.03)

    def test_three_steps(self):
        p = BoundParams(eta0=0.01, eta_decay=0.0, tau=3, mu=1.0)
        assert X_factor(p, 0) == pytest.approx(0.9702, abs=1e-15)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            X_factor(BoundParams(eta0=0.5, eta_decay=0.0, tau=3, mu=1.0), 0)
        with pytest.raises(ValueError):
            X_factor(BoundParams(eta0=0.01, eta_decay=1e-3), 20)


class TestA:
    def test_equal_gains(self):
        p = BoundParams(M=10, K=7, alpha=0.4)
        n = 4.0
        assert A_coeff(p, 1, 2) == pytest.approx(-1 + (n + 1) * 8 / (n * 7), rel=1e-14)

    def test_forty_devices_forty_antennas(self):
        p = BoundParams(M=40, K=40, alpha=1.0)
        assert A_coeff(p, 0, 1, "theorem1") == pytest.approx(-1 + 41 * 41 / 1600, rel=1e-14)
        assert A_coeff(p, 0, 1, "theorem1") == pytest.approx(0.050625)
        assert A_coeff(p, 0, 1, "lemma4") == pytest.approx(-1 + (2 + 39 * 39) / 1600, rel=1e-14)
        assert A_coeff(p, 0, 1, "lemma4") == pytest.approx(-0.048125)

    def test_large_limits(self):
        # K and M * alpha both large: the final fraction tends to 1 in both variants
        M = 200_000
        betas = np.resize([0.5, 2.0, 1.5], M)
        p = BoundParams(M=M, K=10 ** 9, betas=betas, beta_bar=1.0)
        b1, b2 = betas[0], betas[1]
        limit = 1 - b1 - b2 + b1 * b2
        for variant in ("theorem1", "lemma4"):
            assert A_coeff(p, 0, 1, variant) == pytest.approx(limit, rel=1e-4)

    def test_zero_participation(self):
        with pytest.raises(ValueError):
            A_coeff(BoundParams(M=5, alpha=0.0), 0, 1)


class TestY:
    def test_single_step_no_drift_or_bias(self):
        t = Y_terms(BoundParams(tau=1, Gamma=3.0, eta_decay=0.0), 0)
        assert t["drift"] == 0.0 and t["bias"] == 0.0

    def test_all_zero(self):
        p = BoundParams(sigma_z2=0.0, G2=0.0, tau=3, Gamma=0.0, eta_decay=0.0)
        assert Y_term(p, 0) == 0.0

    def test_figure3_golden(self):
        p = figure3_params(alpha=1.0, eta_decay=0.0)
        # independent scalar arithmetic at eta = 1e-2, K = M = 40, all devices present
        eta, M, K, N = 1e-2, 40, 40, 153749
        A = -1 + (M + 1) * (K + 1) / (M * K)
        fading = eta ** 2 * M * M * A
        interference = eta ** 2 / K * M * (M - 1)
        noise = 5 * N / ((1 / 40) ** 2 * K) * M
        variance = eta ** 2
        golden = fading + interference + noise + variance
        assert golden == pytest.approx(1229992000.0121, rel=1e-15)
        assert Y_term(p, 0) == pytest.approx(golden, rel=1e-13)

    def test_expectation_matches_sampling(self):
        p = BoundParams(M=12, K=24, N=5, alpha=np.linspace(0.1, 0.9, 12),
                        betas=np.linspace(0.5, 2.0, 12), beta_bar=1.1, eta_decay=0.0,
                        sigma_z2=0.3)
        rng = np.random.default_rng(0)
        draws = [Y_term(p, 0, list(np.flatnonzero(rng.random(12) < p.alphas))) for _ in range(40_000)]
        assert np.mean(draws) == pytest.approx(Y_term(p, 0), rel=0.01)

    def test_error_free_has_no_channel_terms(self):
        t = Y_terms(figure3_params(scenario="eh_error_free"), 0)
        assert t["fading"] == t["interference"] == t["noise"] == 0.0


class TestTrace:
    def test_geometric(self):
        p = BoundParams(sigma_z2=0.0, G2=0.0, eta0=0.05, eta_decay=0.0, T=50, B0=7.0)
        tr = bound_trace(p)
        np.testing.assert_allclose(tr.dist, 7.0 * 0.95 ** np.arange(51), rtol=1e-12)
        np.testing.assert_allclose(tr.loss, p.L / 2 * tr.dist)

    def test_recursion_equals_product_form(self):
        p = figure3_params(T=1000, alpha=figure3_alphas())
        tr = bound_trace(p)
        for t in (0, 1, 2, 17, 400, 999, 1000):
            assert tr.dist[t] == pytest.approx(product_form(tr.X, tr.Y, p.B0, t), rel=1e-10)

    def test_nonnegative_finite(self):
        tr = bound_trace(figure3_params(T=400, mode="sampled", alpha=figure3_alphas()))
        assert np.all(np.isfinite(tr.dist)) and np.all(tr.dist >= 0)
        assert len(tr.participants) == 400

    def test_matches_closed_form_when_antennas_dominate(self):
        p = BoundParams(M=1, K=100, N=1000, alpha=1.0, p=1.0, eta0=0.01, eta_decay=0.0,
                        sigma_z2=0.01, T=1000, B0=1e3)
        tr = bound_trace(p)
        np.testing.assert_allclose(tr.loss, corollary_closed_form(p, np.arange(1001)), rtol=0.01)

    def test_floor_below_curve(self):
        p = BoundParams(M=1, K=100, N=1000, alpha=1.0, p=1.0, eta0=0.01, eta_decay=0.0,
                        sigma_z2=0.01, T=2000)
        floor = asymptotic_floor(p)
        p = replace(p, B0=4 * floor / p.L)
        assert np.all(bound_trace(p).loss >= floor)

    def test_scenario_ordering(self):
        traces = scenario_traces(figure3_params())
        conv, ef, ota = (traces[s].loss for s in ("conventional", "eh_error_free", "eh_ota"))
        assert np.all(conv <= ef) and np.all(ef <= ota)


class TestFloor:
    def test_zero(self):
        assert asymptotic_floor(BoundParams(sigma_z2=0.0, G2=0.0, eta_decay=0.0)) == 0.0

    def test_decreasing_in_antennas(self):
        p = figure3_params(eta_decay=0.0)
        assert asymptotic_floor(replace(p, K=2 * p.K)) < asymptotic_floor(p)

    def test_golden(self):
        p = figure3_params(eta_decay=0.0)
        golden = 10 / (2 * 1 * 1e-2) * (2 * 1e-4 * 1 + 5 * 153749 / ((1 / 40) ** 2 * 40 * 1))
        assert golden == pytest.approx(15374900000.1, rel=1e-15)
        assert asymptotic_floor(p) == pytest.approx(golden, rel=1e-14)

    def test_needs_constant_rate(self):
        with pytest.raises(ValueError):
            asymptotic_floor(figure3_params())


class TestMonotonicity:
    base = dict(M=10, K=20, N=50, alpha=0.5, eta0=0.01, eta_decay=0.0, T=200,
                betas=np.linspace(0.5, 1.5, 10))

    def final(self, **kw):
        return bound_trace(BoundParams(**{**self.base, **kw})).loss[-1]

    def test_antennas(self):
        vals = [self.final(K=k) for k in (5, 10, 20, 40, 80)]
        assert np.all(np.diff(vals) <= 0)

    @pytest.mark.parametrize("name,values", [
        ("sigma_z2", [0.0, 0.5, 1.0, 2.0]),
        ("N", [1, 10, 100, 1000]),
        ("G2", [0.0, 0.5, 1.0, 4.0]),
    ])
    def test_increasing(self, name, values):
        vals = [self.final(**{name: v}) for v in values]
        assert np.all(np.diff(vals) >= 0)


def test_params_validation():
    with pytest.raises(ValueError):
        BoundParams(Gamma=-1.0)
    with pytest.raises(ValueError):
        BoundParams(variant="other")
    with pytest.raises(ValueError):
        BoundParams(alpha=1.5)
