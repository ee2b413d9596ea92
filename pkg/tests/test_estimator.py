import numpy as np
import pytest

from tickvol.estimator import (
    ALL_VARIANTS,
    FitResult,
    default_start,
    fit,
    fit_all_variants,
    free_parameters,
    transform,
    untransform,
)
from tickvol.gasfilter import ModelParams, ModelSpec, VARIANTS, filter_day
from tickvol.simulator import SimConfig, simulate_day


def bare(name):
    spec = VARIANTS[name]
    return ModelSpec(**{**spec.to_dict(), "use_diurnal_adjustment": False,
                        "use_duration_adjustment": False})


PROPOSED = bare("proposed")
NAIVE = bare("naive")
TRUE = ModelParams(theta=-0.35, omega=0.0, phi=0.97, alpha=0.19, pi=0.13)


@pytest.fixture(scope="module")
def proposed_day():
    cfg = SimConfig(spec=PROPOSED, params=TRUE, n_ticks=50_001, seed=42,
                    zero_duration_share=0.47, base_price=133.0)
    return simulate_day(cfg)


@pytest.fixture(scope="module")
def proposed_fit(proposed_day):
    return fit(PROPOSED, proposed_day.price_changes, variant="proposed")


class TestTransforms:
    def test_free_parameters_per_variant(self):
        assert free_parameters(NAIVE) == ("omega",)
        assert free_parameters(PROPOSED) == ("theta", "omega", "phi", "alpha", "pi")
        assert free_parameters(bare("static_dispersion")) == ("theta", "omega", "pi")
        assert free_parameters(bare("static_mean")) == ("omega", "phi", "alpha", "pi")
        assert free_parameters(bare("gas_mean")) == (
            "kappa", "rho", "theta", "omega", "phi", "alpha", "pi")
        assert free_parameters(bare("gas_inflation")) == (
            "theta", "omega", "phi", "alpha", "gamma", "psi", "eta")
        assert free_parameters(bare("student_t")) == ("theta", "omega", "phi",
                                                      "alpha", "nu")

    def test_fixed_points(self):
        spec = PROPOSED
        params = ModelParams(theta=0.0, omega=0.0, phi=0.0, alpha=0.0, pi=0.5)
        vec = transform(params, spec)
        np.testing.assert_allclose(vec, np.zeros(5), atol=1e-15)

    def test_round_trip_random_grid(self):
        rng = np.random.default_rng(0)
        for spec_name in ("proposed", "gas_inflation", "student_t", "gas_mean"):
            spec = bare(spec_name)
            names = free_parameters(spec)
            for _ in range(25):
                raw = rng.normal(scale=1.5, size=len(names))
                params = untransform(raw, spec)
                back = transform(params, spec)
                np.testing.assert_allclose(back, raw, atol=1e-12)

    def test_out_of_domain_rejected(self):
        with pytest.raises(ValueError):
            transform(ModelParams(pi=0.0), PROPOSED)


class TestFit:
    def test_naive_level_recovery(self):
        cfg = SimConfig(spec=NAIVE, params=ModelParams(omega=0.5),
                        n_ticks=50_001, seed=7)
        day = simulate_day(cfg)
        res = fit(NAIVE, day.price_changes)
        assert res.converged
        assert abs(res.params.omega - 0.5) < 0.05

    def test_reported_loglik_matches_filter(self, proposed_fit, proposed_day):
        out = filter_day(PROPOSED, proposed_fit.params, proposed_day.price_changes)
        assert proposed_fit.loglik_mean == pytest.approx(out.loglik_mean, abs=1e-12)

    def test_monotone_improvement(self, proposed_fit, proposed_day):
        start_out = filter_day(PROPOSED, proposed_fit.start_params,
                               proposed_day.price_changes)
        assert proposed_fit.loglik_mean >= start_out.loglik_mean

    def test_recovers_generating_parameters(self, proposed_fit):
        p = proposed_fit.params
        assert abs(p.theta - TRUE.theta) < 0.05
        assert abs(p.omega - TRUE.omega) < 0.15
        assert abs(p.phi - TRUE.phi) < 0.03
        assert abs(p.alpha - TRUE.alpha) < 0.05
        assert abs(p.pi - TRUE.pi) < 0.03

    def test_deterministic(self, proposed_day):
        a = fit(PROPOSED, proposed_day.price_changes)
        b = fit(PROPOSED, proposed_day.price_changes)
        assert a.params == b.params
        assert a.loglik_mean == b.loglik_mean

    def test_proposed_nests_naive_on_naive_data(self):
        cfg = SimConfig(spec=NAIVE, params=ModelParams(omega=0.3),
                        n_ticks=20_001, seed=3)
        y = simulate_day(cfg).price_changes
        res_naive = fit(NAIVE, y)
        res_prop = fit(PROPOSED, y, extra_starts=(
            ModelParams(omega=res_naive.params.omega, pi=1e-4),))
        assert res_prop.loglik_mean >= res_naive.loglik_mean - 1e-9

    def test_result_round_trip(self, proposed_fit):
        doc = proposed_fit.to_dict()
        back = FitResult.from_dict(doc)
        assert back == proposed_fit


@pytest.fixture(scope="module")
def results(proposed_day):
    y = proposed_day.price_changes[:12_000]
    return fit_all_variants(y)


class TestFitAllVariants:
    def test_all_ten_variants_fit(self, results):
        assert set(results) == set(ALL_VARIANTS)

    def test_nesting_order(self, results):
        lp = results["proposed"].loglik_mean
        for name in ("no_inflation", "static_dispersion", "static_mean"):
            assert lp >= results[name].loglik_mean - 1e-9
            assert results[name].loglik_mean >= results["naive"].loglik_mean - 1e-9

    def test_gas_inflation_dominates_proposed(self, results):
        assert (results["gas_inflation"].loglik_mean
                >= results["proposed"].loglik_mean - 1e-6)

    def test_theta_negative_on_ma1_data(self, results):
        for name in ("no_inflation", "static_dispersion", "proposed"):
            assert results[name].params.theta < 0.0

    def test_discrete_beats_normal(self, results):
        # continuous density likelihood is not directly comparable, but the
        # Skellam families must beat the normal's own density loglik
        assert results["proposed"].loglik_mean > results["normal"].loglik_mean
