import math
from datetime import date

import numpy as np
import pytest

from tickvol.errors import CleaningWarning
from tickvol.gasfilter import ModelParams, ModelSpec
from tickvol.simulator import SimConfig, simulate_day
from tickvol.ticks import load_ticks, write_raw_csv


def plain_spec(**kw):
    base = dict(mean_dynamics="ma1", dispersion_dynamics="gas",
                inflation_dynamics="static",
                use_diurnal_adjustment=False, use_duration_adjustment=False)
    base.update(kw)
    return ModelSpec(**base)


NAIVE = plain_spec(mean_dynamics="zero", dispersion_dynamics="static",
                   inflation_dynamics="none")


class TestSimulateDay:
    def test_seed_determinism(self):
        cfg = SimConfig(spec=plain_spec(), n_ticks=2_000, seed=9,
                        params=ModelParams(theta=-0.35, omega=0.0, phi=0.97,
                                           alpha=0.19, pi=0.13),
                        zero_duration_share=0.3)
        a = simulate_day(cfg)
        b = simulate_day(cfg)
        np.testing.assert_array_equal(a.time_ms, b.time_ms)
        np.testing.assert_array_equal(a.price, b.price)
        np.testing.assert_array_equal(a.volume, b.volume)
        c = simulate_day(SimConfig(**{**cfg.to_dict(), "seed": 10,
                                      "spec": cfg.spec, "params": cfg.params,
                                      "day_id": cfg.day_id}))
        assert not np.array_equal(a.price, c.price)

    def test_naive_variance_matches_level(self):
        omega = 0.7
        cfg = SimConfig(spec=NAIVE, params=ModelParams(omega=omega),
                        n_ticks=1_000_001, seed=4)
        day = simulate_day(cfg)
        y = day.price_changes.astype(float)
        target = math.exp(omega)       # delta = variance when mu = pi = 0
        se = (y ** 2).std(ddof=1) / math.sqrt(y.size)
        assert abs(y.var(ddof=1) - target) < 4 * se

    def test_ma1_autocorrelation_shape(self):
        cfg = SimConfig(spec=plain_spec(),
                        params=ModelParams(theta=-0.35, omega=0.0, phi=0.97,
                                           alpha=0.19, pi=0.13),
                        n_ticks=200_001, seed=11)
        y = simulate_day(cfg).price_changes.astype(float)
        yc = y - y.mean()
        denom = float(np.dot(yc, yc))
        ac1 = float(np.dot(yc[:-1], yc[1:])) / denom
        ac2 = float(np.dot(yc[:-2], yc[2:])) / denom
        assert ac1 < -0.15
        assert abs(ac2) < 0.05

    def test_zero_duration_share(self):
        cfg = SimConfig(spec=NAIVE, params=ModelParams(omega=0.0),
                        n_ticks=100_001, seed=2, zero_duration_share=0.47)
        day = simulate_day(cfg)
        share = float(np.mean(day.durations == 0.0))
        assert abs(share - 0.47) < 0.01

    def test_price_floor_triggers_resimulation(self):
        cfg = SimConfig(spec=NAIVE, params=ModelParams(omega=3.0),
                        n_ticks=5_000, seed=1, base_price=0.05)
        with pytest.warns(CleaningWarning):
            day = simulate_day(cfg)
        assert day.price.min() > 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            SimConfig(spec=NAIVE, params=ModelParams(), n_ticks=1)
        with pytest.raises(ValueError):
            SimConfig(spec=plain_spec(family="normal", inflation_dynamics="none"),
                      params=ModelParams(), n_ticks=10)
        with pytest.raises(ValueError):
            SimConfig(spec=NAIVE, params=ModelParams(), n_ticks=10,
                      zero_duration_share=1.0)

    def test_config_round_trip(self):
        cfg = SimConfig(spec=plain_spec(), n_ticks=100, seed=5,
                        params=ModelParams(theta=-0.2, omega=0.1, phi=0.9,
                                           alpha=0.1, pi=0.05),
                        zero_duration_share=0.2, day_id=date(2022, 4, 1))
        assert SimConfig.from_dict(cfg.to_dict()) == cfg

    def test_emits_loadable_raw_csv(self, tmp_path):
        cfg = SimConfig(spec=NAIVE, params=ModelParams(omega=0.0),
                        n_ticks=500, seed=3, zero_duration_share=0.3)
        day = simulate_day(cfg)
        path = tmp_path / "raw.csv"
        write_raw_csv(day, path)
        ticks, errors = load_ticks(path)
        assert errors == []
        assert len(ticks) == day.n_ticks
        assert all(t.day == day.day_id for t in ticks)
        np.testing.assert_array_equal([t.time_ms for t in ticks], day.time_ms)
        np.testing.assert_allclose([t.price for t in ticks], day.price)
