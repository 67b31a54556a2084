import math

import numpy as np
import pytest

from gcps.analysis import (
    EnsembleSeries,
    Moments,
    compare_series,
    compare_to_ode,
    ensemble,
    ratio_series,
    resample_trajectory,
    time_averaged_ratio,
)
from gcps.engine import Mode, RunSpec, Trajectory
from gcps.engine.compiled import compile_model
from gcps.model import Configuration, GcpsModel, Rule
from gcps.odelimit import OdeTrajectory, derive_odes, integrate

tok = Configuration.tokens
SSA = Mode.FS_CONCENTRATION_DIRECT


def handmade(times, values):
    m = GcpsModel.one_symbol(1, [Rule.tokens(0, 1, 1, 1)], [values[0]])
    cm = compile_model(m)
    states = np.array(values, dtype=np.int64)[:, None]
    rules = np.array([-1] + [0] * (len(times) - 1))
    return Trajectory(m, cm.species, np.array(times, dtype=float), rules, states, False, SSA,
                      0, len(times) - 1, "max_time")


class TestResample:
    def test_hold(self):
        t = handmade([0.0, 1.5], [1, 2])
        assert resample_trajectory(t, [0, 1, 2])[:, 0].tolist() == [1, 1, 2]

    def test_event_times(self):
        t = handmade([0.0, 0.5, 0.7], [4, 5, 6])
        assert resample_trajectory(t, [0.0, 0.5, 0.7])[:, 0].tolist() == [4, 5, 6]

    def test_past_end(self):
        t = handmade([0.0, 0.5], [4, 5])
        assert resample_trajectory(t, [10.0])[:, 0].tolist() == [5]

    def test_empty(self):
        t = handmade([0.0], [1])
        empty = Trajectory(t.model, t.species, np.empty(0), np.empty(0, dtype=np.int64),
                           np.empty((0, 1), dtype=np.int64), False, SSA, 0, 0, "max_time")
        with pytest.raises(ValueError):
            resample_trajectory(empty, [0.0])


class TestMoments:
    def test_against_numpy(self):
        rng = np.random.default_rng(0)
        data = rng.normal(5, 2, size=(101, 3))
        acc = Moments(3)
        for row in data:
            acc.add(row)
        assert np.allclose(acc.mean, data.mean(axis=0))
        assert np.allclose(acc.std, data.std(axis=0))

    def test_merge_is_order_free(self):
        rng = np.random.default_rng(1)
        data = rng.exponential(3, size=(60, 2))
        parts = []
        for chunk in (data[:7], data[7:40], data[40:]):
            acc = Moments(2)
            for row in chunk:
                acc.add(row)
            parts.append(acc)
        merged = parts[2].merge(parts[0]).merge(parts[1])
        assert merged.n == 60
        assert np.allclose(merged.mean, data.mean(axis=0))
        assert np.allclose(merged.std, data.std(axis=0))


class TestEnsemble:
    def test_pure_death_mean(self, pure_death):
        spec = RunSpec(SSA, max_time=1.0, seed=3)
        e = ensemble(pure_death, None, spec, 200, [0.0, 1.0])
        assert e.mean[0].tolist() == [0.0, 1000.0] and (e.std[0] == 0).all()
        assert abs(e.mean[1, 1] / (1000 * math.exp(-1)) - 1) < 0.03

    def test_single_run_has_zero_std(self, pure_death):
        e = ensemble(pure_death, tok([0, 50]), RunSpec(SSA, max_time=2.0), 1,
                     np.linspace(0, 2, 5))
        assert (e.std == 0).all() and e.runs == 1

    def test_reproducible_and_independent_of_jobs(self, pure_death):
        spec = RunSpec(SSA, max_time=1.0, seed=9)
        grid = np.linspace(0, 1, 11)
        a = ensemble(pure_death, tok([0, 100]), spec, 8, grid)
        b = ensemble(pure_death, tok([0, 100]), spec, 8, grid)
        c = ensemble(pure_death, tok([0, 100]), spec, 8, grid, jobs=2)
        assert np.array_equal(a.mean, b.mean) and np.array_equal(a.std, b.std)
        assert np.allclose(a.mean, c.mean, rtol=1e-12) and np.allclose(a.std, c.std, rtol=1e-12)

    def test_spread_of_mean_scales_with_runs(self, pure_death):
        u = tok([0, 200])

        def spread(runs):
            means = [ensemble(pure_death, u, RunSpec(SSA, max_time=1.0, seed=s), runs,
                              [1.0]).mean[0, 1] for s in range(40)]
            return np.std(means)

        factor = spread(10) / spread(40)
        assert abs(factor / 2 - 1) < 0.35

    def test_runs_must_be_positive(self, pure_death):
        with pytest.raises(ValueError):
            ensemble(pure_death, None, RunSpec(SSA, max_time=1.0), 0, [0.0])

    def test_csv(self):
        e = EnsembleSeries(np.array([0.0, 0.5]), np.array([[1.0, 2.0], [3.0, 4.0]]),
                           np.array([[0.0, 0.0], [0.5, 1.0]]), 2, 7)
        assert e.to_csv().splitlines() == [
            "time,mean_cell_1,std_cell_1,mean_cell_2,std_cell_2",
            "0.0,1.0,0.0,2.0,0.0", "0.5,3.0,0.5,4.0,1.0"]


class TestRatio:
    def test_simple(self):
        r = ratio_series(np.array([[70, 30]]), [1], [1, 2])
        assert r.values.tolist() == [0.7] and r.ok

    def test_flagged(self):
        r = ratio_series(np.array([[0, 0], [1, 1]]), [1], [1, 2])
        assert r.flagged.tolist() == [True, False] and math.isnan(r.values[0])
        assert r.values[1] == 0.5 and not r.ok

    def test_sqrt2_long_run(self, sqrt2):
        from gcps.engine import run
        t = run(sqrt2, None, RunSpec(SSA, max_steps=400_000, seed=12, record=1000))
        r = ratio_series(t.cell_counts()[-1:], [1], [1, 2])
        assert abs(r.values[0] - 1 / math.sqrt(2)) < 0.02
        assert abs(time_averaged_ratio(t, [1], [1, 2]) - 1 / math.sqrt(2)) < 0.02

    def test_time_average(self):
        t = handmade([0.0, 1.0, 3.0, 4.0], [2, 4, 6, 6])
        assert time_averaged_ratio(t, [1], [1]) == 1.0
        with pytest.raises(ValueError):
            time_averaged_ratio(t, [1], [1], cutoff=4.0)


class TestCompare:
    def test_identical(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        c = compare_series([0, 1], x, [0, 1], x)
        assert c.rmse == [0.0, 0.0] and c.max_rel_dev == [0.0, 0.0] and c.grid == 2

    def test_values(self):
        c = compare_series([0, 1], [[1.0], [3.0]], [0, 1], [[2.0], [3.0]])
        assert c.rmse == [math.sqrt(0.5)] and c.max_rel_dev == [0.5]

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            compare_series([0, 1], [[1.0], [1.0]], [0, 2], [[1.0], [1.0]])

    def test_json(self):
        c = compare_series([0], [[1.0]], [0], [[1.0]])
        assert c.to_json() == '{\n "rmse": [\n  0.0\n ],\n "max_rel_dev": [\n  0.0\n ],\n' \
                              ' "grid": 1\n}\n'

    def test_pure_death_against_ode(self, pure_death):
        grid_dt, t_end = 0.1, 3.0
        o = integrate(derive_odes(pure_death), [0.0, 1000.0], grid_dt, t_end)
        e = ensemble(pure_death, None, RunSpec(SSA, max_time=t_end, seed=5), 200, o.times)
        c = compare_to_ode(e, o)
        assert c.max_rel_dev[1] < 0.05 and c.max_rel_dev[0] == 0.0

    def test_sqrt2_ratio_against_ode(self, sqrt2):
        t_end = 2e-3
        o = integrate(derive_odes(sqrt2), [5000.0, 5000.0], 1e-5, t_end)
        e = ensemble(sqrt2, None, RunSpec(SSA, max_time=t_end, seed=6), 20, o.times)
        half = len(o.times) // 2
        dev = np.abs(ratio_series(e, [1], [1, 2]).values - ratio_series(o, [1], [1, 2]).values)
        assert dev[half:].max() < 0.02

    def test_ode_trajectory_ratio(self):
        o = OdeTrajectory(np.array([0.0]), np.array([[3.0, 1.0]]))
        assert ratio_series(o, [1], [1, 2]).values.tolist() == [0.75]
