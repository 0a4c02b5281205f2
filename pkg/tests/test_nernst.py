import json
import math

import numpy as np
import pytest

from berryemf import (AmbiguousEnclosure, InvalidConfig, InvalidGradient, NernstScenario,
                      ScenarioTooLarge, VortexConfig, density_sweep, nernst_signal, run_ensemble,
                      run_nernst, sample_vortex_gas)
from berryemf.io import dumps_json
from berryemf.nernst import _rng_for

SMALL = dict(lx=4.0, ly=4.0, n_m=1.0, n_a=2.0)


class TestScenario:
    def test_defaults(self):
        sc = NernstScenario()
        assert sc.dt == pytest.approx(0.0125) and sc.n_steps == 712
        assert sc.edge_start == 1.0 and sc.overhang == 1.0
        assert sc.predicted_e_y == pytest.approx(math.pi)

    @pytest.mark.parametrize("kw, exc", [
        (dict(n_m=-1.0), InvalidConfig), (dict(v0=0.0), InvalidConfig),
        (dict(grad_t=0.0), InvalidGradient), (dict(n_m=1e6, n_a=1e6), ScenarioTooLarge),
        (dict(dt=0.1, n_steps=100), InvalidConfig), (dict(units="cgs"), InvalidConfig),
        (dict(edge_start=12.0), InvalidConfig)])
    def test_invalid(self, kw, exc):
        with pytest.raises(exc):
            NernstScenario(**kw)

    def test_dt_rule(self):
        sc = NernstScenario(n_m=3.0, n_a=0.5, v0=2.0)
        assert sc.dt <= 1 / (4 * 3.0 * 10.0 * 2.0) + 1e-15


class TestGas:
    def test_empty(self):
        sc = NernstScenario(n_m=0.0, n_a=0.0)
        assert len(sample_vortex_gas(sc, _rng_for(0, 0))) == 0

    def test_labels(self):
        gas = sample_vortex_gas(NernstScenario(), _rng_for(3, 0))
        assert set(np.unique(gas.windings).tolist()) <= {-1, 1}
        assert gas.n_merons + gas.n_antimerons == len(gas)

    def test_poisson_mean(self):
        # n_m Lx Ly = 100; the documented band is 100 +- 9.5
        sc = NernstScenario(n_m=1.0, n_a=0.0)
        rng = np.random.default_rng(11)
        counts = [len(sample_vortex_gas(sc, rng)) for _ in range(1000)]
        assert abs(np.mean(counts) - 100) < 9.5
        # 3 standard errors of the mean of 1000 Poisson(100) draws is 0.95
        assert abs(np.mean(counts) - 100) < 3 * math.sqrt(100 / 1000)

    def test_deterministic(self):
        a = sample_vortex_gas(NernstScenario(), _rng_for(9, 4))
        b = sample_vortex_gas(NernstScenario(), _rng_for(9, 4))
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_cores_clear_of_edges(self):
        sc = NernstScenario(**SMALL, eps_core=0.05)
        gas = sample_vortex_gas(sc, _rng_for(1, 0))
        p = gas.positions
        assert p.min() > 0.05 and p[:, 0].max() < 3.95 and p[:, 1].max() < 3.95


class TestRun:
    def test_quantized_events(self):
        sc = NernstScenario(seed=2)
        res = run_nernst(sc, 0)
        q = res.emf_samples * res.dt / math.pi
        np.testing.assert_array_equal(q, np.round(q))
        np.testing.assert_array_equal(q, res.winding_changes)
        assert res.e_y_mean == pytest.approx(res.emf_samples.mean() / sc.ly, rel=1e-15)
        assert len(res.quadrature_checks) == 2

    def test_single_species_same_sign(self):
        res = run_nernst(NernstScenario(n_m=0.0, n_a=2.0, seed=4), 0)
        events = res.emf_samples[res.emf_samples != 0]
        assert events.size > 0 and np.all(events > 0)
        assert res.crossing_counts[0] == 0

    def test_mirror_negates_exactly(self):
        sc = NernstScenario(seed=6)
        gas = sample_vortex_gas(sc, _rng_for(6, 0))
        a = run_nernst(sc, 0, config=gas)
        b = run_nernst(sc, 0, config=gas.mirrored())
        np.testing.assert_array_equal(b.emf_samples, -a.emf_samples)
        assert b.crossing_counts == a.crossing_counts[::-1]

    def test_width_independence(self):
        a = run_nernst(NernstScenario(seed=8, overhang=0.5), 0)
        b = run_nernst(NernstScenario(seed=8, overhang=4.0), 0)
        np.testing.assert_array_equal(a.emf_samples, b.emf_samples)

    def test_drift_scaling(self):
        a = run_nernst(NernstScenario(seed=10, v0=1.0), 0)
        b = run_nernst(NernstScenario(seed=10, v0=2.0), 0)
        assert b.e_y_mean == pytest.approx(2 * a.e_y_mean, rel=1e-12)

    def test_retry_then_fail(self):
        base = dict(lx=4.0, ly=4.0, dt=0.01, n_steps=100, edge_start=1.0, quadrature_checks=0)
        sc = NernstScenario(**base)
        # a core exactly where the trailing edge sits after 5 steps
        hit = VortexConfig.from_cores([(1.0 + 5 * 0.01, 2.0, 1)], 4, 4, sc.eps_core)
        res = run_nernst(sc, 0, config=hit)
        assert res.dt == pytest.approx(0.01 * 1.001)
        both = VortexConfig.from_cores([(1.0 + 5 * 0.01, 2.0, 1),
                                        (1.0 + 7 * 0.01 * 1.001, 3.0, -1)], 4, 4, sc.eps_core)
        with pytest.raises(AmbiguousEnclosure):
            run_nernst(sc, 0, config=both)


class TestSignal:
    def test_zero_field(self):
        assert nernst_signal(0.0, NernstScenario()).measured == 0.0

    def test_prediction_pi(self):
        sc = NernstScenario(n_m=1.0, n_a=2.0, v0=1.0, grad_t=1.0)
        assert nernst_signal(1.0, sc).predicted == pytest.approx(math.pi, rel=1e-15)

    def test_gradient_halves(self):
        sc = NernstScenario()
        assert nernst_signal(2.0, sc, grad_t=2.0).measured == 0.5 * nernst_signal(2.0, sc).measured

    def test_zero_gradient(self):
        with pytest.raises(InvalidGradient):
            nernst_signal(1.0, NernstScenario(), grad_t=0.0)


class TestEnsemble:
    def test_workers_do_not_change_result(self):
        sc = NernstScenario(**SMALL, seed=12)
        one = run_ensemble(sc, 6, workers=1)
        two = run_ensemble(sc, 6, workers=2)
        assert dumps_json(one.summary()) == dumps_json(two.summary())

    def test_summary_schema(self):
        s = run_ensemble(NernstScenario(**SMALL, seed=1), 3).summary()
        for key in ("schema_version", "E_y_mean", "E_y_stderr", "E_y_predicted", "e_N",
                    "e_N_predicted", "crossing_counts", "scenario", "units"):
            assert key in s
        json.loads(dumps_json(s))

    def test_needs_two(self):
        with pytest.raises(InvalidConfig):
            run_ensemble(NernstScenario(**SMALL), 1)


def test_density_sweep_monotone():
    sweep = density_sweep(NernstScenario(**SMALL, seed=3), [-2, -1, 0, 1, 2], n_realizations=2)
    assert sweep.e_y.shape == (5,)
    assert np.all(np.diff(sweep.e_y) >= 0)
    np.testing.assert_allclose(sweep.predicted, math.pi * np.arange(-2, 3))
