import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import scalar_shared, smooth_measurement
from uqkalman import (
    ConfigurationError,
    NumericalError,
    TimeGrid,
    build_parameter_space,
    energy_min_estimator,
    expected_filter_estimator,
    run_ensemble,
)
from uqkalman.estimators import KINDS, compute_estimators, mean_system, precision_weighted_mean


def _spd_stack(raw):
    return np.einsum("...ij,...kj->...ik", raw, raw) + 0.1 * np.eye(raw.shape[-1])


class TestPrecisionWeightedMean:
    @settings(max_examples=30, deadline=None)
    @given(
        arrays(np.float64, (4, 3, 2, 2), elements=st.floats(-2, 2)),
        arrays(np.float64, (4, 3, 2), elements=st.floats(-5, 5)),
    )
    def test_matches_direct_solve(self, raw, x):
        p = _spd_stack(raw)
        p = 0.5 * (p + np.swapaxes(p, -1, -2))
        mean, total = precision_weighted_mean(p, x)
        for j in range(3):
            expected = np.linalg.solve(p[:, j].sum(0), np.einsum("kab,kb->a", p[:, j], x[:, j]))
            np.testing.assert_allclose(mean[j], expected, rtol=1e-8, atol=1e-8)
        np.testing.assert_allclose(total, p.sum(0), atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(
        arrays(np.float64, (2, 2), elements=st.floats(-2, 2)),
        arrays(np.float64, (5, 1, 2), elements=st.floats(-5, 5)),
    )
    def test_equal_precisions_give_plain_mean(self, raw, x):
        p = np.broadcast_to(_spd_stack(raw), (5, 1, 2, 2))
        mean, _ = precision_weighted_mean(np.ascontiguousarray(p), x)
        np.testing.assert_allclose(mean, x.mean(0), rtol=1e-9, atol=1e-9)

    def test_scale_invariance_of_weights(self):
        rng = np.random.default_rng(0)
        p = _spd_stack(rng.normal(size=(3, 2, 2, 2)))
        x = rng.normal(size=(3, 2, 2))
        a, _ = precision_weighted_mean(p, x)
        b, _ = precision_weighted_mean(7.0 * p, x)
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_singular_sum_names_node(self):
        p = np.tile(np.eye(2), (2, 3, 1, 1))
        p[:, 2] = [[1.0, 0.0], [0.0, 0.0]]
        with pytest.raises(NumericalError) as info:
            precision_weighted_mean(p, np.zeros((2, 3, 2)))
        assert info.value.node == 2


class TestEstimators:
    def test_mean_system(self):
        space = build_parameter_space([[[-1.0]], [[-3.0]]], [1.0, 3.0], [0.5], [0.2])
        mean = mean_system(space)
        assert mean.a[0, 0] == -2.0
        assert mean.gamma.data[0, 0] == 2.0

    def test_expected_filter_is_plain_mean(self, small_oscillator):
        out = small_oscillator.outputs["expected_filter"].estimate.values
        np.testing.assert_allclose(out, small_oscillator.ensemble.estimates.mean(0), rtol=1e-14, atol=1e-14)

    def test_start_at_x0(self, small_oscillator):
        x0 = small_oscillator.bundle.shared.x0
        for out in small_oscillator.outputs.values():
            assert np.array_equal(out.estimate.values[0], x0)

    def test_energy_min_aux_is_summed_precision(self, small_oscillator):
        aux = small_oscillator.outputs["energy_min"].aux.values
        np.testing.assert_allclose(aux, small_oscillator.ensemble.precisions.sum(0), rtol=1e-13)

    def test_expected_gain_differs_from_expected_matrices(self, small_oscillator):
        gain = small_oscillator.outputs["expected_gain"].estimate.values
        matrices = small_oscillator.outputs["expected_matrices"].estimate.values
        assert np.max(np.abs(gain - matrices)) > 1e-6

    def test_order_and_unknown_kind(self, small_oscillator):
        assert tuple(small_oscillator.outputs) == KINDS
        p = small_oscillator
        with pytest.raises(ConfigurationError, match="unknown"):
            compute_estimators(
                ["best"], p.bundle.space, p.ensemble, p.bundle.shared, p.measurement, p.bundle.grid
            )

    def test_subset_requested(self, small_oscillator):
        p = small_oscillator
        out = compute_estimators(
            ["energy_min", "expected_filter"], p.bundle.space, p.ensemble, p.bundle.shared,
            p.measurement, p.bundle.grid,
        )
        assert tuple(out) == ("expected_filter", "energy_min")

    def test_identical_members_collapse(self):
        space = build_parameter_space([[[-1.0]]] * 3, [0.5], [0.2], [0.1])
        grid = TimeGrid(1.0, 30)
        ens = run_ensemble(space, scalar_shared(), smooth_measurement(grid), grid)
        single = ens.runs[0].estimate.values
        np.testing.assert_allclose(expected_filter_estimator(ens).estimate.values, single, rtol=1e-14)
        np.testing.assert_allclose(energy_min_estimator(ens).estimate.values, single, rtol=1e-14)
