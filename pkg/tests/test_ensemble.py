import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import scalar_shared, smooth_measurement
from uqkalman import (
    ConfigurationError,
    IntegratorConfig,
    NonConvergenceError,
    SpdMatrix,
    TimeGrid,
    ValidationError,
    build_parameter_space,
    run_ensemble,
)
from uqkalman.ensemble import solve_riccati_family


def small_space():
    return build_parameter_space(
        [[[-1.0]], [[-2.0]], [[-3.0]]],
        [0.5],
        [0.2, 0.4],
        [0.1],
        labels=[[1.0, 2.0, 3.0], None, [0.2, 0.4], None],
    )


class TestParameterSpace:
    def test_size_and_weight(self):
        space = small_space()
        assert len(space) == space.size == 6
        assert space.weight == pytest.approx(1 / 6)
        assert space.factor_sizes == (3, 1, 2, 1)

    def test_lexicographic_a_slowest(self):
        space = small_space()
        a = [m.a[0, 0] for m in space.members]
        r = [m.r.data[0, 0] for m in space.members]
        assert a == [-1.0, -1.0, -2.0, -2.0, -3.0, -3.0]
        assert r == [0.2, 0.4] * 3

    def test_labels_concatenate(self):
        space = small_space()
        np.testing.assert_array_equal(space.labels[3], [2.0, 0.4])
        assert space.find([3.0, 0.2]) == 4
        with pytest.raises(ConfigurationError):
            space.find([4.0, 0.2])

    def test_default_labels_are_indices(self):
        space = build_parameter_space([np.eye(1)] * 2, [1.0], [1.0, 2.0], [1.0])
        np.testing.assert_array_equal(space.labels[3], [1.0, 0.0, 1.0, 0.0])

    @given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 3), st.integers(1, 2), st.data())
    def test_index_roundtrip(self, na, ng, nr, nq, data):
        space = build_parameter_space(
            [np.eye(1) * -i for i in range(1, na + 1)],
            [SpdMatrix(1.0 + i) for i in range(ng)],
            [SpdMatrix(1.0 + i) for i in range(nr)],
            [SpdMatrix(1.0 + i) for i in range(nq)],
        )
        k = data.draw(st.integers(0, len(space) - 1))
        assert space.member_index(*space.factor_indices(k)) == k

    def test_empty_factor(self):
        with pytest.raises(ConfigurationError, match="Gamma"):
            build_parameter_space([np.eye(1)], [], [1.0], [1.0])

    def test_non_spd_candidate_named(self):
        with pytest.raises(ValidationError, match="Q candidate 1"):
            build_parameter_space([np.eye(1)], [1.0], [1.0], [1.0, -1.0])

    def test_label_length_checked(self):
        with pytest.raises(ConfigurationError):
            build_parameter_space([np.eye(1)], [1.0], [1.0], [1.0], labels=[[1.0, 2.0], None, None, None])


class TestRunEnsemble:
    def test_members_in_order(self):
        space, shared = small_space(), scalar_shared()
        grid = TimeGrid(1.0, 40)
        result = run_ensemble(space, shared, smooth_measurement(grid), grid)
        assert len(result) == 6
        assert result.estimates.shape == (6, 41, 1)
        assert result.precisions.shape == result.covariances.shape == (6, 41, 1, 1)
        for run, member in zip(result.runs, space.members):
            assert run.sys is member

    def test_parallel_is_bit_identical(self):
        space, shared = small_space(), scalar_shared()
        grid = TimeGrid(1.0, 40)
        y = smooth_measurement(grid)
        serial = run_ensemble(space, shared, y, grid, jobs=1)
        threaded = run_ensemble(space, shared, y, grid, jobs=3)
        assert np.array_equal(serial.estimates, threaded.estimates)
        assert np.array_equal(serial.precisions, threaded.precisions)

    def test_reuse_riccati(self):
        space, shared = small_space(), scalar_shared()
        grid = TimeGrid(1.0, 40)
        sols = solve_riccati_family(space, shared, grid)
        y = smooth_measurement(grid)
        a = run_ensemble(space, shared, y, grid, riccati=sols)
        b = run_ensemble(space, shared, y, grid)
        assert np.array_equal(a.estimates, b.estimates)
        with pytest.raises(ConfigurationError):
            run_ensemble(space, shared, y, grid, riccati=sols[:2])

    def test_failure_names_member(self):
        space, shared = small_space(), scalar_shared()
        grid = TimeGrid(1.0, 40)
        with pytest.raises(NonConvergenceError, match="member 0") as info:
            run_ensemble(space, shared, smooth_measurement(grid), grid, IntegratorConfig(max_steps=5))
        assert info.value.member == 0
