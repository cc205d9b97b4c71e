import numpy as np
import pytest

from uqkalman import ConfigurationError, amplidyne_scenario, oscillator_scenario
from uqkalman.scenarios import (
    AMP_PROBES,
    amplidyne_parameters,
    build_scenario,
    check_uniform_weights,
    format_label,
    inline_scenario,
    oscillator_dampings,
)


class TestOscillator:
    def test_published_matrices(self):
        np.testing.assert_array_equal(oscillator_scenario(3.0).true_system.a, [[0, 1], [-1, -3]])
        np.testing.assert_array_equal(oscillator_scenario(0.1).true_system.a, [[0, 1], [-1, -0.1]])

    def test_damping_grid(self):
        d = oscillator_dampings()
        assert d.size == 101
        assert abs(d[0] - 0.1) <= 1e-15 and abs(d[-1] - 3.0) <= 1e-15
        assert d[50] == pytest.approx(1.55, abs=1e-15)
        np.testing.assert_allclose(np.diff(d), 0.029, rtol=1e-12)

    def test_bundle(self):
        b = oscillator_scenario(1.55)
        assert len(b.space) == 101 and b.true_index == 50
        assert b.grid.size == 1001 and b.grid.t_end == 10.0
        np.testing.assert_array_equal(b.shared.x0, [1.0, 0.0])
        np.testing.assert_array_equal(b.shared.b, [[0.0], [1.0]])
        np.testing.assert_array_equal(b.shared.c, [[1.0, 0.0]])
        gamma, r, q = b.covariances
        np.testing.assert_array_equal(gamma.data, 0.1 * np.eye(2))
        assert r.data[0, 0] == 0.05 and q.data[0, 0] == 0.05
        assert [b.label_of(k) for k in b.probes] == ["0.1", "1.55", "3"]

    def test_all_members_damped(self):
        for s in oscillator_scenario().space.members:
            assert np.trace(s.a) < 0

    def test_unknown_damping(self):
        with pytest.raises(ConfigurationError):
            oscillator_scenario(2.0)

    def test_shrink(self):
        b = oscillator_scenario(1.55, shrink=0.5)
        sig = np.array([lab[0] for lab in b.space.labels])
        assert sig[0] == pytest.approx(0.825) and sig[-1] == pytest.approx(2.275)
        assert b.probes == ()
        with pytest.raises(ConfigurationError):
            oscillator_scenario(1.55, shrink=1.5)


class TestAmplidyne:
    def test_published_entries(self):
        a = amplidyne_scenario((10.0, 0.5, 10.0)).true_system.a
        assert a[1, 0] == 2.0 and a[1, 1] == -1.0
        for s in amplidyne_scenario().space.members:
            assert s.a[0, 0] == -10.0
            assert np.trace(s.a) < 0
            assert np.array_equal(s.a != 0, np.eye(4, dtype=bool) | np.eye(4, k=-1, dtype=bool))

    def test_bundle(self):
        b = amplidyne_scenario()
        assert len(b.space) == 125
        gamma, r, q = b.covariances
        np.testing.assert_array_equal(np.diag(gamma.data), [0.125, 0.25, 2.5, 5.0])
        np.testing.assert_allclose(gamma.data, 0.25 * np.diag(np.abs(b.shared.x0)))
        assert r.data[0, 0] == 0.01
        assert q.data[0, 0] == (0.1 * 400 * 1.0) ** 2 == 1600.0
        np.testing.assert_array_equal(b.shared.b[:, 0], [2.0, 0.0, 0.0, 0.0])
        np.testing.assert_array_equal(b.shared.c, [[0.0, 0.0, 0.0, 50.0]])
        np.testing.assert_array_equal(b.shared.forcing_on(b.grid)[7], [2.0, 0.0, 0.0, 0.0])
        assert b.integrator.rel_tol <= 1e-10

    def test_probes(self):
        b = amplidyne_scenario()
        assert len(b.probes) == 5
        for k, target in zip(b.probes, AMP_PROBES):
            np.testing.assert_array_equal(b.space.labels[k], target)
        assert b.label_of(b.probes[1]) == "12.5_0.75_17.5"

    def test_parameter_order(self):
        params = amplidyne_parameters()
        assert params[0] == (10.0, 0.5, 10.0) and params[1] == (10.0, 0.5, 17.5)
        assert params[-1] == (20.0, 1.5, 40.0)

    def test_unknown_sigma(self):
        with pytest.raises(ConfigurationError):
            amplidyne_scenario((11.0, 0.5, 10.0))


class TestInlineAndRegistry:
    definition = {
        "a": [[[-1.0]], [[-2.0]]], "gamma": [1.0], "r": [0.5], "q": [0.1, 0.2],
        "b": [[1.0]], "c": [[1.0]], "x0": [0.0], "horizon": 2.0,
    }

    def test_inline(self):
        b = inline_scenario(self.definition, 3, num_intervals=20)
        assert len(b.space) == 4 and b.true_index == 3
        assert b.covariances[2].data[0, 0] == 0.2
        assert b.grid.t_end == 2.0
        assert b.label_of(3) == "3"

    def test_inline_errors(self):
        with pytest.raises(ConfigurationError, match="missing"):
            inline_scenario({"a": [[[1.0]]]})
        with pytest.raises(ConfigurationError, match="unknown"):
            inline_scenario({**self.definition, "extra": 1})
        with pytest.raises(ConfigurationError, match="index"):
            inline_scenario(self.definition, 4)
        with pytest.raises(ConfigurationError, match="uniform"):
            inline_scenario({**self.definition, "weights": [0.1, 0.2, 0.3, 0.4]})

    def test_weights(self):
        check_uniform_weights(None)
        check_uniform_weights([0.25] * 4)
        with pytest.raises(ConfigurationError):
            check_uniform_weights([0.5, 0.25, 0.25])

    def test_registry(self):
        assert build_scenario("oscillator", 0.1, num_intervals=10).true_index == 0
        with pytest.raises(ConfigurationError):
            build_scenario("pendulum")

    def test_format_label(self):
        assert format_label(np.array([3.0])) == "3"
        assert format_label((10.0, 0.5, 10.0)) == "10_0.5_10"
