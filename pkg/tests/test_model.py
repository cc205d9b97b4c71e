import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from uqkalman import (
    ConfigurationError,
    DomainError,
    MatrixTrajectory,
    SharedModel,
    SpdMatrix,
    SystemTuple,
    TimeGrid,
    Trajectory,
    ValidationError,
    evaluate,
)
from uqkalman.model import is_symmetric, symmetrize


class TestSpdMatrix:
    def test_scalar_promoted(self):
        m = SpdMatrix(2.0)
        assert m.data.shape == (1, 1)
        assert m.inverse[0, 0] == pytest.approx(0.5)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValidationError, match="symmetric"):
            SpdMatrix([[1.0, 0.1], [0.0, 1.0]])

    def test_rejects_indefinite(self):
        with pytest.raises(ValidationError, match="positive definite"):
            SpdMatrix([[1.0, 2.0], [2.0, 1.0]])

    def test_rejects_nonsquare_and_nonfinite(self):
        with pytest.raises(ValidationError):
            SpdMatrix(np.ones((2, 3)))
        with pytest.raises(ValidationError):
            SpdMatrix([[np.nan]])

    def test_tiny_asymmetry_tolerated(self):
        SpdMatrix([[1.0, 0.5], [0.5 + 1e-14, 1.0]])

    def test_read_only(self):
        m = SpdMatrix(np.eye(2))
        with pytest.raises(ValueError):
            m.data[0, 0] = 3.0

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (3, 3), elements=st.floats(-2, 2)))
    def test_inverse_and_cholesky(self, g):
        spd = g @ g.T + 0.5 * np.eye(3)
        m = SpdMatrix(symmetrize(spd))
        np.testing.assert_allclose(m.cholesky @ m.cholesky.T, m.data, atol=1e-12)
        np.testing.assert_allclose(m.inverse @ m.data, np.eye(3), atol=1e-10)
        assert is_symmetric(m.inverse, 0.0)


class TestSystemTuple:
    def test_coerces_covariances(self):
        s = SystemTuple([[0.0, 1.0], [-1.0, -3.0]], 0.1 * np.eye(2), 0.05, 0.05)
        assert isinstance(s.gamma, SpdMatrix) and s.n == 2 and s.r.dim == 1

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            SystemTuple(np.eye(2), np.eye(3), 1.0, 1.0)
        with pytest.raises(ConfigurationError):
            SystemTuple(np.ones((2, 3)), np.eye(2), 1.0, 1.0)

    def test_names_failing_covariance(self):
        with pytest.raises(ValidationError, match="R"):
            SystemTuple(np.eye(1), 1.0, -1.0, 1.0)

    def test_check_against_shared(self):
        s = SystemTuple(np.eye(2), np.eye(2), 1.0, 1.0)
        s.check_against(SharedModel([[0.0], [1.0]], [[1.0, 0.0]], [1.0, 0.0], 1.0))
        with pytest.raises(ConfigurationError, match="C"):
            s.check_against(SharedModel([[0.0], [1.0]], [[1.0, 0.0, 0.0]], [1.0, 0.0], 1.0))
        with pytest.raises(ConfigurationError, match="B"):
            s.check_against(SharedModel([[0.0, 1.0]], [[1.0, 0.0]], [1.0, 0.0], 1.0))

    def test_same_as(self):
        a = SystemTuple(np.eye(1), 1.0, 1.0, 1.0)
        assert a.same_as(SystemTuple(np.eye(1), 1.0, 1.0, 1.0))
        assert not a.same_as(SystemTuple(np.eye(1), 1.0, 1.0, 2.0))


class TestSharedModel:
    def test_forcing_sampled_on_nodes(self):
        shared = SharedModel([[1.0]], [[1.0]], [0.0], 1.0, forcing=lambda t: [2 * t])
        f = shared.forcing_on(TimeGrid(1.0, 4))
        np.testing.assert_allclose(f[:, 0], [0, 0.5, 1.0, 1.5, 2.0])

    def test_no_forcing(self):
        assert SharedModel([[1.0]], [[1.0]], [0.0], 1.0).forcing_on(TimeGrid(1.0, 4)) is None

    def test_bad_forcing(self):
        shared = SharedModel([[1.0]], [[1.0]], [0.0], 1.0, forcing=lambda t: [t, t])
        with pytest.raises(ConfigurationError):
            shared.forcing_on(TimeGrid(1.0, 4))
        shared = SharedModel([[1.0]], [[1.0]], [0.0], 1.0, forcing=lambda t: [np.inf])
        with pytest.raises(ConfigurationError):
            shared.forcing_on(TimeGrid(1.0, 4))

    def test_horizon_positive(self):
        with pytest.raises(ConfigurationError):
            SharedModel([[1.0]], [[1.0]], [0.0], 0.0)


class TestTimeGrid:
    def test_default_has_1001_nodes(self):
        g = TimeGrid(10.0)
        assert g.size == 1001 and g.step == pytest.approx(0.01)
        assert g.nodes[0] == 0.0 and g.nodes[-1] == 10.0

    @given(st.floats(0.1, 100.0), st.integers(1, 2000))
    def test_nodes_equidistant_and_end_exact(self, t_end, m):
        g = TimeGrid(t_end, m)
        assert g.nodes[-1] == t_end
        np.testing.assert_allclose(np.diff(g.nodes), g.step, rtol=1e-9)

    def test_index_of(self):
        g = TimeGrid(10.0, 1000)
        assert g.index_of(2.5) == 250
        with pytest.raises(DomainError):
            g.index_of(2.505)

    def test_invalid(self):
        with pytest.raises(ConfigurationError):
            TimeGrid(1.0, 0)
        with pytest.raises(ConfigurationError):
            TimeGrid(0.0, 10)

    def test_value_equality(self):
        assert TimeGrid(1.0, 10) == TimeGrid(1.0, 10) != TimeGrid(1.0, 11)


class TestTrajectories:
    def test_exact_at_nodes_linear_between(self):
        g = TimeGrid(1.0, 4)
        traj = Trajectory(g, np.column_stack([g.nodes ** 2, -g.nodes]))
        for j, t in enumerate(g.nodes):
            assert np.array_equal(traj(t), traj.values[j])
        np.testing.assert_allclose(evaluate(traj, 0.125), [(0 + 0.0625) / 2, -0.125])

    def test_outside_domain(self):
        traj = Trajectory(TimeGrid(1.0, 4), np.zeros(5))
        with pytest.raises(DomainError):
            traj(1.5)
        with pytest.raises(DomainError):
            traj(-1e-9)

    def test_shape_checked(self):
        with pytest.raises(ConfigurationError):
            Trajectory(TimeGrid(1.0, 4), np.zeros((4, 1)))

    def test_read_only(self):
        traj = Trajectory(TimeGrid(1.0, 4), np.zeros(5))
        with pytest.raises(ValueError):
            traj.values[0, 0] = 1.0

    def test_matrix_symmetry_checked(self):
        g = TimeGrid(1.0, 2)
        vals = np.tile(np.eye(2), (3, 1, 1))
        MatrixTrajectory(g, vals, spd=True)
        vals[1, 0, 1] = 1e-3
        with pytest.raises(ValidationError, match="node 1"):
            MatrixTrajectory(g, vals, spd=True)
        MatrixTrajectory(g, vals)

    @given(st.floats(0.0, 1.0))
    def test_interpolation_within_bounds(self, t):
        g = TimeGrid(1.0, 7)
        traj = Trajectory(g, np.sin(5 * g.nodes))
        v = traj(t)[0]
        assert traj.values.min() - 1e-15 <= v <= traj.values.max() + 1e-15
