import numpy as np
import pytest

from urnsa import (
    IntegrationError,
    drift,
    fixed_point_residual,
    integrate,
    perron,
    rho,
    settle,
    xi_term,
)

FRIEDMAN = np.array([[2.0, 1.0], [1.0, 2.0]])


def _random_irreducible(rng, max_dim=6):
    k = int(rng.integers(2, max_dim + 1))
    return rng.random((k, k)) * rng.uniform(0.3, 3.0) + 1e-3


def _random_interior(rng, k):
    x = rng.random(k) + 0.05
    return x / x.sum()


def test_drift_vanishes_at_stationary_vector():
    rng = np.random.default_rng(0)
    for _ in range(20):
        h = _random_irreducible(rng)
        pf = perron(h)
        assert np.abs(drift(h, pf.pi)).sum() <= 1e-12


def test_drift_hand_evaluated_corner():
    # x = (1, 0): x H = (2, 1), x H 1^T = 3, so the field is (2,1) - 3*(1,0)
    np.testing.assert_allclose(drift(FRIEDMAN, [1.0, 0.0]), [-1.0, 1.0], atol=1e-15)


def test_drift_tangent_to_simplex():
    rng = np.random.default_rng(1)
    for _ in range(200):
        h = _random_irreducible(rng)
        x = _random_interior(rng, h.shape[0])
        assert abs(drift(h, x).sum()) <= 1e-12


def test_drift_dimension_mismatch():
    with pytest.raises(ValueError):
        drift(FRIEDMAN, [0.2, 0.3, 0.5])


def test_xi_zero_when_generating_matches_limit():
    x = np.array([0.3, 0.7])
    np.testing.assert_array_equal(xi_term(FRIEDMAN, FRIEDMAN, x), [0.0, 0.0])


def test_xi_direct_evaluation():
    delta = np.array([[0.1, -0.1], [0.0, 0.0]])
    out = xi_term(FRIEDMAN + delta, FRIEDMAN, [1.0, 0.0])
    np.testing.assert_allclose(out, [0.1, -0.1], atol=1e-15)


def test_xi_l1_bound():
    # ||xi||_1 <= 2 rho(H_gen - H) on the simplex
    rng = np.random.default_rng(2)
    for _ in range(200):
        k = int(rng.integers(1, 7))
        h = rng.random((k, k))
        delta = rng.uniform(-1, 1, (k, k))
        x = _random_interior(rng, k)
        assert np.abs(xi_term(h + delta, h, x)).sum() <= 2 * rho(delta) + 1e-12


def test_integrate_fixed_point_is_constant():
    pf = perron(FRIEDMAN)
    path = integrate(FRIEDMAN, pf.pi, t_end=50.0, dt=0.01)
    assert np.abs(path.states - pf.pi).max() <= 1e-9


def test_integrate_friedman_attracts_to_half_half():
    path = integrate(FRIEDMAN, [0.9, 0.1], t_end=40.0, dt=0.01)
    np.testing.assert_allclose(path.final, [0.5, 0.5], atol=1e-6)
    # cross-check against the integrator itself at half the step
    refined = integrate(FRIEDMAN, [0.9, 0.1], t_end=40.0, dt=0.005)
    assert np.abs(path.final - refined.final).sum() <= 1e-9


def test_integrate_mass_defect_small():
    rng = np.random.default_rng(3)
    for _ in range(10):
        h = _random_irreducible(rng)
        h *= min(1.0, 10.0 / rho(h))  # keep rho(H) <= 10
        x0 = _random_interior(rng, h.shape[0])
        path = integrate(h, x0, t_end=20.0, dt=0.01)
        assert path.max_mass_defect <= 1e-9


def test_integrate_fourth_order_step_halving():
    h = np.array([[1.0, 2.0], [3.0, 4.0]])
    x0 = np.array([0.9, 0.1])
    t_end = 2.0
    ends = [integrate(h, x0, t_end, dt).final for dt in (0.2, 0.1, 0.05)]
    e1 = np.abs(ends[0] - ends[1]).sum()
    e2 = np.abs(ends[1] - ends[2]).sum()
    assert 8.0 <= e1 / e2 <= 32.0


def test_integrate_nonfinite_raises_with_time():
    h = np.array([[1e300, 1e300], [1.0, 1.0]])
    with pytest.raises(IntegrationError) as err:
        integrate(h, [0.9, 0.1], t_end=1.0, dt=0.5)
    assert err.value.time > 0


def test_interior_starts_settle_at_stationary():
    rng = np.random.default_rng(4)
    for _ in range(10):
        h = _random_irreducible(rng)
        pf = perron(h)
        x0 = _random_interior(rng, h.shape[0])
        end = settle(h, x0, dt=0.01, t_init=10.0)
        assert np.abs(end - pf.pi).sum() <= 1e-6


@pytest.mark.parametrize(
    "h,tol",
    [
        ([[2.0, 1.0], [1.0, 2.0]], 1e-12),
        ([[1.0, 2.0], [3.0, 4.0]], 1e-10),
        ([[0.0, 1.0], [1.0, 0.0]], 1e-12),
    ],
)
def test_fixed_point_residual(h, tol):
    assert fixed_point_residual(h) <= tol
