import numpy as np
import pytest

import urnsa.spectral as spectral
from urnsa import ConvergenceError, is_irreducible, perron, rho, sigma


def test_rho_balanced():
    assert rho([[2, 1], [1, 2]]) == 3.0


def test_rho_zero_matrix():
    assert rho(np.zeros((2, 2))) == 0.0


def test_rho_signed_rowsum_oracle():
    a = np.array([[1.0, -2.0], [0.5, 0.0]])
    expected = max(abs(a[0]).sum(), abs(a[1]).sum())
    assert rho(a) == expected == 3.0


def test_sigma_examples():
    assert sigma([[2, 1], [1, 2]]) == 3.0
    assert sigma([[1, 2], [3, 4]]) == 3.0  # row sums 3 and 7
    assert sigma([[0, 0], [1, 1]]) == 0.0


@pytest.mark.parametrize("bad", [[[1, np.nan], [0, 1]], [[np.inf, 0], [0, 1]]])
def test_norms_reject_nonfinite(bad):
    with pytest.raises(ValueError):
        rho(bad)
    with pytest.raises(ValueError):
        sigma(bad)


def test_irreducible_examples():
    assert is_irreducible([[2, 1], [1, 2]])
    assert not is_irreducible(1.5 * np.eye(2))  # diagonal replacement, two isolated colors
    assert is_irreducible([[0, 1], [1, 0]])
    assert is_irreducible([[0.3]])
    assert not is_irreducible([[0.0]])


def test_irreducible_matches_power_brute_force():
    # oracle: sum of the first K matrix powers has all entries positive
    for dim in range(1, 5):
        n_cells = dim * dim
        bits = np.arange(2**n_cells)
        shifts = np.arange(n_cells)
        patterns = ((bits[:, None] >> shifts[None, :]) & 1).astype(float)
        mats = patterns.reshape(-1, dim, dim)
        power = mats.copy()
        total = mats.copy()
        for _ in range(dim - 1):
            power = np.matmul(power, mats)
            total += power
        brute = (total > 0).all(axis=(1, 2))
        mine = np.array([is_irreducible(m) for m in mats])
        np.testing.assert_array_equal(mine, brute)


def test_perron_balanced_fixture():
    pf = perron([[2, 1], [1, 2]])
    assert abs(pf.lam - 3.0) <= 1e-12
    np.testing.assert_allclose(pf.pi, [0.5, 0.5], atol=1e-12)


def test_perron_periodic_fixture():
    pf = perron([[0, 1], [1, 0]])
    assert abs(pf.lam - 1.0) <= 1e-12
    np.testing.assert_allclose(pf.pi, [0.5, 0.5], atol=1e-12)


def test_perron_unbalanced_fixture_against_char_poly():
    h = np.array([[1.0, 2.0], [3.0, 4.0]])
    # characteristic polynomial: lam^2 - 5 lam - 2 = 0
    lam = (5.0 + np.sqrt(33.0)) / 2.0
    pf = perron(h)
    assert abs(pf.lam - lam) <= 1e-10
    # independent 2x2 left-eigenvector solve: pi proportional to (H21, lam - H11)
    pi = np.array([h[1, 0], lam - h[0, 0]])
    pi /= pi.sum()
    np.testing.assert_allclose(pf.pi, pi, atol=1e-10)
    np.testing.assert_allclose(pf.pi, [0.406930, 0.593070], atol=1e-6)


def test_perron_rejects_reducible():
    with pytest.raises(ValueError, match="reducible"):
        perron(np.eye(2))


def test_perron_rejects_negative():
    with pytest.raises(ValueError):
        perron([[1, -1], [1, 1]])


def test_perron_convergence_error_carries_residual(monkeypatch):
    monkeypatch.setattr(spectral, "POWER_MAX_ITER", 2)
    with pytest.raises(ConvergenceError) as err:
        spectral.perron([[1, 2], [3, 4]])
    assert err.value.residual > 0


def _random_irreducible(rng, max_dim=8):
    k = int(rng.integers(1, max_dim + 1))
    return rng.random((k, k)) * rng.uniform(0.2, 5.0) + 1e-3


def test_perron_invariants_random_suite():
    rng = np.random.default_rng(42)
    for _ in range(300):
        h = _random_irreducible(rng)
        pf = perron(h)
        assert np.abs(pf.pi @ h - pf.lam * pf.pi).sum() <= 1e-10
        assert np.abs(h @ pf.v - pf.lam * pf.v).sum() <= 1e-10
        assert abs(pf.pi.sum() - 1.0) <= 1e-12
        assert abs(pf.pi @ pf.v - 1.0) <= 1e-12
        assert np.all(pf.pi > 0) and np.all(pf.v > 0)
        row_sums = h.sum(axis=1)
        assert sigma(h) <= pf.lam + 1e-12
        assert pf.lam <= rho(h) + 1e-12
        if np.ptp(row_sums) > 1e-9:
            assert sigma(h) < pf.lam < rho(h)


def test_pi_continuity_probe():
    # exact identity: pi_E - pi = -pi_E (dlam I - E) M^{-1}, so the l1 change
    # is bounded by (|dlam| + rho(E)) * rho(M^{-1})
    rng = np.random.default_rng(3)
    for _ in range(50):
        h = _random_irreducible(rng, max_dim=6)
        k = h.shape[0]
        pf = perron(h)
        e = rng.uniform(-1, 1, (k, k)) * 1e-7
        e[h + e < 0] = 0.0  # keep the perturbed matrix nonnegative
        pf_e = perron(h + e)
        m = pf.lam * np.eye(k) - h + np.ones((k, k))
        bound = (abs(pf_e.lam - pf.lam) + rho(e)) * rho(np.linalg.inv(m))
        assert np.abs(pf_e.pi - pf.pi).sum() <= bound * (1 + 1e-9)
        assert rho(e) <= 1e-6
