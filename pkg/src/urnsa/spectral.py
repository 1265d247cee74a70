"""Nonnegative-matrix utilities: row-sum norms, irreducibility, Perron data.

Row-vector convention throughout the package: probability vectors are rows
acting on matrices from the left, so the stationary distribution satisfies
``pi @ H == lam * pi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

__all__ = ["PerronData", "rho", "sigma", "is_irreducible", "perron"]

POWER_TOL = 1e-13
POWER_MAX_ITER = 100_000


def as_square_matrix(a) -> np.ndarray:
    """Coerce to a float square matrix with finite entries."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def rho(a) -> float:
    """Maximum absolute row sum.

    This is the operator norm of ``x -> x @ a`` acting on row vectors with
    the l1 norm.  Signed entries are allowed: the norm is routinely applied
    to differences of generating matrices.
    """
    m = as_square_matrix(a)
    return float(np.abs(m).sum(axis=1).max())


def sigma(a) -> float:
    """Minimum absolute row sum."""
    m = as_square_matrix(a)
    return float(np.abs(m).sum(axis=1).min())


def _reaches_all(pattern: np.ndarray) -> bool:
    """True iff node 0 reaches every node of the boolean adjacency matrix."""
    k = pattern.shape[0]
    seen = np.zeros(k, dtype=bool)
    seen[0] = True
    frontier = seen.copy()
    while frontier.any():
        nxt = pattern[frontier].any(axis=0) & ~seen
        seen |= nxt
        frontier = nxt
    return bool(seen.all())


def is_irreducible(a) -> bool:
    """Strong connectivity of the directed graph with an edge i -> j
    whenever ``a[i, j] > 0``.

    Decided by two reachability sweeps (forward and reverse), not by matrix
    powers.  A 1x1 matrix is irreducible iff its entry is positive.
    """
    m = as_square_matrix(a)
    if np.any(m < 0):
        raise ValueError("matrix must be nonnegative")
    if m.shape[0] == 1:
        return bool(m[0, 0] > 0)
    pattern = m > 0
    return _reaches_all(pattern) and _reaches_all(pattern.T)


@dataclass(frozen=True)
class PerronData:
    """Dominant eigenvalue with its normalized left/right eigenvectors.

    ``pi`` is the unique probability left eigenvector (pi @ 1 == 1) and
    ``v`` the positive right eigenvector scaled so that pi @ v == 1.
    """

    lam: float
    pi: np.ndarray
    v: np.ndarray


def perron(h) -> PerronData:
    """Perron data of an irreducible nonnegative matrix.

    The dominant eigenvalue comes from power iteration on the primitive
    shift ``H + rho(H) I`` (then un-shifted).  The left vector is obtained
    from the linear system ``pi (lam I - H + 1^T 1) = 1``, whose matrix is
    invertible for irreducible H, and the right vector is the power-iterate
    rescaled to satisfy ``pi @ v == 1``.

    Raises ``ValueError`` for reducible input and ``ConvergenceError`` if
    the iteration budget is exhausted.
    """
    m = as_square_matrix(h)
    if np.any(m < 0):
        raise ValueError("matrix must be nonnegative")
    if not is_irreducible(m):
        raise ValueError("matrix is reducible; Perron data requires irreducibility")
    k = m.shape[0]
    shift = rho(m)
    b = m + shift * np.eye(k)

    w = np.full(k, 1.0 / k)
    converged = False
    for _ in range(POWER_MAX_ITER):
        bw = b @ w
        w_next = bw / bw.sum()  # bw > 0 for primitive b and positive w
        if np.abs(w_next - w).sum() <= POWER_TOL:
            w = w_next
            converged = True
            break
        w = w_next
    bw = b @ w
    lam_b = float(bw.sum())
    if not converged:
        residual = float(np.abs(bw - lam_b * w).sum())
        raise ConvergenceError("power iteration did not converge", residual=residual)

    lam = lam_b - shift
    ones = np.ones(k)
    system = lam * np.eye(k) - m + np.outer(ones, ones)
    pi = np.linalg.solve(system.T, ones)
    v = w / float(pi @ w)
    return PerronData(lam=lam, pi=pi, v=v)
