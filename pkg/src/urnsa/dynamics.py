"""Quadratic simplex drift and the associated mean-field ODE.

The drift ``x -> x A - x (x A 1^T)`` is tangent to the probability simplex
and, for irreducible nonnegative A, its unique probability-valued flow is
the constant stationary distribution.  The integrator below is a classical
fixed-step 4th-order scheme with a post-step projection that only corrects
floating-point drift off the simplex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, IntegrationError
from .spectral import as_square_matrix, perron

__all__ = [
    "drift",
    "xi_term",
    "OdePath",
    "integrate",
    "settle",
    "fixed_point_residual",
    "check_simplex",
]

SIMPLEX_TOL = 1e-9


def check_simplex(x, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate a probability vector: nonnegative, sums to 1 within tol."""
    xv = np.asarray(x, dtype=float)
    if xv.ndim != 1:
        raise ValueError(f"expected a vector, got shape {xv.shape}")
    if not np.all(np.isfinite(xv)):
        raise ValueError("coordinates must be finite")
    if np.any(xv < 0):
        raise ValueError("coordinates must be nonnegative")
    if abs(xv.sum() - 1.0) > tol:
        raise ValueError(f"coordinates must sum to 1 (got {xv.sum()!r})")
    return xv


def drift(a, x) -> np.ndarray:
    """Evaluate ``x A - x (x A 1^T)``.

    Signed ``a`` is accepted: the same formula applied to a difference of
    matrices yields the perturbation term of the urn's SA decomposition.
    """
    am = np.asarray(a, dtype=float)
    xv = np.asarray(x, dtype=float)
    if am.shape != (xv.size, xv.size):
        raise ValueError(f"dimension mismatch: matrix {am.shape}, vector {xv.shape}")
    xa = xv @ am
    return xa - xv * xa.sum()


def xi_term(h_gen, h, x) -> np.ndarray:
    """Drift formula applied to ``h_gen - h`` (a signed matrix)."""
    hg = np.asarray(h_gen, dtype=float)
    hm = np.asarray(h, dtype=float)
    if hg.shape != hm.shape:
        raise ValueError(f"dimension mismatch: {hg.shape} vs {hm.shape}")
    return drift(hg - hm, x)


@dataclass(frozen=True)
class OdePath:
    """Fixed-step trajectory on the simplex.

    ``max_mass_defect`` is the largest per-step deviation |sum(x) - 1|
    observed *before* projection; the exact flow preserves the simplex, so
    this measures pure discretization/rounding drift.
    """

    times: np.ndarray
    states: np.ndarray
    max_mass_defect: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _rk4_step(a: np.ndarray, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = drift(a, x)
    k2 = drift(a, x + 0.5 * dt * k1)
    k3 = drift(a, x + 0.5 * dt * k2)
    k4 = drift(a, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(h, x0, t_end: float, dt: float) -> OdePath:
    """Integrate the drift ODE from ``x0`` over [0, t_end].

    Classical RK4 with a fixed step; after each step negative coordinates
    are clamped to zero and the state renormalized.  The path is returned
    at every step (t_end is rounded up to a whole number of steps).
    """
    m = as_square_matrix(h)
    x = check_simplex(x0)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    n_steps = max(0, int(np.ceil(t_end / dt - 1e-12)))

    times = np.arange(n_steps + 1, dtype=float) * dt
    states = np.empty((n_steps + 1, x.size))
    states[0] = x
    max_defect = 0.0
    for i in range(1, n_steps + 1):
        x = _rk4_step(m, x, dt)
        if not np.all(np.isfinite(x)):
            raise IntegrationError("integration produced a non-finite state", time=times[i])
        max_defect = max(max_defect, abs(x.sum() - 1.0))
        np.clip(x, 0.0, None, out=x)
        x = x / x.sum()
        states[i] = x
    return OdePath(times=times, states=states, max_mass_defect=max_defect)


def settle(
    h,
    x0,
    dt: float = 0.01,
    t_init: float = 10.0,
    drift_tol: float = 1e-8,
    max_doublings: int = 10,
) -> np.ndarray:
    """Integrate until the drift at the endpoint is below ``drift_tol``.

    The horizon starts at ``t_init`` and doubles (at most ``max_doublings``
    times) until the endpoint is stationary enough; this avoids guessing
    mixing times up front.
    """
    m = as_square_matrix(h)
    x = check_simplex(x0)
    horizon = t_init
    for _ in range(max_doublings + 1):
        x = integrate(m, x, horizon, dt).final
        residual = float(np.abs(drift(m, x)).sum())
        if residual <= drift_tol:
            return x
        horizon *= 2.0
    raise ConvergenceError("ODE did not settle within the horizon cap", residual=residual)


def fixed_point_residual(h) -> float:
    """l1 norm of the drift evaluated at the stationary distribution."""
    m = as_square_matrix(h)
    pf = perron(m)
    return float(np.abs(drift(m, pf.pi)).sum())
