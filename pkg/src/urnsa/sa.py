"""Stochastic-approximation clock machinery.

Partial-sum times, forward/backward level-crossing indices, the two path
interpolants with their exact left extensions, the interpolation-discrepancy
integral, the oscillation functional, and delayed-sum negligibility
statistics.  Empty sums are zero throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import drift
from .errors import NeedsMoreDataError

__all__ = [
    "StepSizeSeq",
    "PathSample",
    "partial_sums",
    "crossing_forward",
    "crossing_backward",
    "harmonic_crossing_forward",
    "interp_linear",
    "interp_const",
    "discrepancy_e",
    "oscillation",
    "delayed_sum_stats",
]

LINEAR_SCAN_MAX = 10_000


class StepSizeSeq:
    """A realized positive step-size sequence with memoized partial sums."""

    def __init__(self, values):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1:
            raise ValueError("step sizes must form a vector")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("step sizes must be finite and positive")
        self.values = v
        self._prefix: np.ndarray | None = None

    @classmethod
    def harmonic(cls, n: int) -> "StepSizeSeq":
        """The deterministic rule a_m = 1/(m+1), realized for m < n."""
        return cls(1.0 / (np.arange(n) + 1.0))

    @classmethod
    def from_totals(cls, s_path) -> "StepSizeSeq":
        """Urn step sizes a_m = 1/S_{m+1} from a path of post-trial totals."""
        return cls(1.0 / np.asarray(s_path, dtype=float))

    def __len__(self) -> int:
        return self.values.size

    @property
    def prefix(self) -> np.ndarray:
        """t_m = a_0 + ... + a_{m-1} for 0 <= m <= len(self)."""
        if self._prefix is None:
            self._prefix = np.concatenate(([0.0], np.cumsum(self.values)))
        return self._prefix


def _as_seq(a) -> StepSizeSeq:
    return a if isinstance(a, StepSizeSeq) else StepSizeSeq(a)


def partial_sums(a, n_max: int) -> np.ndarray:
    """Times t_0 = 0, t_m = a_0 + ... + a_{m-1} up to m = n_max."""
    seq = _as_seq(a)
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    if n_max > len(seq):
        raise NeedsMoreDataError(f"need {n_max} step sizes, have {len(seq)}")
    return seq.prefix[: n_max + 1].copy()


def crossing_forward(a, n: int, t: float) -> int:
    """max{m >= n : a_n + ... + a_{m-1} <= t}.

    Raises ``NeedsMoreDataError`` when the realized sequence ends before
    the crossing is bracketed.
    """
    seq = _as_seq(a)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if t <= 0:
        raise ValueError("t must be positive")
    if n > len(seq):
        raise NeedsMoreDataError(f"start index {n} beyond realized sequence of {len(seq)}")
    prefix = seq.prefix
    target = prefix[n] + t
    last = len(seq)
    if prefix[last] <= target:
        raise NeedsMoreDataError("sequence exhausted before the forward crossing was bracketed")
    if last <= LINEAR_SCAN_MAX:
        m = n
        while prefix[m + 1] <= target:
            m += 1
        return m
    return int(np.searchsorted(prefix, target, side="right")) - 1


def crossing_backward(a, n: int, t: float) -> int:
    """min{0 <= m <= n-1 : a_{m+1} + ... + a_{n-1} <= t}."""
    seq = _as_seq(a)
    if n <= 0:
        raise ValueError("n must be positive")
    if t <= 0:
        raise ValueError("t must be positive")
    if n > len(seq) + 1:
        raise NeedsMoreDataError(f"index {n} beyond realized sequence of {len(seq)}")
    prefix = seq.prefix
    threshold = prefix[n] - t
    if len(seq) + 1 <= LINEAR_SCAN_MAX:
        j = 1
        while prefix[j] < threshold:
            j += 1
        return j - 1
    idx = int(np.searchsorted(prefix, threshold, side="left"))
    return max(0, idx - 1)


def harmonic_crossing_forward(n: int, t: float, chunk: int = 1 << 20) -> int:
    """Forward crossing for the rule a_m = 1/(m+1), without materializing it.

    Sums 1/(n+1) + ... + 1/m in chunks until it would exceed t; the result
    is deterministic and grows like n e^t, so no array of that length is
    ever allocated.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if t <= 0:
        raise ValueError("t must be positive")
    total = 0.0
    m = n  # invariant: total = a_n + ... + a_{m-1} <= t
    while True:
        block = 1.0 / np.arange(m + 1, m + 1 + chunk, dtype=float)
        block_total = float(block.sum())
        if total + block_total <= t:
            total += block_total
            m += chunk
            continue
        cs = total + np.cumsum(block)
        step = int(np.searchsorted(cs, t, side="right"))
        return m + step


@dataclass(frozen=True)
class PathSample:
    """Ordered interpolation knots (t_k, x_k) with x_k in R^K."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1 or t.size == 0 or v.shape[0] != t.size:
            raise ValueError("times and values must align and be nonempty")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
            raise ValueError("knots must be finite")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> int:
        return self.values.shape[1]


def interp_linear(p: PathSample, t: float) -> np.ndarray:
    """Continuous piecewise-linear interpolant; equals the first knot value
    for t at or before the first knot (and the last value beyond the data)."""
    times, values = p.times, p.values
    if t <= times[0]:
        return values[0].copy()
    if t >= times[-1]:
        return values[-1].copy()
    i = int(np.searchsorted(times, t, side="right")) - 1
    a = times[i + 1] - t
    b = t - times[i]
    dt = times[i + 1] - times[i]
    return values[i] * (a / dt) + values[i + 1] * (b / dt)


def interp_const(p: PathSample, t: float) -> np.ndarray:
    """Right-continuous piecewise-constant interpolant; zero before the
    first knot."""
    times, values = p.times, p.values
    if t < times[0]:
        return np.zeros(p.k)
    i = int(np.searchsorted(times, t, side="right")) - 1
    return values[min(i, values.shape[0] - 1)].copy()


def _segment_breaks(times: np.ndarray, lo: float, hi: float) -> np.ndarray:
    inner = times[(times > lo) & (times < hi)]
    return np.concatenate(([lo], inner, [hi]))


def discrepancy_e(h, path_linear: PathSample, path_const: PathSample, n: int, t: float) -> np.ndarray:
    """Difference of the drift integrals along the two interpolants.

    Evaluates int_0^t h(const(t_n + s)) ds - int_0^t h(linear(t_n + s)) ds
    by exact piecewise quadrature: the integrand is piecewise constant
    along the constant interpolant and piecewise quadratic along the linear
    one, so rectangle sums and per-segment Simpson are both exact.
    """
    if not np.array_equal(path_linear.times, path_const.times) or not np.array_equal(
        path_linear.values, path_const.values
    ):
        raise ValueError("both interpolants must come from the same run")
    p = path_linear
    times = p.times
    if not 0 <= n < times.size:
        raise ValueError("n outside the sampled path")
    lo_abs = times[n] + min(0.0, t)
    hi_abs = times[n] + max(0.0, t)
    if hi_abs > times[-1]:
        raise ValueError("requested range exceeds the sampled path")

    hm = np.asarray(h, dtype=float)
    total_const = np.zeros(p.k)
    total_lin = np.zeros(p.k)
    breaks = _segment_breaks(times, lo_abs, hi_abs)
    for u0, u1 in zip(breaks[:-1], breaks[1:]):
        width = u1 - u0
        if width <= 0.0:
            continue
        total_const += width * drift(hm, interp_const(p, u0))
        g0 = drift(hm, interp_linear(p, u0))
        gm = drift(hm, interp_linear(p, 0.5 * (u0 + u1)))
        g1 = drift(hm, interp_linear(p, u1))
        total_lin += (width / 6.0) * (g0 + 4.0 * gm + g1)
    result = total_const - total_lin
    return result if t >= 0 else -result


def oscillation(p: PathSample, a: float, b: float, delta: float) -> float:
    """sup of ||x(t) - x(s)||_1 over a <= t < s <= b with s - t <= delta.

    For a piecewise-linear path the supremum is attained at pairs drawn
    from the knots, the interval ends, and their +-delta shifts, so it is
    computed exactly from that candidate set.
    """
    if not a < b:
        raise ValueError("need a < b")
    if delta <= 0:
        raise ValueError("delta must be positive")
    times = p.times
    knots = times[(times >= a) & (times <= b)]
    cand = np.concatenate((knots, knots - delta, knots + delta, [a, b, a + delta, b - delta]))
    cand = np.unique(cand[(cand >= a) & (cand <= b)])
    pts = np.stack([interp_linear(p, t) for t in cand])
    best = 0.0
    hi = 0
    n_cand = cand.size
    for i in range(n_cand):
        limit = cand[i] + delta
        if hi <= i:
            hi = i + 1
        while hi < n_cand and cand[hi] <= limit:
            hi += 1
        if hi > i + 1:
            diffs = np.abs(pts[i + 1 : hi] - pts[i]).sum(axis=1)
            best = max(best, float(diffs.max()))
    return best


def delayed_sum_stats(a, beta, n: int, t: float) -> tuple[float, float]:
    """Extremes of the forward and backward delayed error sums.

    fwd = max over n <= m <= crossing_forward(a, n, t) of
    ||sum_{i=n}^{m} a_i beta_i||_1, and bwd the analogue over
    crossing_backward(a, n, t) <= m <= n-1 of ||sum_{i=m}^{n-1} a_i beta_i||_1
    (bwd is zero for n = 0, the window being empty).
    """
    seq = _as_seq(a)
    bv = np.asarray(beta, dtype=float)
    if bv.ndim == 1:
        bv = bv[:, None]
    m_up = crossing_forward(seq, n, t)
    if bv.shape[0] <= m_up:
        raise NeedsMoreDataError(f"need error terms through index {m_up}, have {bv.shape[0]}")

    weighted = seq.values[: m_up + 1, None] * bv[: m_up + 1]
    cums = np.cumsum(weighted, axis=0)
    base = cums[n - 1] if n > 0 else np.zeros(bv.shape[1])
    fwd = float(np.abs(cums[n : m_up + 1] - base).sum(axis=1).max())

    if n == 0:
        return fwd, 0.0
    m_dn = crossing_backward(seq, n, t)
    lower = np.vstack((np.zeros((1, bv.shape[1])), cums[: n - 1]))  # cums[m-1] for m = 0..n-1
    bwd = float(np.abs(cums[n - 1] - lower[m_dn:n]).sum(axis=1).max())
    return fwd, bwd
