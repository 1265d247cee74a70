"""Monte Carlo verification harness.

Every routine here runs batches of independent replicates and reduces them
in a fixed order, so identical (experiment, replicates, seed) inputs give
identical reports.  Convergence errors are always measured against the
Perron data of the replicate's own realized base matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import run_batch
from .errors import ConfigError
from .generators import GeneratorSpec
from .spectral import PerronData, is_irreducible, perron, rho, sigma
from .sa import PathSample, harmonic_crossing_forward, oscillation
from .urn import UrnExperiment

__all__ = [
    "MetricCurve",
    "ConvergenceReport",
    "EventReport",
    "CesaroReport",
    "NegligibilityReport",
    "OscillationReport",
    "run_convergence",
    "event_frequency",
    "cesaro_mds",
    "negligibility_curves",
    "oscillation_curve",
    "proportion_spread",
]

METRICS = ("prop", "total", "comp", "count")


@dataclass(frozen=True)
class MetricCurve:
    """Per-checkpoint summary of one scalar error across replicates."""

    estimate: np.ndarray
    stderr: np.ndarray
    q50: np.ndarray
    q90: np.ndarray


@dataclass(frozen=True)
class ConvergenceReport:
    """L1-error curves for the four limit theorems."""

    checkpoints: tuple[int, ...]
    metrics: dict[str, MetricCurve]
    replicates: int
    seed: int
    config_digest: str = ""


@dataclass(frozen=True)
class EventReport:
    """Empirical frequency of the step-size comparability event."""

    n_list: tuple[int, ...]
    q_list: tuple[int, ...]
    freq: np.ndarray
    stderr: np.ndarray
    bound_sigma: float
    bound_rho: float
    replicates: int
    seed: int
    config_digest: str = ""


@dataclass(frozen=True)
class CesaroReport:
    """Decay of the Cesaro average of the total-increment martingale part."""

    n_list: tuple[int, ...]
    curve: MetricCurve
    replicates: int
    seed: int
    config_digest: str = ""


@dataclass(frozen=True)
class NegligibilityReport:
    """Quantile decay of forward/backward delayed-sum extremes.

    ``stats`` maps (beta, direction) with beta in {"D", "xi"} and direction
    in {"fwd", "bwd"} to (median, q90) arrays over ``n_list``.
    """

    t: float
    n_list: tuple[int, ...]
    stats: dict[tuple[str, str], tuple[np.ndarray, np.ndarray]]
    replicates: int
    seed: int
    config_digest: str = ""


@dataclass(frozen=True)
class OscillationReport:
    """Oscillation of the interpolated proportion path over shifted windows."""

    t_window: float
    delta: float
    n_list: tuple[int, ...]
    median: np.ndarray
    q90: np.ndarray
    replicates: int
    seed: int
    config_digest: str = ""


def _curve(samples: np.ndarray) -> MetricCurve:
    """Reduce (replicates, points) samples to a deterministic curve."""
    est = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    q50 = np.quantile(samples, 0.5, axis=0)
    q90 = np.quantile(samples, 0.9, axis=0)
    return MetricCurve(estimate=est, stderr=se, q50=q50, q90=q90)


def _require_irreducible(exp: UrnExperiment) -> None:
    if exp.h_set is not None:
        for i, m in enumerate(exp.h_set):
            if not is_irreducible(m):
                raise ConfigError(f"H_set[{i}]", "matrix must be irreducible")
    elif not is_irreducible(exp.generator.h):
        raise ConfigError("H", "matrix must be irreducible")


def _perron_per_replicate(exp: UrnExperiment, h_index) -> tuple[np.ndarray, np.ndarray]:
    """(lam, pi) per replicate, from each replicate's realized base matrix."""
    if exp.h_set is None:
        pf = perron(exp.generator.h)
        k = exp.generator.k
        n = 1 if h_index is None else len(h_index)
        return np.full(n, pf.lam), np.broadcast_to(pf.pi, (n, k)).copy()
    data: dict[int, PerronData] = {i: perron(m) for i, m in enumerate(exp.h_set)}
    lam = np.array([data[i].lam for i in h_index])
    pi = np.stack([data[i].pi for i in h_index])
    return lam, pi


def run_convergence(
    exp: UrnExperiment,
    n_max: int,
    checkpoints,
    replicates: int,
    seed: int,
    *,
    threads: int | None = None,
    config_digest: str = "",
) -> ConvergenceReport:
    """Estimate the four limit errors at each checkpoint.

    Per replicate and checkpoint n the sampled errors are
    ||C/S - pi||_1, |S/n - lam|, ||C/n - lam pi||_1 and ||N/n - pi||_1.
    """
    _require_irreducible(exp)
    if replicates < 2:
        raise ConfigError("replicates", "need at least 2 replicates for standard errors")
    cps = tuple(int(n) for n in checkpoints)
    if any(n < 1 for n in cps):
        raise ConfigError("checkpoints", "convergence checkpoints must be >= 1")

    batch = run_batch(
        exp, replicates=replicates, seed=seed, n_max=n_max,
        checkpoints=cps, threads=threads,
    )
    lam, pi = _perron_per_replicate(exp, batch.h_index)
    if exp.h_set is None and batch.h_index is None:
        lam = np.full(replicates, lam[0])
        pi = np.broadcast_to(pi[0], (replicates, exp.generator.k)).copy()

    n_arr = np.array(cps, dtype=float)
    x = batch.cp_c / batch.cp_s[:, :, None]
    err = {
        "prop": np.abs(x - pi[:, None, :]).sum(axis=2),
        "total": np.abs(batch.cp_s / n_arr - lam[:, None]),
        "comp": np.abs(batch.cp_c / n_arr[:, None] - lam[:, None, None] * pi[:, None, :]).sum(axis=2),
        "count": np.abs(batch.cp_n / n_arr[:, None] - pi[:, None, :]).sum(axis=2),
    }
    metrics = {name: _curve(err[name]) for name in METRICS}
    return ConvergenceReport(
        checkpoints=cps, metrics=metrics, replicates=replicates,
        seed=seed, config_digest=config_digest,
    )


def event_frequency(
    exp: UrnExperiment,
    a_upper: float,
    b_lower: float,
    t_horizon: float,
    n_list,
    replicates: int,
    seed: int,
    *,
    threads: int | None = None,
    config_digest: str = "",
) -> EventReport:
    """Empirical probability that B <= S_{m+1}/(m+1) <= A on the whole range
    n <= m <= q_n, with q_n the deterministic forward crossing of the
    harmonic step sizes at horizon T*A."""
    if not 0 < b_lower < a_upper:
        raise ConfigError("event.B", "need 0 < B < A")
    ns = tuple(int(n) for n in n_list)
    if not ns or any(n < 1 for n in ns):
        raise ConfigError("event.n_list", "need positive window starts")
    qs = tuple(harmonic_crossing_forward(n, t_horizon * a_upper) for n in ns)
    windows = (np.array(ns, dtype=np.int64), np.array(qs, dtype=np.int64))
    batch = run_batch(
        exp, replicates=replicates, seed=seed, n_max=max(qs) + 1,
        windows=windows, threads=threads,
    )
    ok = (batch.win_min >= b_lower) & (batch.win_max <= a_upper)
    freq = ok.mean(axis=0)
    se = np.sqrt(freq * (1.0 - freq) / replicates)

    if exp.h_set is not None:
        sig = np.array([sigma(m) for m in exp.h_set])[batch.h_index]
        rh = np.array([rho(m) for m in exp.h_set])[batch.h_index]
    else:
        sig = np.array([sigma(exp.generator.h)])
        rh = np.array([rho(exp.generator.h)])
    return EventReport(
        n_list=ns, q_list=qs, freq=freq, stderr=se,
        bound_sigma=float((sig < 2.0 * b_lower).mean()),
        bound_rho=float((rh > a_upper / 2.0).mean()),
        replicates=replicates, seed=seed, config_digest=config_digest,
    )


def cesaro_mds(
    exp: UrnExperiment,
    n_list,
    replicates: int,
    seed: int,
    *,
    threads: int | None = None,
    config_digest: str = "",
) -> CesaroReport:
    """L1 estimate of |(1/n) sum_{k<=n} (Y_k - E[Y_k | past])| per n."""
    ns = tuple(int(n) for n in n_list)
    if not ns or any(n < 1 for n in ns):
        raise ConfigError("cesaro.n_list", "need positive indices")
    if replicates < 2:
        raise ConfigError("replicates", "need at least 2 replicates for standard errors")
    acc = np.zeros(replicates)
    snaps = np.zeros((replicates, len(ns)))

    def consume(base: int, data: dict) -> bool:
        ymd = data["ymd"]
        cs = np.cumsum(ymd, axis=1)
        for j, n in enumerate(ns):
            if base < n <= base + ymd.shape[1]:
                snaps[:, j] = acc + cs[:, n - 1 - base]
        acc[:] += cs[:, -1]
        return True

    run_batch(
        exp, replicates=replicates, seed=seed, n_max=max(ns),
        record=("ymd",), consumer=consume, threads=threads,
    )
    samples = np.abs(snaps) / np.array(ns, dtype=float)
    return CesaroReport(
        n_list=ns, curve=_curve(samples), replicates=replicates,
        seed=seed, config_digest=config_digest,
    )


def negligibility_curves(
    exp: UrnExperiment,
    t: float,
    n_list,
    replicates: int,
    seed: int,
    *,
    betas=("D", "xi"),
    threads: int | None = None,
    max_steps: int = 100_000_000,
    config_digest: str = "",
) -> NegligibilityReport:
    """Median and 0.9-quantile of the delayed-sum extremes.

    The error sequences are the martingale part D and the generating-matrix
    perturbation xi of the urn's SA decomposition, each weighted by the
    random step a_m = 1/S_{m+1}.  Forward windows are tracked online until
    their level crossings complete; backward windows only reach back to
    max(n_list), so their prefix sums fit in memory.
    """
    if t <= 0:
        raise ConfigError("diagnostics.t", "window length must be positive")
    ns = tuple(int(n) for n in n_list)
    if not ns or any(n < 1 for n in ns):
        raise ConfigError("diagnostics.n_list", "need positive indices")
    for b in betas:
        if b not in ("D", "xi"):
            raise ConfigError("diagnostics.beta", f"unknown error sequence {b!r}")
    k = exp.generator.k
    max_n = max(ns)
    n_win = len(ns)
    key = {"D": "d", "xi": "xi"}

    # prefix sums P_m = sum_{i<m} a_i beta_i and T_m = sum_{i<m} a_i, m <= max_n
    prefix = {b: np.zeros((replicates, max_n + 1, k)) for b in betas}
    t_prefix = np.zeros((replicates, max_n + 1))
    # forward trackers per window
    fwd_best = {b: np.zeros((replicates, n_win)) for b in betas}
    fwd_cur = {b: np.zeros((replicates, n_win, k)) for b in betas}
    asum = np.zeros((replicates, n_win))

    def consume(base: int, data: dict) -> bool:
        s_blk = data["s"]
        ns_blk = s_blk.shape[1]
        a_blk = 1.0 / s_blk
        hi = base + ns_blk
        if base < max_n:
            take = min(ns_blk, max_n - base)
            t_prefix[:, base + 1 : base + take + 1] = (
                t_prefix[:, base : base + 1] + np.cumsum(a_blk[:, :take], axis=1)
            )
            for b in betas:
                contrib = a_blk[:, :take, None] * data[key[b]][:, :take]
                prefix[b][:, base + 1 : base + take + 1] = (
                    prefix[b][:, base : base + 1] + np.cumsum(contrib, axis=1)
                )
        for j, n0 in enumerate(ns):
            if hi <= n0:
                continue
            lo = max(0, n0 - base)
            a_sl = a_blk[:, lo:]
            a_cum = asum[:, j : j + 1] + np.cumsum(a_sl, axis=1)
            valid = (a_cum - a_sl) <= t  # sum over [n0, m-1] stays within t
            for b in betas:
                contrib = a_sl[:, :, None] * data[key[b]][:, lo:]
                csum = fwd_cur[b][:, j, None, :] + np.cumsum(contrib, axis=1)
                norms = np.abs(csum).sum(axis=2)
                norms[~valid] = -np.inf
                fwd_best[b][:, j] = np.maximum(fwd_best[b][:, j], norms.max(axis=1))
                fwd_cur[b][:, j] = csum[:, -1]
            asum[:, j] = a_cum[:, -1]
        # done once every replicate has crossed the forward level of max(n)
        if hi <= max(ns):
            return True
        last = ns.index(max(ns))
        return not bool(np.all(asum[:, last] - a_blk[:, -1] > t))

    record = ["s"] + [key[b] for b in betas]
    run_batch(
        exp, replicates=replicates, seed=seed, n_max=None,
        record=tuple(record), consumer=consume,
        max_steps=max_steps, threads=threads,
    )

    stats: dict[tuple[str, str], tuple[np.ndarray, np.ndarray]] = {}
    for b in betas:
        stats[(b, "fwd")] = (
            np.quantile(fwd_best[b], 0.5, axis=0),
            np.quantile(fwd_best[b], 0.9, axis=0),
        )
        bwd = np.zeros((replicates, n_win))
        for j, n0 in enumerate(ns):
            for r in range(replicates):
                threshold = t_prefix[r, n0] - t
                idx = int(np.searchsorted(t_prefix[r, : n0 + 1], threshold, side="left"))
                m_dn = max(0, idx - 1)
                diffs = prefix[b][r, n0] - prefix[b][r, m_dn:n0]
                bwd[r, j] = np.abs(diffs).sum(axis=1).max()
        stats[(b, "bwd")] = (
            np.quantile(bwd, 0.5, axis=0),
            np.quantile(bwd, 0.9, axis=0),
        )
    return NegligibilityReport(
        t=t, n_list=ns, stats=stats, replicates=replicates,
        seed=seed, config_digest=config_digest,
    )


def oscillation_curve(
    exp: UrnExperiment,
    t_window: float,
    delta: float,
    n_list,
    replicates: int,
    seed: int,
    *,
    threads: int | None = None,
    max_steps: int = 10_000_000,
    config_digest: str = "",
) -> OscillationReport:
    """Oscillation of the linearly interpolated proportion path over
    [t_n, t_n + T] at resolution delta, per shift n."""
    ns = tuple(int(n) for n in n_list)
    if not ns or any(n < 0 for n in ns):
        raise ConfigError("oscillation.n_list", "need nonnegative indices")
    max_n = max(ns)
    s_parts: list[np.ndarray] = []
    x_parts: list[np.ndarray] = []
    asum = np.zeros(replicates)

    def consume(base: int, data: dict) -> bool:
        s_parts.append(data["s"].copy())
        x_parts.append(data["x"].copy())
        a_blk = 1.0 / data["s"]
        hi = base + a_blk.shape[1]
        if hi <= max_n:
            asum[:] += a_blk.sum(axis=1)
            return True
        lo = max(0, max_n - base)
        asum[:] += a_blk[:, lo:].sum(axis=1)
        return not bool(np.all(asum - a_blk[:, -1] > t_window))

    run_batch(
        exp, replicates=replicates, seed=seed, n_max=None,
        record=("s", "x"), consumer=consume,
        max_steps=max_steps, threads=threads,
    )
    s_path = np.concatenate(s_parts, axis=1)
    x_path = np.concatenate(x_parts, axis=1)  # x[r, m] = proportions after m trials
    osc = np.zeros((replicates, len(ns)))
    for r in range(replicates):
        times = np.concatenate(([0.0], np.cumsum(1.0 / s_path[r])[:-1]))
        path = PathSample(times=times, values=x_path[r])
        for j, n0 in enumerate(ns):
            lo = times[n0]
            osc[r, j] = oscillation(path, lo, lo + t_window, delta)
    return OscillationReport(
        t_window=t_window, delta=delta, n_list=ns,
        median=np.quantile(osc, 0.5, axis=0), q90=np.quantile(osc, 0.9, axis=0),
        replicates=replicates, seed=seed, config_digest=config_digest,
    )


def proportion_spread(
    exp: UrnExperiment,
    n: int,
    replicates: int,
    seed: int,
    *,
    threads: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of the proportion vector at trial n across
    replicates.  Used for distributional negative controls, where the
    proportion converges to a random limit rather than a constant."""
    batch = run_batch(
        exp, replicates=replicates, seed=seed, n_max=n,
        checkpoints=(n,), threads=threads,
    )
    x = batch.cp_c[:, 0, :] / batch.cp_s[:, 0, None]
    return x.mean(axis=0), x.var(axis=0, ddof=1)
