"""Batched urn simulation driven by a jitted kernel.

Replicates advance in lockstep through fixed-size random blocks, each fed
from its own stream, so every replicate is individually reproducible and
bit-identical to the scalar reference in ``urn``.  The kernel parallelizes
over replicates; all outputs are written to per-replicate slices, so the
results do not depend on the thread schedule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import config as _numba_config
from numba import njit, prange, set_num_threads

from . import generators as gen
from .errors import ConfigError, NeedsMoreDataError
from .urn import UrnExperiment, UrnState

_numba_config.THREADING_LAYER = "workqueue"

__all__ = ["BatchRun", "run_batch"]

KIND_CODES = {"fixed": 0, "iid_scaled": 1, "cesaro_spike": 2, "markov_mod": 3}

DEFAULT_MAX_STEPS = 1 << 62


@dataclass
class BatchRun:
    """Checkpointed batch output.

    ``cp_c``/``cp_s``/``cp_n`` have shape (replicates, n_checkpoints, ...)
    and hold the state after each checkpointed trial; ``h`` is the realized
    base matrix per replicate; ``win_min``/``win_max`` are the per-window
    extremes of S_{m+1}/(m+1) when ratio windows were requested.
    """

    checkpoints: tuple[int, ...]
    cp_c: np.ndarray
    cp_s: np.ndarray
    cp_n: np.ndarray
    h: np.ndarray
    h_index: np.ndarray | None
    win_min: np.ndarray
    win_max: np.ndarray
    steps_run: int

    def state(self, replicate: int, slot: int) -> UrnState:
        return UrnState(
            c=self.cp_c[replicate, slot].copy(),
            s=float(self.cp_s[replicate, slot]),
            draws=self.cp_n[replicate, slot].copy(),
            step=self.checkpoints[slot],
        )


@njit(cache=True, parallel=True)
def _run_block(kind, C, S, N, mode, base, ns, u, w, has_w,
               h, h_rs, m1, m1_rs, mset, mset_rs, ttab, spike,
               cp_pos, cp_slot, cp_c, cp_s, cp_n,
               win_lo, win_hi, win_min, win_max,
               rec_s, s_out, rec_x, x_out, rec_d, d_out,
               rec_xi, xi_out, rec_ymd, ymd_out):
    n_rep, k = C.shape
    n_win = win_lo.shape[0]
    n_cp = cp_pos.shape[0]
    need_x = rec_x or rec_d or rec_xi or rec_ymd
    for r in prange(n_rep):
        md = mode[r]
        s_val = S[r]
        cp_i = 0
        x = np.empty(k)
        row = np.empty(k)
        xh = np.empty(k)
        for i in range(ns):
            g = base + i
            # color draw: sequential prefix scan, identical to the scalar path
            us = u[r, i] * s_val
            acc = 0.0
            color = k - 1
            for j in range(k):
                acc += C[r, j]
                if us < acc:
                    color = j
                    break

            spiked = kind >= 2 and spike[i] == 1

            if need_x:
                for j in range(k):
                    x[j] = C[r, j] / s_val

            if rec_ymd:
                y_mean = 0.0
                for j in range(k):
                    hr = h_rs[r, j]
                    if spiked:
                        hr += m1_rs[j] if kind == 2 else mset_rs[md, j]
                    y_mean += x[j] * hr

            if rec_d:
                for j in range(k):
                    t = 0.0
                    for l in range(k):
                        hv = h[r, l, j]
                        if spiked:
                            hv += m1[l, j] if kind == 2 else mset[md, l, j]
                        t += x[l] * hv
                    xh[j] = t

            # realized replacement row and state update
            y = 0.0
            for j in range(k):
                hv = h[r, color, j]
                if spiked:
                    hv += m1[color, j] if kind == 2 else mset[md, color, j]
                rr = hv * w[r, i, color, j] if has_w else hv
                row[j] = rr
                y += rr
                C[r, j] += rr
            s_val += y
            N[r, color] += 1

            if rec_s:
                s_out[r, i] = s_val
            if rec_x:
                for j in range(k):
                    x_out[r, i, j] = x[j]
            if rec_d:
                xh1 = 0.0
                for j in range(k):
                    xh1 += xh[j]
                for j in range(k):
                    d_out[r, i, j] = row[j] - x[j] * y - xh[j] + x[j] * xh1
            if rec_xi:
                if spiked:
                    xd1 = 0.0
                    for j in range(k):
                        t = 0.0
                        for l in range(k):
                            dv = m1[l, j] if kind == 2 else mset[md, l, j]
                            t += x[l] * dv
                        xh[j] = t
                        xd1 += t
                    for j in range(k):
                        xi_out[r, i, j] = xh[j] - x[j] * xd1
                else:
                    for j in range(k):
                        xi_out[r, i, j] = 0.0
            if rec_ymd:
                ymd_out[r, i] = y - y_mean

            for wi in range(n_win):
                if win_lo[wi] <= g <= win_hi[wi]:
                    ratio = s_val / (g + 1)
                    if ratio < win_min[r, wi]:
                        win_min[r, wi] = ratio
                    if ratio > win_max[r, wi]:
                        win_max[r, wi] = ratio

            if cp_i < n_cp and i == cp_pos[cp_i]:
                slot = cp_slot[cp_i]
                for j in range(k):
                    cp_c[r, slot, j] = C[r, j]
                    cp_n[r, slot, j] = N[r, j]
                cp_s[r, slot] = s_val
                cp_i += 1

            if kind == 3:
                md = ttab[md, color]

        S[r] = s_val
        mode[r] = md


_DUMMY2 = np.zeros((1, 1))
_DUMMY3 = np.zeros((1, 1, 1))
_DUMMY4 = np.zeros((1, 1, 1, 1))


def run_batch(
    exp: UrnExperiment,
    *,
    replicates: int,
    seed: int,
    n_max: int | None = None,
    checkpoints=(),
    windows: tuple[np.ndarray, np.ndarray] | None = None,
    record=(),
    consumer: Callable[[int, dict], bool] | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    threads: int | None = None,
) -> BatchRun:
    """Advance ``replicates`` independent paths in lockstep.

    With ``n_max`` the run has a fixed horizon.  Without it the run keeps
    going until ``consumer`` returns False (raising ``NeedsMoreDataError``
    at ``max_steps``).  ``record`` selects per-step streams ("s", "x", "d",
    "xi", "ymd") handed to ``consumer`` block by block as read-only views;
    consumers must copy anything they keep.  ``windows`` is a pair of index
    arrays [lo, hi] (inclusive) over which per-replicate extremes of
    S_{m+1}/(m+1) are tracked.
    """
    if replicates < 1:
        raise ConfigError("replicates", "need at least one replicate")
    if n_max is None and consumer is None:
        raise ConfigError("n_max", "open-ended runs need a consumer to stop them")
    if threads is not None:
        set_num_threads(max(1, threads))

    spec = exp.generator
    k = spec.k
    streams = [gen.ReplicateStream(seed, r, spec) for r in range(replicates)]

    h_index = None
    if exp.h_set is not None:
        h_index = np.array([s.draw_h_index(len(exp.h_set)) for s in streams], dtype=np.int64)
        h_arr = np.stack([exp.h_set[i] for i in h_index])
    else:
        h_arr = np.broadcast_to(spec.h, (replicates, k, k)).copy()
    h_rs = h_arr.sum(axis=2)

    kind = KIND_CODES[spec.kind]
    m1 = spec.m_spike if spec.m_spike is not None else np.zeros((k, k))
    m1_rs = m1.sum(axis=1)
    if spec.m_set is not None:
        mset = np.stack(spec.m_set)
        ttab = spec.transition
    else:
        mset = np.zeros((1, k, k))
        ttab = np.zeros((1, k), dtype=np.int64)
    mset_rs = mset.sum(axis=2)

    cps = tuple(int(n) for n in checkpoints)
    if any(n < 0 for n in cps) or list(cps) != sorted(set(cps)):
        raise ConfigError("checkpoints", "must be increasing, unique and nonnegative")
    if n_max is not None and any(n > n_max for n in cps):
        raise ConfigError("checkpoints", "must not exceed n_max")
    n_slots = len(cps)
    cp_c = np.zeros((replicates, n_slots, k))
    cp_s = np.zeros((replicates, n_slots))
    cp_n = np.zeros((replicates, n_slots, k), dtype=np.int64)

    state0 = UrnState.initial(exp.c0)
    C = np.broadcast_to(state0.c, (replicates, k)).copy()
    S = np.full(replicates, state0.s)
    N = np.zeros((replicates, k), dtype=np.int64)
    mode = np.zeros(replicates, dtype=np.int64)
    for slot, n in enumerate(cps):
        if n == 0:
            cp_c[:, slot] = C
            cp_s[:, slot] = S
            cp_n[:, slot] = N

    if windows is not None:
        win_lo = np.asarray(windows[0], dtype=np.int64)
        win_hi = np.asarray(windows[1], dtype=np.int64)
        if win_lo.shape != win_hi.shape or np.any(win_lo > win_hi):
            raise ConfigError("windows", "window bounds must align with lo <= hi")
    else:
        win_lo = np.zeros(0, dtype=np.int64)
        win_hi = np.zeros(0, dtype=np.int64)
    win_min = np.full((replicates, win_lo.size), np.inf)
    win_max = np.full((replicates, win_lo.size), -np.inf)

    rec_s = "s" in record
    rec_x = "x" in record
    rec_d = "d" in record
    rec_xi = "xi" in record
    rec_ymd = "ymd" in record
    blk = streams[0].block
    has_w = spec.needs_w
    s_out = np.zeros((replicates, blk)) if rec_s else _DUMMY2
    x_out = np.zeros((replicates, blk, k)) if rec_x else _DUMMY3
    d_out = np.zeros((replicates, blk, k)) if rec_d else _DUMMY3
    xi_out = np.zeros((replicates, blk, k)) if rec_xi else _DUMMY3
    ymd_out = np.zeros((replicates, blk)) if rec_ymd else _DUMMY2

    horizon = n_max if n_max is not None else max_steps
    base = 0
    u_stack = np.empty((replicates, blk))
    w_stack = np.empty((replicates, blk, k, k)) if has_w else _DUMMY4
    cp_global = np.array(cps, dtype=np.int64)
    while base < horizon:
        ns = min(blk, horizon - base)
        for r, st in enumerate(streams):
            u, w = st.next_block()
            u_stack[r] = u
            if has_w:
                w_stack[r] = w
        if kind >= 2:
            spike = gen.spike_flags(base, base + ns)
        else:
            spike = np.zeros(ns, dtype=np.int8)
        # checkpoint n happens after trial n, i.e. at local step n-1-base
        in_blk = (cp_global > base) & (cp_global <= base + ns)
        cp_pos = (cp_global[in_blk] - 1 - base).astype(np.int64)
        cp_slot = np.nonzero(in_blk)[0].astype(np.int64)

        _run_block(kind, C, S, N, mode, base, ns, u_stack, w_stack, has_w,
                   h_arr, h_rs, m1, m1_rs, mset, mset_rs, ttab, spike,
                   cp_pos, cp_slot, cp_c, cp_s, cp_n,
                   win_lo, win_hi, win_min, win_max,
                   rec_s, s_out, rec_x, x_out, rec_d, d_out,
                   rec_xi, xi_out, rec_ymd, ymd_out)
        base += ns

        if consumer is not None:
            data = {}
            if rec_s:
                data["s"] = s_out[:, :ns]
            if rec_x:
                data["x"] = x_out[:, :ns]
            if rec_d:
                data["d"] = d_out[:, :ns]
            if rec_xi:
                data["xi"] = xi_out[:, :ns]
            if rec_ymd:
                data["ymd"] = ymd_out[:, :ns]
            keep_going = consumer(base - ns, data)
            if n_max is None and not keep_going:
                break
    else:
        if n_max is None:
            raise NeedsMoreDataError(f"run did not finish within {max_steps} steps")

    return BatchRun(
        checkpoints=cps, cp_c=cp_c, cp_s=cp_s, cp_n=cp_n,
        h=h_arr, h_index=h_index, win_min=win_min, win_max=win_max,
        steps_run=base,
    )
