"""Scalar urn process: drawing, evolution, and the exact SA decomposition audit.

This is the reference implementation.  State update arithmetic is written
with explicit per-coordinate loops so the batched engine can reproduce it
bit for bit; see tests for the cross-engine consistency check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import generators as gen
from .dynamics import drift, xi_term
from .errors import ConfigError, GeneratorContractError

__all__ = [
    "UrnState",
    "StepRecord",
    "UrnExperiment",
    "Trajectory",
    "draw_color",
    "advance",
    "sa_residual",
    "simulate",
]


@dataclass(frozen=True)
class UrnState:
    """Composition c, total s, per-color draw counts, and the step index.

    Ball counts are real-valued; no integer rounding happens anywhere.
    """

    c: np.ndarray
    s: float
    draws: np.ndarray
    step: int

    @classmethod
    def initial(cls, c0) -> "UrnState":
        c = np.asarray(c0, dtype=float).copy()
        if c.ndim != 1 or c.size < 1:
            raise ConfigError("C0", "initial composition must be a nonempty vector")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise ConfigError("C0", "initial composition must be finite and nonnegative")
        s = float(c.sum())
        if s <= 0:
            raise ConfigError("C0", "initial composition must be nonzero")
        return cls(c=c, s=s, draws=np.zeros(c.size, dtype=np.int64), step=0)

    @property
    def k(self) -> int:
        return self.c.size

    @property
    def proportions(self) -> np.ndarray:
        return self.c / self.s


@dataclass(frozen=True)
class StepRecord:
    """Full audit of one transition.

    ``chi`` is the drawn color as an index; ``r`` the realized replacement
    matrix; ``h_gen`` its conditional mean given the pre-draw history.
    """

    color: int
    r: np.ndarray
    h_gen: np.ndarray
    y: float
    x_prev: np.ndarray
    s_prev: float
    s_next: float

    @property
    def chi(self) -> np.ndarray:
        e = np.zeros(self.x_prev.size)
        e[self.color] = 1.0
        return e


@dataclass(frozen=True)
class UrnExperiment:
    """Initial composition plus generator; ``h_set`` switches on random-H
    mode where each replicate draws its base matrix from a finite list."""

    c0: np.ndarray
    generator: gen.GeneratorSpec
    h_set: tuple[np.ndarray, ...] | None = None

    def spec_for(self, h: np.ndarray) -> gen.GeneratorSpec:
        if h is self.generator.h:
            return self.generator
        return gen.GeneratorSpec(
            kind=self.generator.kind, h=h, noise=self.generator.noise,
            alpha=self.generator.alpha, m_spike=self.generator.m_spike,
            m_set=self.generator.m_set, transition=self.generator.transition,
        )


def make_experiment(c0, generator: gen.GeneratorSpec, h_set=None) -> UrnExperiment:
    state = UrnState.initial(c0)
    if state.k != generator.k:
        raise ConfigError("C0", f"length {state.k} does not match generator dimension {generator.k}")
    mats = None
    if h_set is not None:
        from .spectral import as_square_matrix

        mats = tuple(as_square_matrix(m) for m in h_set)
        for i, m in enumerate(mats):
            if m.shape != generator.h.shape:
                raise ConfigError(f"H_set[{i}]", "shape must match the generator dimension")
            if np.any(m < 0):
                raise ConfigError(f"H_set[{i}]", "matrices must be nonnegative")
    return UrnExperiment(c0=state.c, generator=generator, h_set=mats)


def draw_color(state: UrnState, u: float) -> int:
    """Color index i with cum_{i-1} <= u * s < cum_i, cum the prefix sum of c.

    Deterministic given (state, u); the sequential accumulation matches the
    batched engine exactly.
    """
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    us = u * state.s
    acc = 0.0
    color = state.k - 1
    for j in range(state.k):
        acc += state.c[j]
        if us < acc:
            color = j
            break
    return color


def _realize(spec: gen.GeneratorSpec, h_gen: np.ndarray, w: np.ndarray | None) -> np.ndarray:
    r = h_gen * w if w is not None else h_gen.copy()
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        raise GeneratorContractError("generator produced a negative or non-finite replacement entry")
    return r


def advance_with(
    state: UrnState,
    spec: gen.GeneratorSpec,
    u: float,
    w: np.ndarray | None,
    mode: int = 0,
) -> tuple[UrnState, StepRecord, int]:
    """One transition driven by explicit random inputs.

    The replacement is sampled from the generator's conditional law given
    the pre-draw history only; the drawn color never reaches the generator.
    """
    color = draw_color(state, u)
    h_gen = gen.generating_matrix(spec, state.step, mode)
    r = _realize(spec, h_gen, w)

    x_prev = state.c / state.s
    c_new = state.c.copy()
    y = 0.0
    for j in range(state.k):
        rr = r[color, j]
        y += rr
        c_new[j] += rr
    s_next = state.s + y
    draws = state.draws.copy()
    draws[color] += 1

    new_state = UrnState(c=c_new, s=s_next, draws=draws, step=state.step + 1)
    record = StepRecord(
        color=color, r=r, h_gen=np.array(h_gen), y=y,
        x_prev=x_prev, s_prev=state.s, s_next=s_next,
    )
    return new_state, record, gen.next_mode(spec, mode, color)


def advance(
    state: UrnState,
    spec: gen.GeneratorSpec,
    rng: np.random.Generator,
    mode: int = 0,
) -> tuple[UrnState, StepRecord, int]:
    """One transition using ``rng`` directly (u first, then entry noise)."""
    u = float(rng.random())
    w = None
    if spec.needs_w:
        shape = (spec.k, spec.k)
        if spec.noise == "exponential":
            w = rng.standard_exponential(shape)
        else:
            w = (spec.alpha - 1.0) / spec.alpha * (rng.pareto(spec.alpha, shape) + 1.0)
    return advance_with(state, spec, u, w, mode)


def sa_residual(record: StepRecord, h_limit) -> float:
    """l1 defect of the exact stochastic-approximation decomposition.

    Writing x' for the post-step proportions, the update must satisfy
    x' - x = (drift(H, x) + D + xi) / s_next with the martingale part
    D = chi R - x Y - x H_gen + x (x H_gen 1^T) and xi the drift formula
    applied to H_gen - H.  The identity is algebraic; the returned value
    is floating-point noise only.
    """
    if h_limit is None:
        raise ConfigError("H", "the limit matrix is required to audit the SA decomposition")
    h = np.asarray(h_limit, dtype=float)
    x = record.x_prev
    chi_r = record.r[record.color]
    xh = x @ record.h_gen
    d = chi_r - x * record.y - xh + x * xh.sum()
    xi = xi_term(record.h_gen, h, x)
    x_new = (x * record.s_prev + chi_r) / record.s_next
    lhs = x_new - x
    rhs = (drift(h, x) + d + xi) / record.s_next
    return float(np.abs(lhs - rhs).sum())


@dataclass(frozen=True)
class Trajectory:
    """Checkpointed states of one simulated path plus optional step audit."""

    checkpoints: tuple[int, ...]
    states: tuple[UrnState, ...]
    records: tuple[StepRecord, ...] | None
    h: np.ndarray
    seed: int
    replicate: int


def simulate(
    exp: UrnExperiment,
    n_max: int,
    checkpoints=(),
    *,
    seed: int = 0,
    replicate: int = 0,
    record_steps: bool = False,
) -> Trajectory:
    """Run one path for ``n_max`` trials, reproducibly.

    The same (experiment, seed, replicate) triple always yields bit-identical
    states, and matches the corresponding replicate of a batched run.
    """
    cps = tuple(int(n) for n in checkpoints)
    if any(n < 0 or n > n_max for n in cps) or list(cps) != sorted(set(cps)):
        raise ConfigError("checkpoints", "must be increasing, unique and within [0, n_max]")

    spec = exp.generator
    stream = gen.ReplicateStream(seed, replicate, spec)
    h = spec.h
    if exp.h_set is not None:
        h = exp.h_set[stream.draw_h_index(len(exp.h_set))]
        spec = exp.spec_for(h)

    state = UrnState.initial(exp.c0)
    mode = 0
    states: list[UrnState] = []
    records: list[StepRecord] = [] if record_steps else None
    if cps and cps[0] == 0:
        states.append(state)

    done = 0
    while done < n_max:
        u_blk, w_blk = stream.next_block()
        take = min(len(u_blk), n_max - done)
        for i in range(take):
            w = w_blk[i] if w_blk is not None else None
            state, rec, mode = advance_with(state, spec, u_blk[i], w, mode)
            if record_steps:
                records.append(rec)
            if state.step in cps:
                states.append(state)
        done += take

    return Trajectory(
        checkpoints=cps, states=tuple(states),
        records=tuple(records) if record_steps else None,
        h=h, seed=seed, replicate=replicate,
    )
