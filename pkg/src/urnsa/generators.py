"""Replacement-matrix generators and their randomness supply.

Every built-in generator can report both a sampled replacement matrix and
the exact conditional mean given the history summary it uses, which is what
the audit and diagnostic machinery relies on.  Conditional independence of
the drawn color and the replacement is enforced structurally: generators
never see the color drawn in the same round.

Randomness is consumed in fixed-size blocks from one stream per replicate
(derived from the root seed by a spawn-key split), so a single trajectory
and a batched run of many replicates see bit-identical randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .spectral import as_square_matrix

__all__ = [
    "GeneratorSpec",
    "make_generator",
    "block_len",
    "ReplicateStream",
    "spike_flags",
    "is_spike_index",
]

KINDS = ("fixed", "iid_scaled", "cesaro_spike", "markov_mod")
NOISES = ("constant", "exponential", "pareto")

BLOCK_BASE = 32768
BLOCK_PLAIN = 65536


def block_len(k: int, needs_w: bool) -> int:
    """Per-replicate RNG block length.

    Fixed as a function of (K, noise) only: block boundaries are part of
    the reproducibility contract, so they may not depend on run length or
    batch size.
    """
    if needs_w:
        return max(256, BLOCK_BASE // (k * k))
    return BLOCK_PLAIN


@dataclass(frozen=True)
class GeneratorSpec:
    """A named replacement-generator configuration.

    ``h`` is both the base matrix and the limiting conditional mean.  The
    multiplicative entry noise W is i.i.d. with mean exactly one, so the
    conditional mean of the sampled matrix equals the generating matrix.
    """

    kind: str
    h: np.ndarray
    noise: str = "constant"
    alpha: float = 1.5
    m_spike: np.ndarray | None = None
    m_set: tuple[np.ndarray, ...] | None = None
    transition: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.h.shape[0]

    @property
    def needs_w(self) -> bool:
        return self.noise != "constant"

    @property
    def n_modes(self) -> int:
        return len(self.m_set) if self.m_set is not None else 1


def make_generator(
    kind: str,
    h,
    *,
    noise: str = "constant",
    alpha: float = 1.5,
    m_spike=None,
    m_set=None,
    transition=None,
) -> GeneratorSpec:
    """Validate and freeze a generator configuration."""
    if kind not in KINDS:
        raise ConfigError("generator.kind", f"unknown kind {kind!r}, expected one of {KINDS}")
    hm = as_square_matrix(h)
    if np.any(hm < 0):
        raise ConfigError("generator.h", "base matrix must be nonnegative")
    k = hm.shape[0]
    if noise not in NOISES:
        raise ConfigError("generator.noise", f"unknown noise {noise!r}, expected one of {NOISES}")
    if kind == "fixed" and noise != "constant":
        raise ConfigError("generator.noise", "fixed generator is deterministic; noise must be 'constant'")
    if noise == "pareto" and not (1.0 < alpha <= 2.0):
        raise ConfigError("generator.alpha", "pareto tail index must lie in (1, 2]")

    spike = None
    if kind == "cesaro_spike":
        if m_spike is None:
            raise ConfigError("generator.m_spike", "cesaro_spike requires a perturbation matrix")
        spike = as_square_matrix(m_spike)
        if spike.shape != hm.shape:
            raise ConfigError("generator.m_spike", "perturbation must match the base matrix shape")
        if np.any(hm + spike < 0):
            raise ConfigError("generator.m_spike", "perturbed matrix must stay nonnegative")
    elif m_spike is not None:
        raise ConfigError("generator.m_spike", f"not a parameter of kind {kind!r}")

    mats = None
    ttab = None
    if kind == "markov_mod":
        if not m_set:
            raise ConfigError("generator.m_set", "markov_mod requires a list of perturbation matrices")
        mats = tuple(as_square_matrix(m) for m in m_set)
        for i, m in enumerate(mats):
            if m.shape != hm.shape:
                raise ConfigError(f"generator.m_set[{i}]", "perturbation must match the base matrix shape")
            if np.any(hm + m < 0):
                raise ConfigError(f"generator.m_set[{i}]", "perturbed matrix must stay nonnegative")
        n_modes = len(mats)
        if transition is None:
            ttab = (np.arange(n_modes)[:, None] + np.arange(k)[None, :] + 1) % n_modes
        else:
            ttab = np.asarray(transition, dtype=np.int64)
            if ttab.shape != (n_modes, k):
                raise ConfigError("generator.transition", f"expected shape ({n_modes}, {k})")
            if np.any(ttab < 0) or np.any(ttab >= n_modes):
                raise ConfigError("generator.transition", "mode indices out of range")
        ttab = ttab.astype(np.int64)
    elif m_set is not None or transition is not None:
        raise ConfigError("generator.m_set", f"not a parameter of kind {kind!r}")

    return GeneratorSpec(
        kind=kind, h=hm, noise=noise, alpha=float(alpha),
        m_spike=spike, m_set=mats, transition=ttab,
    )


# --- sparse spike schedule: indices floor(k ln k), k >= 1 ------------------
#
# The schedule visits {0, 1, 3, 5, 8, ...}; its counting density at m decays
# like 1/log m, so perturbations on it never die out pointwise but do vanish
# in Cesaro average.


def _first_spike_k(lo: int) -> int:
    """Smallest k >= 1 with floor(k ln k) >= lo."""
    if lo <= 0:
        return 1
    khi = 2
    while math.floor(khi * math.log(khi)) < lo:
        khi *= 2
    klo = 1
    while klo < khi:
        kmid = (klo + khi) // 2
        if math.floor(kmid * math.log(kmid)) < lo:
            klo = kmid + 1
        else:
            khi = kmid
    return klo


def is_spike_index(m: int) -> bool:
    """True iff m == floor(k ln k) for some integer k >= 1."""
    if m < 0:
        return False
    k = _first_spike_k(m)
    return math.floor(k * math.log(k)) == m


def spike_flags(lo: int, hi: int) -> np.ndarray:
    """int8 indicator of spike indices for the half-open range [lo, hi)."""
    out = np.zeros(hi - lo, dtype=np.int8)
    k = _first_spike_k(lo)
    while True:
        v = math.floor(k * math.log(k)) if k > 1 else 0
        if v >= hi:
            break
        if v >= lo:
            out[v - lo] = 1
        k += 1
    return out


def generating_matrix(spec: GeneratorSpec, step_index: int, mode: int) -> np.ndarray:
    """Conditional mean of the next replacement given the history summary."""
    if spec.kind in ("fixed", "iid_scaled"):
        return spec.h
    if not is_spike_index(step_index):
        return spec.h
    if spec.kind == "cesaro_spike":
        return spec.h + spec.m_spike
    return spec.h + spec.m_set[mode]


def next_mode(spec: GeneratorSpec, mode: int, color: int) -> int:
    """History-driven mode update; only markov_mod has more than one mode."""
    if spec.kind != "markov_mod":
        return 0
    return int(spec.transition[mode, color])


class ReplicateStream:
    """Blocked random-number supply for one replicate.

    Consumption order is fixed: the optional base-matrix index first, then
    per block the color uniforms followed by the entry noise.  Blocks always
    have full length regardless of how many steps a run actually uses, so
    trajectories with the same seed agree across different horizons.
    """

    def __init__(self, seed: int, replicate: int, spec: GeneratorSpec):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(replicate,))
        self.rng = np.random.default_rng(ss)
        self.spec = spec
        self.block = block_len(spec.k, spec.needs_w)

    def draw_h_index(self, n_choices: int) -> int:
        return int(self.rng.integers(n_choices))

    def next_block(self) -> tuple[np.ndarray, np.ndarray | None]:
        u = self.rng.random(self.block)
        spec = self.spec
        if spec.noise == "constant":
            return u, None
        shape = (self.block, spec.k, spec.k)
        if spec.noise == "exponential":
            return u, self.rng.standard_exponential(shape)
        # mean-one Pareto: W = (alpha-1)/alpha * P with P standard Pareto(alpha)
        pareto = self.rng.pareto(spec.alpha, shape) + 1.0
        return u, (spec.alpha - 1.0) / spec.alpha * pareto
