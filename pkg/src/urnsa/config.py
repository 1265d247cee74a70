"""Experiment configuration: a single JSON document per run.

All numeric fields are plain decimals and matrices are row-major arrays of
arrays, so configs stay language-neutral and diff-friendly.  Validation
reports the offending field by path.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .generators import GeneratorSpec, make_generator
from .urn import UrnExperiment, make_experiment

__all__ = ["ExperimentConfig", "load_config", "config_digest"]


def config_digest(raw: dict) -> str:
    """Stable hex digest of the raw configuration document."""
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _get(raw: dict, name: str, kind, *, required=True, default=None):
    if name not in raw:
        if required:
            raise ConfigError(name, "missing required field")
        return default
    value = raw[name]
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if not isinstance(value, kind):
        raise ConfigError(name, f"expected {kind.__name__}")
    return value


def _vector(raw, name: str) -> np.ndarray:
    v = _get(raw, name, list)
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, f"not a numeric vector: {exc}") from None
    if arr.ndim != 1:
        raise ConfigError(name, "expected a flat vector")
    return arr


def _matrix(value, name: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, f"not a numeric matrix: {exc}") from None
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(name, f"expected a square matrix, got shape {arr.shape}")
    return arr


def _int_list(raw, name: str, *, required=True, default=()) -> tuple[int, ...]:
    v = _get(raw, name, list, required=required, default=None)
    if v is None:
        return tuple(default)
    out = []
    for i, item in enumerate(v):
        if not isinstance(item, int) or isinstance(item, bool):
            raise ConfigError(f"{name}[{i}]", "expected an integer")
        out.append(item)
    return tuple(out)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed, validated experiment description plus raw subsections."""

    experiment: UrnExperiment
    h: np.ndarray
    n_max: int
    checkpoints: tuple[int, ...]
    replicates: int
    seed: int
    threads: int | None
    digest: str
    ode: dict = field(default_factory=dict)
    event: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    cesaro: dict = field(default_factory=dict)
    oscillation: dict = field(default_factory=dict)


def _build_generator(raw_gen: dict, h: np.ndarray) -> GeneratorSpec:
    kind = _get(raw_gen, "kind", str)
    noise = _get(raw_gen, "noise", str, required=False, default="constant")
    alpha = _get(raw_gen, "alpha", float, required=False, default=1.5)
    m_spike = raw_gen.get("M")
    if m_spike is not None:
        m_spike = _matrix(m_spike, "generator.M")
    m_set = raw_gen.get("M_set")
    if m_set is not None:
        if not isinstance(m_set, list) or not m_set:
            raise ConfigError("generator.M_set", "expected a nonempty list of matrices")
        m_set = [_matrix(m, f"generator.M_set[{i}]") for i, m in enumerate(m_set)]
    transition = raw_gen.get("transition")
    return make_generator(
        kind, h, noise=noise, alpha=alpha,
        m_spike=m_spike, m_set=m_set, transition=transition,
    )


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    digest = config_digest(raw)

    k = _get(raw, "K", int)
    if k < 1:
        raise ConfigError("K", "need at least one color")
    c0 = _vector(raw, "C0")
    if c0.size != k:
        raise ConfigError("C0", f"length {c0.size} does not match K={k}")

    h_set = None
    if "H_set" in raw:
        entries = _get(raw, "H_set", list)
        if not entries:
            raise ConfigError("H_set", "must list at least one matrix")
        h_set = [_matrix(m, f"H_set[{i}]") for i, m in enumerate(entries)]
        for i, m in enumerate(h_set):
            if m.shape != (k, k):
                raise ConfigError(f"H_set[{i}]", f"expected shape ({k}, {k})")
        h = h_set[0]
    else:
        h = _matrix(_get(raw, "H", list), "H")
        if h.shape != (k, k):
            raise ConfigError("H", f"expected shape ({k}, {k})")

    gen_raw = _get(raw, "generator", dict, required=False, default={"kind": "fixed"})
    generator = _build_generator(gen_raw, h)
    experiment = make_experiment(c0, generator, h_set=h_set)

    n_max = _get(raw, "n_max", int, required=False, default=10_000)
    if n_max < 1:
        raise ConfigError("n_max", "must be at least 1")
    checkpoints = _int_list(raw, "checkpoints", required=False, default=(n_max,))
    if list(checkpoints) != sorted(set(checkpoints)):
        raise ConfigError("checkpoints", "must be strictly increasing")
    if checkpoints and checkpoints[-1] > n_max:
        raise ConfigError("checkpoints", "must not exceed n_max")

    replicates = _get(raw, "replicates", int, required=False, default=100)
    if replicates < 1:
        raise ConfigError("replicates", "must be positive")
    seed = _get(raw, "seed", int, required=False, default=0)
    threads = _get(raw, "threads", int, required=False, default=None)

    return ExperimentConfig(
        experiment=experiment, h=h, n_max=n_max, checkpoints=checkpoints,
        replicates=replicates, seed=seed, threads=threads, digest=digest,
        ode=_get(raw, "ode", dict, required=False, default={}),
        event=_get(raw, "event", dict, required=False, default={}),
        diagnostics=_get(raw, "diagnostics", dict, required=False, default={}),
        cesaro=_get(raw, "cesaro", dict, required=False, default={}),
        oscillation=_get(raw, "oscillation", dict, required=False, default={}),
    )


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError("<config>", f"cannot read {p}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("<config>", f"invalid JSON in {p}: {exc}") from None
    return parse_config(raw)
