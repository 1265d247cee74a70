"""Batch command-line front end.

Subcommands: pf (Perron data), ode (integrate the mean-field ODE),
simulate (one trajectory), verify (convergence report), diagnose
(negligibility / event-frequency / Cesaro / oscillation curves).

Exit codes: 0 success, 2 configuration error (message names the offending
field), 1 runtime failure.  Output files are written atomically and start
with a comment line carrying the config digest and root seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import verify as vf
from .config import ExperimentConfig, load_config
from .dynamics import drift, integrate
from .engine import run_batch
from .errors import ConfigError, UrnsaError
from .spectral import is_irreducible, perron
from .urn import UrnExperiment

__all__ = ["main"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, digest: str, seed: int, header: str, rows) -> None:
    lines = [f"# config={digest} seed={seed}", header]
    lines.extend(",".join(str(c) for c in row) for row in rows)
    _write_atomic(path, "\n".join(lines) + "\n")


def _report_rows(n_list, name: str, curve: vf.MetricCurve):
    for i, n in enumerate(n_list):
        yield (
            n, name, _fmt(curve.estimate[i]), _fmt(curve.stderr[i]),
            _fmt(curve.q50[i]), _fmt(curve.q90[i]),
        )


REPORT_HEADER = "n,metric,estimate,stderr,quantile_0.5,quantile_0.9"


def _cmd_pf(cfg: ExperimentConfig, out: Path | None) -> None:
    if not is_irreducible(cfg.h):
        raise ConfigError("H", "matrix is reducible; Perron data requires irreducibility")
    pf = perron(cfg.h)
    print(f"lambda = {_fmt(pf.lam)}")
    print("pi = (" + ", ".join(_fmt(x) for x in pf.pi) + ")")
    print("nu = (" + ", ".join(_fmt(x) for x in pf.v) + ")")
    if out is not None:
        payload = {
            "config": cfg.digest, "seed": cfg.seed, "lambda": pf.lam,
            "pi": [float(x) for x in pf.pi], "nu": [float(x) for x in pf.v],
        }
        _write_atomic(out / "pf.json", json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _cmd_ode(cfg: ExperimentConfig, out: Path | None) -> None:
    section = cfg.ode
    if "x0" not in section:
        raise ConfigError("ode.x0", "missing required field")
    x0 = np.asarray(section["x0"], dtype=float)
    dt = float(section.get("dt", 0.01))
    t_end = float(section.get("t_end", 50.0))
    path = integrate(cfg.h, x0, t_end, dt)
    end = path.final
    print("endpoint = (" + ", ".join(_fmt(x) for x in end) + ")")
    print(f"drift_l1_at_endpoint = {_fmt(np.abs(drift(cfg.h, end)).sum())}")
    if out is not None:
        k = end.size
        header = "t," + ",".join(f"x_{j + 1}" for j in range(k))
        rows = (
            (_fmt(t),) + tuple(_fmt(v) for v in state)
            for t, state in zip(path.times, path.states)
        )
        _write_csv(out / "ode_path.csv", cfg.digest, cfg.seed, header, rows)


def _cmd_simulate(cfg: ExperimentConfig, out: Path | None) -> None:
    exp = cfg.experiment
    batch = run_batch(
        exp, replicates=1, seed=cfg.seed, n_max=cfg.n_max,
        checkpoints=cfg.checkpoints, threads=cfg.threads,
    )
    k = exp.generator.k
    header = (
        "n,S," + ",".join(f"C_{j + 1}" for j in range(k))
        + "," + ",".join(f"N_{j + 1}" for j in range(k))
    )
    rows = []
    for slot, n in enumerate(cfg.checkpoints):
        row = [n, _fmt(batch.cp_s[0, slot])]
        row += [_fmt(v) for v in batch.cp_c[0, slot]]
        row += [str(int(v)) for v in batch.cp_n[0, slot]]
        rows.append(row)
    if out is not None:
        _write_csv(out / "trajectory.csv", cfg.digest, cfg.seed, header, rows)
    else:
        print(header)
        for row in rows:
            print(",".join(str(c) for c in row))


def _cmd_verify(cfg: ExperimentConfig, out: Path) -> None:
    report = vf.run_convergence(
        cfg.experiment, cfg.n_max, cfg.checkpoints, cfg.replicates, cfg.seed,
        threads=cfg.threads, config_digest=cfg.digest,
    )
    rows = []
    for name in vf.METRICS:
        rows.extend(_report_rows(report.checkpoints, name, report.metrics[name]))
    _write_csv(out / "report.csv", cfg.digest, cfg.seed, REPORT_HEADER, rows)
    summary = {
        "config": cfg.digest,
        "seed": cfg.seed,
        "replicates": report.replicates,
        "checkpoints": list(report.checkpoints),
        "final_errors": {
            name: report.metrics[name].estimate[-1] for name in vf.METRICS
        },
    }
    _write_atomic(out / "summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    for name in vf.METRICS:
        print(f"{name}: final estimate {_fmt(report.metrics[name].estimate[-1])}")


def _cmd_diagnose(cfg: ExperimentConfig, out: Path) -> None:
    ran = []
    summary: dict = {"config": cfg.digest, "seed": cfg.seed}
    if cfg.diagnostics:
        d = cfg.diagnostics
        rep = int(d.get("replicates", cfg.replicates))
        report = vf.negligibility_curves(
            cfg.experiment, float(d.get("t", 1.0)), d.get("n_list", [100, 1000]),
            rep, cfg.seed, betas=tuple(d.get("betas", ["D", "xi"])),
            threads=cfg.threads, max_steps=int(d.get("max_steps", 100_000_000)),
            config_digest=cfg.digest,
        )
        rows = []
        for (beta, direction), (med, q90) in sorted(report.stats.items()):
            for i, n in enumerate(report.n_list):
                rows.append(
                    (n, f"neg_{direction}_{beta}", _fmt(med[i]), "nan", _fmt(med[i]), _fmt(q90[i]))
                )
        _write_csv(out / "negligibility.csv", cfg.digest, cfg.seed, REPORT_HEADER, rows)
        ran.append("negligibility")
    if cfg.event:
        e = cfg.event
        for name in ("A", "B", "T", "n_list"):
            if name not in e:
                raise ConfigError(f"event.{name}", "missing required field")
        report = vf.event_frequency(
            cfg.experiment, float(e["A"]), float(e["B"]), float(e["T"]),
            e["n_list"], int(e.get("replicates", cfg.replicates)), cfg.seed,
            threads=cfg.threads, config_digest=cfg.digest,
        )
        rows = [
            (n, "event_freq", _fmt(report.freq[i]), _fmt(report.stderr[i]),
             _fmt(report.freq[i]), _fmt(report.freq[i]))
            for i, n in enumerate(report.n_list)
        ]
        _write_csv(out / "event.csv", cfg.digest, cfg.seed, REPORT_HEADER, rows)
        summary["event_bounds"] = {
            "sigma_term": report.bound_sigma, "rho_term": report.bound_rho,
        }
        ran.append("event")
    if cfg.cesaro:
        c = cfg.cesaro
        report = vf.cesaro_mds(
            cfg.experiment, c.get("n_list", [100, 1000]),
            int(c.get("replicates", cfg.replicates)), cfg.seed,
            threads=cfg.threads, config_digest=cfg.digest,
        )
        rows = list(_report_rows(report.n_list, "cesaro_mds", report.curve))
        _write_csv(out / "cesaro.csv", cfg.digest, cfg.seed, REPORT_HEADER, rows)
        ran.append("cesaro")
    if cfg.oscillation:
        o = cfg.oscillation
        report = vf.oscillation_curve(
            cfg.experiment, float(o.get("T", 1.0)), float(o.get("delta", 0.1)),
            o.get("n_list", [100, 1000]), int(o.get("replicates", 20)), cfg.seed,
            threads=cfg.threads, config_digest=cfg.digest,
        )
        rows = [
            (n, "oscillation", _fmt(report.median[i]), "nan",
             _fmt(report.median[i]), _fmt(report.q90[i]))
            for i, n in enumerate(report.n_list)
        ]
        _write_csv(out / "oscillation.csv", cfg.digest, cfg.seed, REPORT_HEADER, rows)
        ran.append("oscillation")
    if not ran:
        raise ConfigError(
            "diagnostics", "no diagnostic section present (diagnostics/event/cesaro/oscillation)"
        )
    summary["ran"] = ran
    _write_atomic(out / "summary.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print("diagnostics written:", ", ".join(ran))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="urnsa",
        description="Urn-model stochastic approximation harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_out in (
        ("pf", False), ("ode", False), ("simulate", False),
        ("verify", True), ("diagnose", True),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--out", required=needs_out, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--replicates", type=int, default=None, help="override replicate count")
        p.add_argument("--threads", type=int, default=None, help="worker thread count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = _override(cfg, seed=args.seed)
        if args.replicates is not None:
            if args.replicates < 1:
                raise ConfigError("replicates", "must be positive")
            cfg = _override(cfg, replicates=args.replicates)
        if args.threads is not None:
            cfg = _override(cfg, threads=args.threads)
        out = Path(args.out) if args.out else None
        if args.command == "pf":
            _cmd_pf(cfg, out)
        elif args.command == "ode":
            _cmd_ode(cfg, out)
        elif args.command == "simulate":
            _cmd_simulate(cfg, out)
        elif args.command == "verify":
            _cmd_verify(cfg, out)
        else:
            _cmd_diagnose(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (UrnsaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def _override(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    from dataclasses import replace

    return replace(cfg, **kw)


if __name__ == "__main__":
    sys.exit(main())
