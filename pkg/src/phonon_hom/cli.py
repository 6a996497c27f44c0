"""Command-line front end: ``phonon-hom {run,rates,validate} --config FILE --out DIR``.

Exit status is 0 on success, 1 for configuration errors and 2 for runtime
or validation failures.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Sequence

from .config import ConfigError, ExperimentConfig, load_config
from .jump_space import PROCESS_LABELS
from .lambda_model import LambdaParams, Mode
from .observables import (
    RunResult,
    UnreachableTargetError,
    rate_at_indistinguishability,
    run_once,
    sweep,
)
from .trajectories import sample_trajectories
from .validation import run_checks

log = logging.getLogger("phonon_hom")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

TIMESERIES_COLUMNS = ("t_ps", "pop_P0", "pop_Pplus", "pop_Pminus", "pop_PS", "pop_PD", "pop_PE")
SUMMARY_COLUMNS = (
    "mode", "h", "omega", "nu", "kappa", "gamma", "alpha", "omega_c", "T_K",
    "p_same", "p_diff", "p_env", "v_hom", "efficiency", "combined", "t_f_ps", "r_f_per_ps",
)  # fmt: skip
RATES_COLUMNS = (
    "f", "mode", "tuned_parameter", "tuned_value", "efficiency", "t_f_ps", "r_f_per_ps",
    "gamma", "status",
)  # fmt: skip
ORACLE_COLUMNS = (
    "index", "p_same", "p_diff", "p_env", "mc_p_same", "mc_p_diff", "mc_p_env",
    "se_same", "se_diff", "se_env", "trajectories", "seed",
)  # fmt: skip


class RuntimeFailure(RuntimeError):
    pass


def fmt(value) -> str:
    if isinstance(value, Mode):
        return value.value
    if isinstance(value, (bool, int, str)):
        return str(value)
    return format(float(value), ".12g")


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise RuntimeFailure(f"cannot write {path}: {exc}") from None


def _safe(fn):
    try:
        return fn()
    except (ValueError, ArithmeticError):
        return math.nan


def summary_row(r: RunResult) -> list:
    p = r.params
    return [
        p.mode, p.h, p.omega, p.nu, p.kappa, p.gamma, p.alpha, p.omega_c, p.temperature,
        r.p_same, r.p_diff, r.p_env,
        _safe(lambda: r.v_hom), r.efficiency, _safe(lambda: r.combined), r.t_f, r.r_f,
    ]  # fmt: skip


def timeseries_rows(r: RunResult):
    for i, t in enumerate(r.times):
        yield [t] + [r.populations[lab][i] for lab in PROCESS_LABELS]


def _out_dir(cfg: ExperimentConfig, out: str | None) -> Path:
    path = Path(out if out is not None else cfg.output.directory)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RuntimeFailure(f"cannot create output directory {path}: {exc}") from None
    return path


def cmd_run(cfg: ExperimentConfig, out: str | None = None, plot: bool = False, workers: int = 1) -> list[Path]:
    out_dir = _out_dir(cfg, out)
    prefix = cfg.output.prefix
    spec = cfg.sweep_spec()
    if spec is None:
        results = [run_once(cfg.params(), cfg.control())]
    else:
        results = sweep(spec, cfg.control(), workers=workers)

    written = []
    if len(results) == 1:
        ts = [(out_dir / f"{prefix}_timeseries.csv", results[0])]
    else:
        ts = [(out_dir / f"{prefix}_{i:03d}_timeseries.csv", r) for i, r in enumerate(results)]
    for path, r in ts:
        write_csv(path, TIMESERIES_COLUMNS, timeseries_rows(r))
        written.append(path)
    summary = out_dir / f"{prefix}_summary.csv"
    write_csv(summary, SUMMARY_COLUMNS, (summary_row(r) for r in results))
    written.append(summary)

    if cfg.oracle.enabled:
        rows = []
        for i, r in enumerate(results):
            if r.error is not None and not math.isfinite(r.p_same):
                continue
            est = sample_trajectories(r.params, cfg.oracle.trajectories, seed=cfg.oracle.seed)
            rows.append([
                i, r.p_same, r.p_diff, r.p_env, est.p_same, est.p_diff, est.p_env,
                est.se_same, est.se_diff, est.se_env, est.n, cfg.oracle.seed,
            ])  # fmt: skip
        path = out_dir / f"{prefix}_oracle.csv"
        write_csv(path, ORACLE_COLUMNS, rows)
        written.append(path)

    if plot:
        path = out_dir / f"{prefix}_plot.gp"
        _write_text(path, _run_plot(cfg, prefix, ts[0][0].name))
        written.append(path)
    failed = [r for r in results if r.error is not None]
    for r in failed:
        log.warning("point %s: %s", r.params, r.error)
    return written


def _rate_job(args):
    target, mode, template, control = args
    try:
        res = rate_at_indistinguishability(target, mode, control, template=template)
    except UnreachableTargetError as exc:
        log.warning("%s", exc)
        return [target, mode, exc.parameter, math.nan, math.nan, math.nan, math.nan, template.gamma, "unreachable"]
    except Exception as exc:  # recorded as a row, like sweep points
        log.warning("rate search f=%g %s failed: %s", target, mode.value, exc)
        param = "h" if mode is Mode.PULSE_RELAX else "nu"
        return [target, mode, param, math.nan, math.nan, math.nan, math.nan, template.gamma, "failed"]
    r = res.result
    status = "ok" if math.isfinite(r.t_f) else "incomplete"
    return [target, mode, res.parameter, res.value, r.efficiency, r.t_f, r.r_f, template.gamma, status]


def rate_template(cfg: ExperimentConfig, mode: Mode, gamma: float) -> LambdaParams:
    m = cfg.model
    return LambdaParams(
        h=m.h, omega=m.omega, nu=m.nu, kappa=m.kappa, gamma=gamma,
        alpha=m.alpha, omega_c=m.omega_c, temperature=m.temperature, mode=mode,
    )  # fmt: skip


def cmd_rates(cfg: ExperimentConfig, out: str | None = None, plot: bool = False, workers: int = 1) -> list[Path]:
    if cfg.rates is None:
        raise ConfigError("the rates command needs a [rates] section", None)
    out_dir = _out_dir(cfg, out)
    prefix = cfg.output.prefix
    control = cfg.control()
    jobs = [
        (f, mode, rate_template(cfg, mode, g), control)
        for g in cfg.rates.gammas
        for mode in cfg.rates.modes
        for f in cfg.rates.targets
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_rate_job, jobs))
    else:
        rows = [_rate_job(j) for j in jobs]
    path = out_dir / f"{prefix}_rates.csv"
    write_csv(path, RATES_COLUMNS, rows)
    written = [path]
    if plot:
        gp = out_dir / f"{prefix}_rates_plot.gp"
        _write_text(gp, _rates_plot(prefix))
        written.append(gp)
    return written


def cmd_validate(cfg: ExperimentConfig, out: str | None = None, stream=None) -> bool:
    stream = stream or sys.stdout
    oracle = (cfg.oracle.trajectories, cfg.oracle.seed) if cfg.oracle.enabled else None
    checks = run_checks(cfg.params(), cfg.control(), oracle=oracle)
    lines = [c.line() for c in checks]
    if oracle is None:
        lines.append("SKIP oracle-agreement: [oracle] enabled = false")
    ok = all(c.passed for c in checks)
    lines.append("ALL CHECKS PASSED" if ok else "VALIDATION FAILED")
    for line in lines:
        print(line, file=stream)
    if out is not None:
        _write_text(_out_dir(cfg, out) / f"{cfg.output.prefix}_validation.txt", "\n".join(lines) + "\n")
    return ok


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise RuntimeFailure(f"cannot write {path}: {exc}") from None


def _run_plot(cfg: ExperimentConfig, prefix: str, timeseries: str) -> str:
    lines = [
        "# gnuplot script",
        "set datafile separator ','",
        "set key outside",
        "set terminal pngcairo size 900,600",
        f"set output '{prefix}_timeseries.png'",
        "set xlabel 't (ps)'",
        "set ylabel 'population'",
        f"plot for [c=2:7] '{timeseries}' using 1:c with lines title columnheader(c)",
    ]
    if cfg.sweep is not None:
        col = {"h": 2, "omega": 3, "nu": 4}[cfg.sweep.parameter]
        lines += [
            f"set output '{prefix}_summary.png'",
            f"set xlabel '{cfg.sweep.parameter} (1/ps)'",
            "set ylabel ''",
            "set yrange [0:1]",
            *(["set logscale x"] if cfg.sweep.spacing == "log" else []),
            f"plot '{prefix}_summary.csv' using {col}:13 with linespoints title 'v_hom', \\",
            f"     '' using {col}:14 with linespoints title 'efficiency', \\",
            f"     '' using {col}:15 with linespoints title 'combined'",
        ]
    return "\n".join(lines) + "\n"


def _rates_plot(prefix: str) -> str:
    return "\n".join([
        "# gnuplot script",
        "set datafile separator ','",
        "set terminal pngcairo size 900,600",
        f"set output '{prefix}_rates.png'",
        "set logscale y",
        "set xlabel '-log10(1 - f)'",
        "set ylabel 'r_f (1/ps)'",
        'plot for [m in "pulse-relax raman"] for [g in "0 0.05"] '
        f"'{prefix}_rates.csv' \\",
        "     using (-log10(1-$1)):((strcol(2) eq m && $8 == g+0) ? $7 : NaN) \\",
        "     with linespoints title m.' gamma='.g",
    ]) + "\n"  # fmt: skip


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phonon-hom", description="Two-photon interference from phonon-dephased sources.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "single run or parameter sweep"),
        ("rates", "pair production rate at target visibilities"),
        ("validate", "invariant checks and oracle comparison"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="experiment configuration file")
        p.add_argument("--out", default=None, help="output directory (overrides [output] directory)")
        if name != "validate":
            p.add_argument("--plot", action="store_true", help="also write a gnuplot script")
            p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "run":
            for path in cmd_run(cfg, args.out, args.plot, args.workers):
                log.info("wrote %s", path)
        elif args.command == "rates":
            for path in cmd_rates(cfg, args.out, args.plot, args.workers):
                log.info("wrote %s", path)
        else:
            if not cmd_validate(cfg, args.out):
                return EXIT_RUNTIME
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeFailure, RuntimeError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
