"""Command-line entry point.

    smqka run --scenario honest5.cfg --seed 42 [--trials T] [--out PATH] [--format text|records]
    smqka sweep --scenario s.cfg --vary N --values 3,4,5
    smqka efficiency --N 5 --k 1
    smqka oracle

Exit status: 0 on success, 1 when ``--fail-on-abort`` is given and most
trials aborted, 2 on any configuration, flag or file error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .analysis import detection_probability_oracle, monte_carlo, qubit_efficiency
from .config import ConfigError, ScenarioConfig, parse_config
from .qubit import Basis
from .report import ReportDocument, run_report

OUTPUT_DIR_ENV = "SMQKA_OUTPUT_DIR"

EXIT_OK, EXIT_ABORTED, EXIT_CONFIG = 0, 1, 2


class UsageError(Exception):
    pass


def _load_scenario(path: str, **overrides) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read scenario file {path}: {exc.strerror}") from None
    return parse_config(text, **overrides)


def _output_path(args, stem: str) -> Optional[Path]:
    if args.out:
        return Path(args.out)
    default_dir = os.environ.get(OUTPUT_DIR_ENV)
    if default_dir:
        return Path(default_dir) / f"{stem}.jsonl"
    return None


def _write(path: Optional[Path], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def _table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(headers, *rows)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*headers), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*map(str, row)) for row in rows]
    return "\n".join(lines) + "\n"


def _summary(doc: ReportDocument) -> str:
    c, a = doc.config, doc.aggregate
    rows = [
        ("attack", c.attack), ("N", c.N), ("n", c.n), ("k", c.k), ("threshold", c.threshold),
        ("seed", c.seed), ("trials", a.trials),
        ("correctness_rate", f"{a.correctness_rate:.4f}"),
        ("attack_success_rate", f"{a.attack_success_rate:.4f}"),
        ("abort_rate", f"{a.abort_rate:.4f} ± {a.confidence_halfwidth:.4f}"),
        ("mean_error_rate", f"{a.mean_error_rate:.4f}"),
    ]
    rows += [(f"efficiency[{f.protocol_label}]", f.value) for f in doc.efficiency]
    return _table(("field", "value"), rows)


def cmd_run(args) -> int:
    config = _load_scenario(args.scenario, trials=args.trials, seed=args.seed)
    doc = run_report(config)
    path = _output_path(args, f"run-{config.attack}-{config.seed}")
    if args.format == "records":
        _write(path, doc.dumps())
    else:
        if path is not None:
            _write(path, doc.dumps())
        sys.stdout.write(_summary(doc))
    if args.fail_on_abort and doc.aggregate.abort_rate > 0.5:
        return EXIT_ABORTED
    return EXIT_OK


def _sweep_values(field: str, raw: str):
    try:
        if field == "N":
            return [int(v) for v in raw.split(",")]
        return [float(v) for v in raw.split(",")]
    except ValueError:
        raise ConfigError("values", f"cannot parse {raw!r} as a list for {field}") from None


def cmd_sweep(args) -> int:
    base = _load_scenario(args.scenario, trials=args.trials, seed=args.seed)
    rows, records = [], []
    aborted = False
    for value in _sweep_values(args.vary, args.values):
        config = base.replace(**{args.vary: value})
        agg = monte_carlo(config)
        aborted |= agg.abort_rate > 0.5
        rows.append((args.vary, value, agg.trials, f"{agg.correctness_rate:.4f}",
                     f"{agg.attack_success_rate:.4f}", f"{agg.abort_rate:.4f}", f"{agg.mean_error_rate:.4f}"))
        records.append({"record": "sweep", "schema": 1, "vary": args.vary, "value": value, **agg.to_dict()})
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    path = _output_path(args, f"sweep-{args.vary}-{base.seed}")
    if args.format == "records":
        _write(path, text)
    else:
        if path is not None:
            _write(path, text)
        sys.stdout.write(_table(("vary", "value", "trials", "correct", "attack", "abort", "err"), rows))
    return EXIT_ABORTED if args.fail_on_abort and aborted else EXIT_OK


def cmd_efficiency(args) -> int:
    rows = []
    for N in args.N:
        for k in args.k:
            smqka = qubit_efficiency("SMQKA", N, k)
            liu = qubit_efficiency("LiuMQKA", N, k)
            rows.append((N, smqka.k, smqka.value, liu.value, smqka.value / liu.value))
    sys.stdout.write(_table(("N", "k", "SMQKA", "LiuMQKA", "ratio"), rows))
    return EXIT_OK


def cmd_oracle(args) -> int:
    rows = [
        (decoy.value, tap.value, f"{detection_probability_oracle(decoy, tap):.4f}")
        for decoy in (Basis.X, Basis.Y)
        for tap in (Basis.Z, Basis.X, Basis.Y)
    ]
    sys.stdout.write(_table(("decoy_basis", "tap_basis", "error_probability"), rows))
    return EXIT_OK


def _fraction_arg(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smqka", description="SMQKA protocol and attack simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(p):
        p.add_argument("--scenario", required=True, help="key-value scenario file")
        p.add_argument("--trials", type=int, help="override trials")
        p.add_argument("--seed", type=int, help="override master seed")
        p.add_argument("--out", help=f"report path (default: ${OUTPUT_DIR_ENV}/<name>.jsonl if set, else stdout)")
        p.add_argument("--format", choices=("text", "records"), default="text")
        p.add_argument("--fail-on-abort", action="store_true",
                       help="exit 1 when more than half the trials abort")

    run = sub.add_parser("run", help="run trials of one scenario")
    scenario_flags(run)
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="vary N or k across a list of values")
    scenario_flags(sweep)
    sweep.add_argument("--vary", choices=("N", "k"), required=True)
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.set_defaults(func=cmd_sweep)

    eff = sub.add_parser("efficiency", help="qubit efficiency table")
    eff.add_argument("--N", type=int, nargs="+", required=True)
    eff.add_argument("--k", type=_fraction_arg, nargs="+", default=[1.0])
    eff.set_defaults(func=cmd_efficiency)

    oracle = sub.add_parser("oracle", help="per-decoy detection probabilities")
    oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, ValueError) as exc:
        print(f"smqka: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
