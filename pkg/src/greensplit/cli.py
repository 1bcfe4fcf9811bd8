"""Batch experiment driver.

Subcommands: train, evaluate, sweep, oracle.  Exit codes: 0 success,
2 configuration error, 3 data error (missing/bad input files), 4 runtime
failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .baselines import PolicyKind
from .run import evaluate_run, oracle_run, sweep_run, train_run
from .scenario import ConfigError, ScenarioConfig, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _parse_policies(text: str) -> tuple[PolicyKind, ...]:
    return tuple(PolicyKind(p.strip().lower()) for p in text.split(",") if p.strip())


def _parse_synthetic(text: str) -> dict:
    fields = {"peak": "peak_kwh_per_unit", "sunrise": "sunrise", "sunset": "sunset",
              "cloud_sigma": "cloud_sigma"}
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, _, value = part.partition("=")
        key = key.strip()
        if key not in fields:
            raise ValueError(f"unknown synthetic solar field {key!r} (use {'/'.join(fields)})")
        out[fields[key]] = int(value) if key in ("sunrise", "sunset") else float(value)
    return out


def _apply_overrides(sc: ScenarioConfig, args) -> ScenarioConfig:
    if args.seed is not None:
        sc = replace(sc, run=replace(sc.run, seeds=(args.seed,)))
    if args.out is not None:
        sc = replace(sc, run=replace(sc.run, out_dir=args.out))
    if getattr(args, "solar", None) is not None:
        sc = replace(sc, solar=replace(sc.solar, trace=args.solar, site=args.solar))
    if getattr(args, "solar_synthetic", None) is not None:
        params = _parse_synthetic(args.solar_synthetic)
        sc = replace(sc, solar=replace(sc.solar, trace=None, cu_trace=None,
                                       du_traces=None, **params))
    if getattr(args, "policy", None) is not None:
        sc = replace(sc, policy=replace(sc.policy, kinds=_parse_policies(args.policy)))
    return sc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="greensplit",
                                     description="Dynamic function splitting lab for solar-powered RANs")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--seed", type=int, default=None, help="override the run seed list")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--solar", default=None, help="solar trace CSV shared by all nodes")
        p.add_argument("--solar-synthetic", default=None, metavar="K=V[,K=V...]",
                       help="synthetic solar (peak/sunrise/sunset/cloud_sigma)")
        p.add_argument("--policy", default=None, help="comma-separated policy kinds")

    p_train = sub.add_parser("train", help="train RL policies, write q-tables and learning curves")
    common(p_train)

    p_eval = sub.add_parser("evaluate", help="frozen-policy evaluation runs")
    common(p_eval)
    p_eval.add_argument("--artifacts", default=None, help="directory holding trained q-tables")
    p_eval.add_argument("--train-missing", action="store_true",
                        help="train RL policies whose artifacts are absent")

    p_sweep = sub.add_parser("sweep", help="sweep panel, battery or traffic size")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=("panel", "battery", "traffic"))
    p_sweep.add_argument("--values", required=True, help="comma-separated positive values")

    p_oracle = sub.add_parser("oracle", help="exact optimum on the configured small instance")
    common(p_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = _apply_overrides(load_scenario(args.config), args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = sc.run.out_dir
    try:
        if args.command == "train":
            for kind in sc.policy.kinds:
                if not kind.trained:
                    continue
                for seed in sc.run.seeds:
                    train_run(sc, seed, kind, out_dir=out_dir)
            return EXIT_OK
        if args.command == "evaluate":
            evaluate_run(sc, out_dir, artifacts_dir=args.artifacts,
                         train_missing=args.train_missing)
            return EXIT_OK
        if args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip()]
            sweep_run(sc, args.axis, values, out_dir)
            return EXIT_OK
        if args.command == "oracle":
            oracle_run(sc, out_dir)
            return EXIT_OK
        return EXIT_RUNTIME
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        msg = str(exc)
        if "row" in msg or "trace" in msg or "q-table" in msg:
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
