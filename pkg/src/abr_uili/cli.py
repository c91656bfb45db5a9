"""Command line entry point: ``abr-uili run|sweep|presets|validate``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, load_config
from .harness import run_config
from .policies import PolicyKind


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "policy", None):
        cfg = cfg.with_policy(args.policy)
    return cfg


def _print_summary(summary: dict, out: Path) -> None:
    port = summary.get("bottleneck_port")
    line = f"{summary['scenario']} policy={summary['policy']} -> {out}"
    if port and port in summary["ports"]:
        line += f" (bottleneck max queue {summary['ports'][port]['max_qlen_cells']} cells)"
    print(line)


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out or cfg.output_dir)
    _, summary = run_config(cfg, out)
    _print_summary(summary, out)
    return 0


def cmd_sweep(args) -> int:
    base = load_config(args.config)
    kinds = [k.strip() for k in args.policies.split(",") if k.strip()]
    valid = {k.value for k in PolicyKind}
    for kind in kinds:
        if kind not in valid:
            raise ConfigError("--policies", f"unknown policy kind {kind!r}")
    root = Path(args.out or base.output_dir)
    for kind in kinds:
        out = root / kind
        _, summary = run_config(base.with_policy(kind), out)
        _print_summary(summary, out)
    return 0


def cmd_presets(args) -> int:
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, doc in PRESETS.items():
            (out / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
            print(out / f"{name}.json")
    else:
        json.dump(PRESETS, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    print(f"{args.config}: ok ({cfg.topology}, policy {cfg.policy.kind.value})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abr-uili", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    kinds = [k.value for k in PolicyKind]

    p = sub.add_parser("run", help="run one scenario and write traces")
    p.add_argument("--config", required=True)
    p.add_argument("--policy", choices=kinds)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run one scenario under several policies")
    p.add_argument("--config", required=True)
    p.add_argument("--policies", default="none,aug95,baseline,count_based,time_based")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("presets", help="print or write the canonical configurations")
    p.add_argument("--out")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("validate", help="check a configuration file")
    p.add_argument("--config", required=True)
    p.add_argument("--policy", choices=kinds)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
