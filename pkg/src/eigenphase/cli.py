"""Command-line entry point ``eigenphase``.

Every verb takes the same JSON experiment config and runs a subset of it::

    eigenphase run config.json --out results/
    eigenphase phases config.json --no-cache
    eigenphase trace config.json --seed 7

The exit status is 0 when every configured check passes, 1 when a check fails
and 2 for invalid input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from eigenphase.pipeline import SPECTRAL_PARTS, ConfigError, ExperimentConfig, run_experiment

VERBS = {
    "run": (None, SPECTRAL_PARTS),
    "classical": (["classical"], SPECTRAL_PARTS),
    "phases": (["phases"], SPECTRAL_PARTS),
    "spectrum2d": (["dense2d"], SPECTRAL_PARTS),
    "measure": (["spectral"], ("measure",)),
    "trace": (["spectral"], ("trace",)),
    "report": (["spectral"], ("report",)),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eigenphase", description="Scattering-matrix eigenphase experiments.")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb, help=f"{verb} stage(s) of an experiment config")
        p.add_argument("config", help="experiment config (JSON)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="override the Monte Carlo seed")
        p.add_argument("--no-cache", action="store_true", help="recompute every artifact")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with open(args.config) as fh:
            data = json.load(fh)
        if args.seed is not None:
            data["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(data)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"eigenphase: {exc}", file=sys.stderr)
        return 2
    stages, parts = VERBS[args.verb]
    if stages is not None and not set(stages) & set(cfg.pipelines):
        # a verb naming a stage the config leaves out still runs that stage
        cfg.pipelines = list(cfg.pipelines) + list(stages)
        try:
            cfg.validate()
        except ConfigError as exc:
            print(f"eigenphase: {exc}", file=sys.stderr)
            return 2
    manifest = run_experiment(cfg, out=args.out, use_cache=not args.no_cache, stages=stages, spectral_parts=parts)
    for name, st in manifest.stages.items():
        extra = " (cached)" if st.get("cached") else ""
        print(f"{name:10s} {st['status']}{extra}  {st.get('wall_time', 0.0):.2f}s")
    for c in manifest.checks:
        bound = f"<= {c['max']}" if "max" in c else f">= {c['min']}"
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['metric']} = {c['value']} ({bound})")
    return 0 if manifest.ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
