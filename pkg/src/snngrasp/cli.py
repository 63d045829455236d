"""Command-line entry point: ``snngrasp <command> [options]``.

Exit codes: 0 success, 2 usage error, 3 invalid configuration,
4 file I/O failure, 5 runtime failure (e.g. numerical divergence).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import checkpoint, energy, harness
from .config import ConfigError, RunConfig, load_config
from .train import train

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_IO, EXIT_RUNTIME = 0, 2, 3, 4, 5

log = logging.getLogger("snngrasp")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="run configuration file (defaults if omitted)")
    p.add_argument("--seed", type=int, help="master seed (overrides run.seed)")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides run.out_dir)")
    p.add_argument("--model", choices=("snn", "ann"), help="policy network")
    p.add_argument("--mode", choices=("multimodal", "unimodal"), help="observation mode")
    p.add_argument("--updates", type=int, help="PPO updates (overrides run.updates)")
    p.add_argument("--envs", type=int, help="parallel training environments (overrides run.envs)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="snngrasp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one agent with the curriculum")
    _common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint over trials x evaluations")
    _common(p)
    p.add_argument("--checkpoint", required=True, metavar="PATH")
    p.add_argument("--stage", type=int, choices=(0, 1, 2),
                   help="curriculum stage used for observations (default: from checkpoint, else 2)")

    p = sub.add_parser("ablate", help="train+evaluate snn/ann x multimodal/unimodal with paired seeds")
    _common(p)

    p = sub.add_parser("energy-report", help="operation-count energy comparison")
    _common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--published", action="store_true",
                     help="use the published rates r=0.34, r_mem=1, r_in=1, r_out=0.44")
    src.add_argument("--snn-trace", metavar="PATH", help="saved SNN activity trace (JSON)")
    p.add_argument("--ann-trace", metavar="PATH", help="saved ANN activity trace (JSON)")
    p.add_argument("--snn-checkpoint", metavar="PATH", help="SNN weights for a live recording")
    p.add_argument("--ann-checkpoint", metavar="PATH", help="ANN weights for a live recording")
    p.add_argument("--batch", type=int, help="B in the energy formulas (overrides energy.batch)")
    p.add_argument("--steps", type=int, help="T in the energy formulas (overrides energy.steps)")

    p = sub.add_parser("dump-trajectory", help="write one evaluation episode to trajectory.csv")
    _common(p)
    p.add_argument("--checkpoint", metavar="PATH", help="policy weights (fresh network if omitted)")
    p.add_argument("--env-index", type=int, default=0)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    run = {}
    for flag, key in (("seed", "seed"), ("out", "out_dir"), ("model", "model"), ("mode", "mode"),
                      ("updates", "updates"), ("envs", "envs")):
        value = getattr(args, flag, None)
        if value is not None:
            run[key] = value
    if run:
        cfg = cfg.replace("run", **run)
    energy_changes = {k: getattr(args, k) for k in ("batch", "steps") if getattr(args, k, None) is not None}
    if energy_changes:
        cfg = cfg.replace("energy", **energy_changes)
    return cfg


def _cmd_train(cfg: RunConfig, args, argv) -> int:
    out = Path(cfg.run.out_dir)
    harness.write_manifest(out, cfg, ["train"] + argv)
    rep = train(cfg, out)
    print(f"trained {rep.updates} updates; final stage {rep.final_stage}; "
          f"advanced at {rep.advanced_at or 'never'}; outputs in {out}")
    return EXIT_OK


def _cmd_eval(cfg: RunConfig, args, argv) -> int:
    policy, meta = checkpoint.load_with_meta(args.checkpoint)
    out = Path(cfg.run.out_dir)
    harness.write_manifest(out, cfg, ["eval"] + argv)
    stage = args.stage if args.stage is not None else int(meta.get("stage", 2))
    results = harness.evaluate(policy, cfg, stage)
    harness.write_trials(out / "trials.csv", [(policy.kind, cfg.run.mode, cfg.run.seed, r) for r in results])
    for r in results:
        print(f"trial {r.trial}: grasp {r.grasp_success:.3f} lift {r.lift_success:.3f} reward {r.mean_reward:.4f}")
    return EXIT_OK


def _cmd_ablate(cfg: RunConfig, args, argv) -> int:
    out = Path(cfg.run.out_dir)
    harness.write_manifest(out, cfg, ["ablate"] + argv)
    rows = harness.ablate(cfg, out)
    for row in rows:
        print(f"{row['model']:>3} {row['mode']:<10} stage {row['final_stage']} "
              f"grasp {row['grasp_success']:.3f} lift {row['lift_success']:.3f}")
    return EXIT_OK


def _cmd_energy(cfg: RunConfig, args, argv) -> int:
    costs = energy.OpCosts(cfg.energy.alpha_m, cfg.energy.alpha_a)
    out = Path(cfg.run.out_dir)
    harness.write_manifest(out, cfg, ["energy-report"] + argv)
    if args.published:
        rep = energy.report(**energy.PUBLISHED, batch=cfg.energy.batch, steps=cfg.energy.steps,
                            costs=costs, source="published")
    else:
        if args.snn_trace or args.ann_trace:
            if not (args.snn_trace and args.ann_trace):
                raise _Usage("--snn-trace and --ann-trace must be given together")
            snn_trace = energy.ActivityTrace.load(args.snn_trace)
            ann_trace = energy.ActivityTrace.load(args.ann_trace)
        else:
            snn = checkpoint.load(args.snn_checkpoint) if args.snn_checkpoint else harness.fresh_policy(cfg, "snn")
            ann = checkpoint.load(args.ann_checkpoint) if args.ann_checkpoint else harness.fresh_policy(cfg, "ann")
            if snn.kind != "snn" or ann.kind != "ann":
                raise ValueError("--snn-checkpoint/--ann-checkpoint hold the wrong network kind")
            snn_trace = harness.record_activity(snn, cfg)
            ann_trace = harness.record_activity(ann, cfg)
            snn_trace.save(out / "trace_snn.json")
            ann_trace.save(out / "trace_ann.json")
        rep = harness.measured_report(snn_trace, ann_trace, cfg)
    harness.write_energy_csv(out / "energy.csv", rep)
    text = rep.text()
    (out / "energy.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_dump(cfg: RunConfig, args, argv) -> int:
    if args.checkpoint:
        policy = checkpoint.load(args.checkpoint)
    else:
        policy = harness.fresh_policy(cfg, cfg.run.model)
    out = Path(cfg.run.out_dir)
    harness.write_manifest(out, cfg, ["dump-trajectory"] + argv)
    n = harness.dump_trajectory(policy, cfg, out / "trajectory.csv", args.env_index)
    print(f"wrote {n} rows to {out / 'trajectory.csv'}")
    return EXIT_OK


class _Usage(Exception):
    pass


COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "energy-report": _cmd_energy,
    "dump-trajectory": _cmd_dump,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args, argv[1:])
    except ConfigError as exc:
        print(f"snngrasp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Usage as exc:
        print(f"snngrasp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"snngrasp: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, KeyError) as exc:
        print(f"snngrasp: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
