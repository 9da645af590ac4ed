"""Command-line entry point: pretrain-vae, train, sweep, baseline, report."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from . import experiment as ex
from .config import ExperimentConfig, load_config

log = logging.getLogger("mfris_sagin")


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def _prepare(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    data = cfg.model_dump(mode="json")
    if getattr(args, "seeds", None):
        data["seeds"] = args.seeds
    if getattr(args, "episodes", None):
        data["episodes"] = args.episodes
    if getattr(args, "method", None):
        data["method"]["kind"] = args.method
    if args.out:
        data["output_dir"] = str(args.out)
    return ExperimentConfig.model_validate(data)


def cmd_pretrain(args) -> int:
    cfg = _prepare(args)
    out = Path(cfg.output_dir)
    ex.write_run_header(cfg, out)
    target = out / "vae" / "compressors.pkl"
    if target.exists():
        target.unlink()
    ex.load_or_pretrain(cfg, out)
    for r in ex.read_csv(out / "vae" / "report.csv"):
        print(", ".join(f"{k}={v}" for k, v in r.items()))
    return 0


def cmd_train(args) -> int:
    cfg = _prepare(args)
    if cfg.method.kind in ex.BASELINE_KINDS:
        log.error("method %s is a baseline; use the baseline command", cfg.method.kind)
        return 2
    ex.run_experiment(cfg, cfg.output_dir, workers=args.workers, resume=args.resume)
    print(ex.report(cfg.output_dir)[0])
    return 0


def cmd_baseline(args) -> int:
    cfg = _prepare(args)
    if cfg.method.kind not in ex.BASELINE_KINDS:
        log.error("method %s is not a baseline (choose from %s)", cfg.method.kind, sorted(ex.BASELINE_KINDS))
        return 2
    ex.run_experiment(cfg, cfg.output_dir, workers=args.workers)
    print(ex.report(cfg.output_dir)[0])
    return 0


def cmd_sweep(args) -> int:
    cfg = _prepare(args)
    if cfg.sweep is None:
        log.error("config has no sweep section")
        return 2
    rows = ex.run_sweep(cfg, cfg.output_dir, workers=args.workers)
    for r in ex.aggregate_sweep(rows):
        print(f"{cfg.sweep.axis}={r['value']}: reward {r['reward_mean']:.4g} +- {r['reward_std']:.3g}, "
              f"EE {r['ee_mean']:.4g} +- {r['ee_std']:.3g} (n={r['n']})")
    return 0


def cmd_report(args) -> int:
    run_dir = args.run_dir or args.out
    if run_dir is None:
        log.error("report needs a run directory")
        return 2
    text, _ = ex.report(run_dir)
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfris-sagin", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, workers=True):
        sp.add_argument("--config", type=Path, help="YAML experiment file")
        sp.add_argument("--out", type=Path, help="run directory (overrides output_dir)")
        sp.add_argument("--seeds", type=_seeds, help="comma-separated seed list")
        if workers:
            sp.add_argument("--workers", type=int, default=1, help="parallel processes")
        sp.add_argument("--episodes", type=int, help="override the episode count")

    sp = sub.add_parser("pretrain-vae", help="fit the state and action compressors")
    common(sp, workers=False)
    sp.set_defaults(func=cmd_pretrain)
    sp = sub.add_parser("train", help="train the twin hybrid learners or an ablation")
    common(sp)
    sp.add_argument("--resume", action="store_true", help="continue from the last checkpoint")
    sp.set_defaults(func=cmd_train)
    sp = sub.add_parser("baseline", help="run a comparison method")
    common(sp)
    sp.add_argument("--method", choices=sorted(ex.BASELINE_KINDS))
    sp.set_defaults(func=cmd_baseline)
    sp = sub.add_parser("sweep", help="train over one swept config axis")
    common(sp)
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("report", help="summarize a run directory")
    sp.add_argument("run_dir", nargs="?", type=Path)
    sp.add_argument("--out", type=Path, help="run directory")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValidationError, ValueError, FileNotFoundError, KeyError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
