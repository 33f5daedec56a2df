"""Command-line interface.

::

    rmtspacings sample     --config ens.json [--seed N] [--out-dir D]
    rmtspacings analyze    SPECTRA.jsonl [--config analysis.json] [--cutoff C] [--truncation T] [--bins B]
    rmtspacings experiment --config exp.json
    rmtspacings train      --config net.json

Exit status is 0 only when every output was written; 2 for invalid input
(bad config, schema or arguments), 1 for other failures.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace

from rmtspacings import __version__, pipeline
from rmtspacings.config import AnalysisConfig, ExperimentConfig
from rmtspacings.errors import RmtError, ValidationError
from rmtspacings.localstats import DEFAULT_BINS, DEFAULT_TRUNCATION
from rmtspacings.spectra_io import read_spectra
from rmtspacings.unfold import DEFAULT_CUTOFF

log = logging.getLogger("rmtspacings")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def _experiment_config(args) -> ExperimentConfig:
    if not args.config:
        raise ValidationError(f"{args.command} requires --config")
    cfg = ExperimentConfig.from_dict(_load_json(args.config))
    return cfg.with_overrides(seed=args.seed, out_dir=args.out_dir, cutoff=args.cutoff,
                              truncation=args.truncation, bins=args.bins)


def _analysis_config(args) -> AnalysisConfig:
    d = _load_json(args.config) if args.config else {}
    if "analysis" in d or "ensemble" in d or "network" in d:
        d = d.get("analysis", {})
    cfg = AnalysisConfig.from_dict(d)
    if args.cutoff is not None:
        cfg = replace(cfg, degeneracy_cutoff=args.cutoff)
    if args.truncation is not None:
        cfg = replace(cfg, truncation=args.truncation)
    if args.bins is not None:
        cfg = replace(cfg, bins=args.bins)
    if args.seed is not None:
        cfg = replace(cfg, unfolding=replace(cfg.unfolding, seed=args.seed))
    return cfg


def cmd_sample(args):
    cfg = _experiment_config(args)
    path = pipeline.cmd_sample(cfg)
    print(path)


def cmd_analyze(args):
    cfg = _analysis_config(args)
    records = read_spectra(args.spectra)
    summary = pipeline.cmd_analyze(records, cfg, args.out_dir or "out", source=str(args.spectra))
    _print_summary(summary)


def cmd_experiment(args):
    summary = pipeline.cmd_experiment(_experiment_config(args))
    _print_summary(summary)


def cmd_train(args):
    summary = pipeline.cmd_train(_experiment_config(args))
    net = summary["network"]
    print(f"train_loss={net['train_loss']:.6g} test_loss={net['test_loss']:.6g}")


def _print_summary(summary):
    for name in ("spacings", "ratios"):
        if name in summary:
            s = summary[name]
            n = s.get("n_spacings", s.get("n_ratios"))
            print(f"{name}: n={n} ks={s['ks_statistic']:.6f} ({s['reference']})")
    print(f"removed_degenerate_fraction={summary['removed_degenerate_fraction']:.6f}")


def build_parser():
    p = argparse.ArgumentParser(prog="rmtspacings",
                                description="Local spectral statistics of random and network curvature matrices.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, help="override the configured seed")
        sp.add_argument("--out-dir", help="output directory")
        sp.add_argument("--cutoff", type=float, help=f"degeneracy cut-off (default {DEFAULT_CUTOFF:g})")
        sp.add_argument("--truncation", type=float,
                        help=f"spacing-ratio truncation (default {DEFAULT_TRUNCATION:g})")
        sp.add_argument("--bins", type=int, help=f"histogram bins (default {DEFAULT_BINS})")

    sp = sub.add_parser("sample", help="draw ensemble matrices and write their spectra as JSONL")
    common(sp)
    sp.set_defaults(func=cmd_sample)
    sp = sub.add_parser("analyze", help="compute spacing/ratio statistics of a spectra file")
    sp.add_argument("spectra", help="JSONL spectra file")
    common(sp)
    sp.set_defaults(func=cmd_analyze)
    sp = sub.add_parser("experiment", help="sample or build curvature matrices, then analyse them")
    common(sp)
    sp.set_defaults(func=cmd_experiment)
    sp = sub.add_parser("train", help="train a network and save its weights")
    common(sp)
    sp.set_defaults(func=cmd_train)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ValidationError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RmtError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
