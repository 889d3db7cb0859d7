"""Command-line entry point: ``selective-exposure <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bipartite import build_user_post, save_incidence
from .ingest import IngestError, load_dataset
from .metrics import compute_profiles
from .report import PipelineOptions, run_pipeline, write_curves, write_grids
from .synth import SynthConfig, generate
from .taxonomy import TaxonomyThresholds, classify_population

COMMANDS = ("ingest", "profile", "classify", "curves", "density", "synth", "run")


def _bins(text: str) -> tuple[int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) == 1:
        return parts[0], parts[0]
    if len(parts) == 2:
        return parts[0], parts[1]
    raise argparse.ArgumentTypeError("--bins takes LOG or LOG,LINEAR")


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--interactions-file", type=Path, default=d(None))
    parser.add_argument("--posts-file", type=Path, default=d(None))
    parser.add_argument("--topics-file", type=Path, default=d(None))
    parser.add_argument("--out-dir", type=Path, default=d(Path(".")))
    parser.add_argument("--threads", type=int, default=d(1), metavar="N")
    parser.add_argument("--thresholds", type=TaxonomyThresholds.parse, default=d(None),
                        metavar="T_TOPICS,T_PAGES")
    parser.add_argument("--bins", type=_bins, default=d((40, 50)), metavar="LOG[,LINEAR]")
    parser.add_argument("--seed", type=int, default=d(None))
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selective-exposure",
        description="Selective-exposure analysis of user-post like logs.",
    )
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)

    helps = {
        "ingest": "validate inputs, report row accounting, cache the user-post incidence",
        "profile": "write the per-user profile table",
        "classify": "write taxonomy labels and summary",
        "curves": "write binned pages/topics curves",
        "density": "write 2-D density grids",
        "synth": "generate a synthetic dataset",
        "run": "full pipeline",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "synth":
            p.add_argument("--config", type=Path, help="flat key=value config file")
            p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                           help="override one config field (repeatable)")
    return parser


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise SystemExit(f"{args.command}: missing required option(s) {flags}")


def _options(args) -> PipelineOptions:
    return PipelineOptions(log_bins=args.bins[0], linear_bins=args.bins[1],
                           thresholds=args.thresholds, workers=max(1, args.threads))


def _dataset(args):
    _need(args, "interactions_file", "posts_file")
    return load_dataset(args.interactions_file, args.posts_file, args.topics_file)


def _synth_config(args) -> SynthConfig:
    values = {}
    if args.config is not None:
        values.update({k: getattr(SynthConfig.from_file(args.config), k)
                       for k in SynthConfig.__dataclass_fields__})
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        values[key.strip()] = val.strip()
    if args.seed is not None:
        values["seed"] = args.seed
    return SynthConfig.from_mapping(values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "synth":
            paths = generate(_synth_config(args)).write(out)
            print(json.dumps({k: str(v) for k, v in paths.items()}, indent=2))
        elif args.command == "run":
            _need(args, "interactions_file", "posts_file")
            written = run_pipeline(args.interactions_file, args.posts_file, out,
                                   topics=args.topics_file, options=_options(args))
            print("\n".join(str(p) for p in written.values()))
        else:
            ds = _dataset(args)
            if args.command == "ingest":
                save_incidence(out / "user_post.npz", build_user_post(ds.interactions))
                summary = ds.summary()
                (out / "ingest_summary.json").write_text(
                    json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
                print(json.dumps(summary, indent=2, sort_keys=True))
                return 0
            opts = _options(args)
            profiles = compute_profiles(ds, workers=opts.workers)
            if args.command == "profile":
                profiles.to_csv(out / "profiles.csv")
            elif args.command == "classify":
                if not profiles.has_topics:
                    raise SystemExit("classify needs --topics-file")
                cls = classify_population(profiles, opts.thresholds)
                cls.to_csv(out / "taxonomy.csv")
                cls.write_summary(out / "taxonomy_summary.json")
                print(json.dumps(cls.summary(), indent=2, sort_keys=True))
            elif args.command == "curves":
                write_curves(profiles, out, opts)
            elif args.command == "density":
                write_grids(profiles, out, opts)
    except (IngestError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
