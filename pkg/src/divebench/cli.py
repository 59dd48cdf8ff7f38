"""Single command-line entry point wiring all modules.

Exit codes: 0 success, 1 usage, 2 bad input or I/O, 3 internal invariant
violation. All subcommands are deterministic given --seed and the config;
--offline guarantees no network traffic (degrees come from the lexicon/cache).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import frame_io
from .bench import (BenchManifest, ModelReport, emit_report, leaderboard_md,
                    run_benchmark, score_item, BenchItem)
from .config import Config, ConfigError
from .curation import CurationParams, curate, write_manifests
from .degree import DegreeAnnotator
from .dynamics import dynamic_score_from_flows, pair_flows
from .flow import dump_flows
from .quality import quality_profile
from .study import StudyConfig, aggregate, load_store

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common_parent(with_config: bool) -> argparse.ArgumentParser:
    # SUPPRESS defaults so a flag after the subcommand overrides, while its
    # absence keeps the value parsed from the global position.
    p = argparse.ArgumentParser(add_help=False)
    if with_config:
        p.add_argument("--config", metavar="FILE", default=argparse.SUPPRESS,
                       help="JSON config file")
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                   help="machine-readable JSON on stdout")
    p.add_argument("--offline", action="store_true", default=argparse.SUPPRESS,
                   help="never touch the network (lexicon degrees only)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="global RNG seed")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                   help="worker pool size (default: logical CPUs)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dive", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", metavar="FILE", help="JSON config file")
    parser.add_argument("--json", action="store_true",
                        help="machine-readable JSON on stdout")
    parser.add_argument("--offline", action="store_true",
                        help="never touch the network (lexicon degrees only)")
    parser.add_argument("--seed", type=int, default=0, help="global RNG seed")
    parser.add_argument("--jobs", type=int, default=0,
                        help="worker pool size (default: logical CPUs)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    common = _common_parent(with_config=True)
    common_nocfg = _common_parent(with_config=False)

    p = sub.add_parser("score", parents=[common],
                       help="dynamics + quality profile of one video")
    p.add_argument("video_dir")
    p.add_argument("--subject-only", action="store_true",
                   help="camera-compensated motion")
    p.add_argument("--dump-flow", metavar="DIR", help="write flow_%%04d.json dumps")

    p = sub.add_parser("bench", parents=[common],
                       help="run the benchmark over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="bench_out")

    p = sub.add_parser("annotate", parents=[common],
                       help="annotate dynamic degrees for a manifest")
    p.add_argument("--manifest", required=True)

    p = sub.add_parser("curate", parents=[common],
                       help="screen clips for cuts and camera motion")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="curation_out")

    p = sub.add_parser("static-gen", parents=[common],
                       help="duplicate one image into a static clip")
    p.add_argument("--image", required=True)
    p.add_argument("--n", type=int, default=49)
    p.add_argument("--out", required=True)

    sub.add_parser("mca-demo", parents=[common],
                   help="adapter identity/gradient/loss checks")

    hs = sub.add_parser("human-study", help="human-study utilities")
    hs_sub = hs.add_subparsers(dest="hs_command", metavar="SUBCOMMAND")
    p = hs_sub.add_parser("aggregate", parents=[common_nocfg],
                          help="aggregate a response store")
    p.add_argument("--store", required=True)
    p.add_argument("--config", dest="study_config", required=True,
                   help="study config JSON")

    p = sub.add_parser("serve-study", parents=[common_nocfg],
                       help="run the ranking-study HTTP service")
    p.add_argument("--config", dest="study_config", required=True,
                   help="study config JSON")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--store", help="override the default study_<id>.jsonl path")
    p.add_argument("--ui", metavar="DIR",
                   help="also serve the browser UI from this directory")

    p = sub.add_parser("report", help="report utilities")
    rp = p.add_subparsers(dest="report_command", metavar="SUBCOMMAND")
    m = rp.add_parser("merge", parents=[common],
                      help="merge report JSONs into a leaderboard")
    m.add_argument("files", nargs="+")
    m.add_argument("--out", default="leaderboard.md")

    return parser


def _load_config(args) -> Config:
    if args.config:
        return Config.from_file(args.config)
    return Config()


def _cmd_score(args, cfg: Config) -> int:
    seq = frame_io.load_sequence(args.video_dir)
    if len(seq) < 2:
        raise frame_io.FrameIoError(f"{args.video_dir}: need >= 2 frames to score")
    small = frame_io.downscale_for_flow(seq, cfg.max_dim)
    flows = pair_flows(small, cfg.flow)
    if args.dump_flow:
        dump_flows(flows, args.dump_flow)
    dyn = dynamic_score_from_flows(flows, small.diagonal, cfg.d_ref,
                                   args.subject_only)
    qual = quality_profile(small, flows, dyn, cfg.a_ref, cfg.r_ref, cfg.gamma)
    record = {**dyn.to_dict(item_id=seq.item_id), **qual.to_dict()}
    print(json.dumps(record, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_bench(args, cfg: Config) -> int:
    manifest = BenchManifest.from_file(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    bench_cfg = cfg.bench_config(offline=args.offline, jobs=args.jobs)
    bench_cfg.cache_path = str(out_dir / Path(cfg.cache_path).name)
    report = run_benchmark(manifest, bench_cfg)
    paths = emit_report(report, out_dir)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(f"{report.model_name}: n={report.n_items} failed={report.n_failed} "
              f"DR={report.dr:.2f} DC={report.dc:.2f} DBQ={report.dbq:.2f}")
        for p in paths:
            print(f"wrote {p}")
    return EXIT_OK


def _cmd_annotate(args, cfg: Config) -> int:
    manifest = BenchManifest.from_file(args.manifest)
    annotator = DegreeAnnotator(cache_path=cfg.cache_path,
                                client=None if args.offline else cfg.llm)
    rows = []
    for item in manifest.items:
        ann = annotator.annotate({"item_id": item.item_id, "prompt": item.prompt,
                                  "image_path": item.image_path or None})
        rows.append(ann.to_dict())
    print(json.dumps(rows, indent=2))
    return EXIT_OK


def _cmd_curate(args, cfg: Config) -> int:
    p = Path(args.manifest)
    if not p.is_file():
        raise FileNotFoundError(f"manifest not found: {p}")
    items = json.loads(p.read_text())
    params = cfg.curation
    verdicts = curate(items, params, jobs=args.jobs)
    keep_p, drop_p = write_manifests(verdicts, args.out)
    summary = {"kept": sum(v.keep for v in verdicts),
               "dropped": sum(not v.keep for v in verdicts),
               "keep_manifest": str(keep_p), "drop_manifest": str(drop_p)}
    print(json.dumps(summary, indent=2) if args.json
          else f"kept {summary['kept']}, dropped {summary['dropped']} "
               f"-> {keep_p}, {drop_p}")
    return EXIT_OK


def _cmd_static_gen(args, cfg: Config) -> int:
    frame = frame_io.load_image(args.image)
    seq = frame_io.synthesize_static(frame, n=args.n)
    frame_io.write_sequence(seq, args.out)
    print(f"wrote {args.n} identical frames to {args.out}")
    return EXIT_OK


def _cmd_mca_demo(args, cfg: Config) -> int:
    from .demo import run_mca_demo

    ok = run_mca_demo(seed=args.seed)
    return EXIT_OK if ok else EXIT_INTERNAL


def _cmd_human_study(args, cfg: Config) -> int:
    if args.hs_command != "aggregate":
        raise UsageError("human-study requires a subcommand (aggregate)")
    study_cfg = StudyConfig.from_file(args.study_config)
    records, problems = load_store(args.store, study_cfg)
    for problem in problems:
        print(f"store problem: {problem}", file=sys.stderr)
    print(json.dumps(aggregate(records, study_cfg), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_serve_study(args, cfg: Config) -> int:
    from .service import default_store_path, serve_study

    study_cfg = StudyConfig.from_file(args.study_config)
    store = args.store or default_store_path(study_cfg)
    serve_study(study_cfg, store, port=args.port, host=args.host, ui_dir=args.ui)
    return EXIT_OK


def _cmd_report(args, cfg: Config) -> int:
    if args.report_command != "merge":
        raise UsageError("report requires a subcommand (merge)")
    reports = []
    for f in args.files:
        p = Path(f)
        if not p.is_file():
            raise FileNotFoundError(f"report not found: {p}")
        reports.append(ModelReport.from_dict(json.loads(p.read_text())))
    md = leaderboard_md(reports)
    Path(args.out).write_text(md)
    print(md if not args.json else json.dumps({"out": args.out}))
    return EXIT_OK


class UsageError(Exception):
    pass


_COMMANDS = {
    "score": _cmd_score,
    "bench": _cmd_bench,
    "annotate": _cmd_annotate,
    "curate": _cmd_curate,
    "static-gen": _cmd_static_gen,
    "mca-demo": _cmd_mca_demo,
    "human-study": _cmd_human_study,
    "serve-study": _cmd_serve_study,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse --help (0) or usage error (1)
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    np.random.seed(args.seed & 0xFFFFFFFF)
    try:
        cfg = _load_config(args)
        return _COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"dive: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, frame_io.FrameIoError, FileNotFoundError, OSError,
            json.JSONDecodeError, KeyError) as exc:
        print(f"dive: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, RuntimeError) as exc:
        print(f"dive: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
