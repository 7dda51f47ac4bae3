"""Command-line front end.

Subcommands map onto pipeline stages:

    validate     load and check the configured CSV data
    preprocess   assemble base-set matrices (exported as CSV)
    train        multi-restart training over every matrix
    select       top-k member selection
    master       train the stacking network
    report       emit report files for a finished run
    predict      next-month forecast from a finished run

Each staged command runs the pipeline from scratch up to its stage (runs
are deterministic, so partial runs agree with full ones). ``--set
key.path=value`` overrides any config key. Exit codes are distinct per
failing stage.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import PipelineStageError, SpreadnetError
from .pipeline import (
    MANIFEST_NAME,
    PipelineConfig,
    emit_reports,
    export_matrices,
    ingest,
    load_run,
    predict_from_run,
    run_pipeline,
)
from .series import format_month

EXIT_CODES = {
    "config": 1,
    "ingest": 2,
    "preprocess": 3,
    "train": 4,
    "select": 5,
    "master": 6,
    "report": 7,
    "predict": 8,
}


def _parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ValueError(f"override {text!r} must look like key.path=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def _apply_overrides(data: dict, overrides: list[str]) -> dict:
    for text in overrides:
        path, value = _parse_override(text)
        node = data
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value
    return data


def _load_config(args) -> PipelineConfig:
    path = Path(args.config)
    data = json.loads(path.read_text(encoding="utf-8"))
    if args.set:
        data = _apply_overrides(data, args.set)
    if args.output_dir:
        data.setdefault("output", {})["directory"] = args.output_dir
    return PipelineConfig.from_dict(data)


def _run_to(args, stage: str):
    config = _load_config(args)
    return run_pipeline(config, through=stage, run_dir=args.run_dir)


def _print_ism(value) -> str:
    return "perfect" if value == "perfect" else f"{value:.4f}"


def cmd_validate(args) -> int:
    config = _load_config(args)
    frame = ingest(config)
    print(f"ok: {len(frame)} aligned months "
          f"{format_month(frame.months[0])}..{format_month(frame.months[-1])}")
    for name in frame.column_names():
        col = frame.columns[name]
        print(f"  {name:16s} min={col.min():.4f} max={col.max():.4f}")
    return 0


def cmd_preprocess(args) -> int:
    result = _run_to(args, "preprocess")
    out = result.run_dir / "matrices"
    export_matrices(result.matrices, out)
    print(f"assembled {len(result.matrices)} matrices -> {out}")
    print(f"manifest: {result.run_dir / MANIFEST_NAME}")
    return 0


def cmd_train(args) -> int:
    result = _run_to(args, "train")
    print(f"trained {len(result.candidates)} candidates "
          f"({result.config.train_cfg.restarts} restarts each)")
    for c in sorted(result.candidates, key=lambda c: c.name)[:10]:
        print(f"  {c.name}: ISM={c.score.ism!r} hits={c.score.hit_rate:.2f}")
    print(f"manifest: {result.run_dir / MANIFEST_NAME}")
    return 0


def cmd_select(args) -> int:
    result = _run_to(args, "select")
    print(f"selected {len(result.members)} members:")
    for rank, c in enumerate(result.members, start=1):
        ep = "-" if c.score.norm_ep is None else f"{c.score.norm_ep:.2f}%"
        print(f"  {rank:2d}. {c.name}  ISM={c.score.ism!r}  normEP={ep}")
    print(f"manifest: {result.run_dir / MANIFEST_NAME}")
    return 0


def cmd_master(args) -> int:
    result = _run_to(args, "master")
    score = result.master.score
    ep = "-" if score.norm_ep is None else f"{score.norm_ep:.2f}%"
    print(f"master: ISM={score.ism!r}  normEP={ep}  hits={score.hit_rate:.2f}")
    print(f"manifest: {result.run_dir / MANIFEST_NAME}")
    return 0


def cmd_report(args) -> int:
    if args.run:
        try:
            manifest = load_run(args.run)
            paths = emit_reports(manifest, args.run)
        except SpreadnetError as exc:
            raise PipelineStageError("report", exc) from exc
    elif args.config:
        result = _run_to(args, "report")
        paths = result.report_paths
    else:
        print("error: report needs --run or --config", file=sys.stderr)
        return EXIT_CODES["config"]
    for path in paths:
        print(path)
    return 0


def cmd_predict(args) -> int:
    config = _load_config(args) if args.config else None
    try:
        report = predict_from_run(args.run, config=config)
    except PipelineStageError:
        raise
    except SpreadnetError as exc:
        raise PipelineStageError("predict", exc) from exc
    arrow = "rise" if report.forecast.direction > 0 else "fall"
    print(f"forecast {report.target_month}: {report.forecast.value:.2f} "
          f"({arrow} vs last actual {report.last_actual:.2f})")
    print(f"member votes up: {report.forecast.up_vote_percent:.0f}%")
    for name, value in report.member_forecasts.items():
        print(f"  {name}: {value:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spreadnet",
        description="Country-risk spread forecasting pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, needs_config=True, needs_run=False):
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("-c", "--config", required=not needs_run,
                           help="pipeline config JSON")
        if needs_run:
            p.add_argument("--run", required=(name == "predict"),
                           help="existing run directory")
        p.add_argument("--set", action="append", default=[],
                       metavar="KEY.PATH=VALUE", help="override a config key")
        p.add_argument("-o", "--output-dir", help="override output.directory")
        p.add_argument("--run-dir", help="exact run directory to use")
        p.set_defaults(handler=fn)
        return p

    add("validate", cmd_validate)
    add("preprocess", cmd_preprocess)
    add("train", cmd_train)
    add("select", cmd_select)
    add("master", cmd_master)
    add("report", cmd_report, needs_run=True)
    add("predict", cmd_predict, needs_run=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.stage, 1)
    except SpreadnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
