"""Command-line entry point: synth | run | eval | report."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .core import JointId, PipelineConfig
from .core.config import load_toml
from .core.frames import FrameStore
from .core.io import (
    annotation_to_dict,
    ensure_dir,
    read_annotations,
    read_ground_truth,
    read_predictions,
    write_ground_truth,
    write_jsonl,
)
from .errors import ArgumentError, ConfigError, ParseError, PipelineError
from .learners import save_model
from .pipeline import evaluate_accuracy, run, write_csv, write_svgs
from .synth import SceneConfig, generate_video, scene_to_toml, simulate_initializer

EXIT_OK, EXIT_IO, EXIT_PARSE, EXIT_EMPTY, EXIT_MISMATCH = 0, 2, 3, 4, 5

log = logging.getLogger("poseprop")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _pipeline_config(args) -> PipelineConfig:
    overrides = {"rng_seed": args.seed, "threads": args.threads, "iterations": args.iterations,
                 "accuracy_d": getattr(args, "d", None)}
    if args.config:
        return PipelineConfig.from_file(args.config, **overrides)
    return PipelineConfig.from_mapping({k: v for k, v in overrides.items() if v is not None})


def _scene_config(path) -> SceneConfig:
    if not path:
        return SceneConfig()
    data = load_toml(path)
    if "scene" in data:
        return SceneConfig.from_mapping(data["scene"])
    if "pipeline" in data:
        return SceneConfig()
    return SceneConfig.from_mapping(data)


def _apply_threads(n):
    if n:
        os.environ.setdefault("OMP_NUM_THREADS", str(n))


def cmd_synth(args) -> int:
    cfg = _scene_config(args.config)
    seed = args.seed or 0
    out = Path(args.out)
    try:
        ensure_dir(out)
        frames, gt = generate_video(cfg, seed)
        frames.write_dir(out / "frames")
        write_ground_truth(out / "ground_truth.jsonl", gt)
        (out / "scene.toml").write_text(scene_to_toml(cfg), encoding="utf-8")
        init = simulate_initializer(gt, args.coverage, args.noise, args.fp_rate, seed,
                                    frames.width, frames.height)
        write_jsonl(out / "initial.jsonl", (annotation_to_dict(a) for a in init))
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {out}: {exc}") from None
    print(f"wrote {len(frames)} frames, ground truth and {len(init)} initial annotations to {out}")
    return EXIT_OK


def _prediction_rows(preds):
    for (f, j), (p, c) in sorted(preds.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        yield {"frame": f, "joint": j.name, "x": p.x, "y": p.y, "confidence": c,
               "origin": "Initial", "source_frame": f, "hop_count": 0, "status": "Active"}


def _report_rows(reports):
    return [r.to_dict() for r in reports]


def cmd_run(args) -> int:
    cfg = _pipeline_config(args)
    _apply_threads(cfg.threads)
    try:
        frames = FrameStore.from_dir(args.frames)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_IO, f"cannot read frames from {args.frames}: {exc}") from None
    try:
        initial = read_annotations(args.initial)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {args.initial}: {exc}") from None
    if initial.n_active() == 0:
        raise CliError(EXIT_EMPTY, f"{args.initial}: no active initial annotations")
    gt = read_ground_truth(args.gt, len(frames)) if args.gt else None
    out = Path(args.out)
    try:
        ensure_dir(out)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create {out}: {exc}") from None
    try:
        res = run(cfg, frames, initial, gt)
    except PipelineError as exc:
        raise CliError(EXIT_EMPTY, str(exc)) from None
    try:
        # discarded history lives in the audit log; the annotation file holds the final state
        write_jsonl(out / "annotations.jsonl",
                    (annotation_to_dict(a) for a in res.annos if a.status.value != "Discarded"))
        write_jsonl(out / "predictions.jsonl", _prediction_rows(res.predictions))
        save_model(out / "detector.bin", res.detector, "PersonalizedDetector")
        write_csv(out / "report.csv", res.reports)
        write_svgs(out, res.reports, res.baseline)
        write_jsonl(out / "audit.jsonl", res.audit)
        (out / "reports.json").write_text(json.dumps(
            {"baseline": res.baseline.to_dict(), "iterations": _report_rows(res.reports)},
            indent=1), encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write results to {out}: {exc}") from None
    for r in res.reports:
        cov = " ".join(f"{j.name}={100 * r.coverage[j]:.1f}%" for j in JointId)
        print(f"iteration {r.iteration}: {cov}")
    print(f"results written to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    d = 20.0 if args.d is None else args.d
    try:
        preds = read_predictions(args.preds)
        gt = read_ground_truth(args.gt)
    except OSError as exc:
        raise CliError(EXIT_IO, str(exc)) from None
    try:
        per, avg = evaluate_accuracy({k: v[:2] for k, v in preds.items()}, gt, d)
    except ArgumentError as exc:
        raise CliError(EXIT_MISMATCH, str(exc)) from None
    rows = [(j.name, per[j]) for j in JointId if j in per] + [("average", avg)]
    for name, v in rows:
        print(f"{name:10s} {v:6.1f}")
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write("joint,accuracy\n")
                fh.writelines(f"{n},{v:.4f}\n" for n, v in rows)
        except OSError as exc:
            raise CliError(EXIT_IO, str(exc)) from None
    return EXIT_OK


def cmd_report(args) -> int:
    """Re-render CSV and SVG charts from a run directory's reports.json."""
    src = Path(args.run_dir) / "reports.json"
    try:
        data = json.loads(src.read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {src}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, f"{src}:{exc.lineno}: {exc.msg}") from None
    from .pipeline.report import IterationReport, JointCounts

    def load(d):
        acc = d.get("accuracy")
        return IterationReport(
            d["iteration"], {JointId.parse(k): v for k, v in d["coverage"].items()},
            None if acc is None else {JointId.parse(k): v for k, v in acc.items()},
            {JointId.parse(k): JointCounts(**v) for k, v in d.get("counts", {}).items()})

    try:
        reports = [load(d) for d in data["iterations"]]
        baseline = load(data["baseline"]) if data.get("baseline") else None
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_PARSE, f"{src}: malformed report ({exc})") from None
    out = Path(args.out or args.run_dir)
    try:
        ensure_dir(out)
        write_csv(out / "report.csv", reports)
        write_svgs(out, reports, baseline)
    except OSError as exc:
        raise CliError(EXIT_IO, str(exc)) from None
    for r in reports:
        print(f"iteration {r.iteration}: " + " ".join(
            f"{j.name}={100 * v:.1f}%" for j, v in r.coverage.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file ([pipeline] / [scene] tables)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None, help="worker cap (0 = all cores)")
    common.add_argument("--iterations", type=int, default=None)
    common.add_argument("--d", type=float, default=None, help="accuracy distance in px")
    common.add_argument("--out", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="poseprop", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="render a synthetic video with ground truth")
    s.add_argument("--coverage", type=float, default=0.05, help="fraction of frames initialized")
    s.add_argument("--noise", type=float, default=2.0, help="initializer position noise sigma (px)")
    s.add_argument("--fp-rate", type=float, default=0.02, help="initializer false-positive rate")
    s.set_defaults(func=cmd_synth, out_required=True)

    r = sub.add_parser("run", parents=[common], help="propagate annotations and train the detector")
    r.add_argument("frames", help="directory of frame images")
    r.add_argument("initial", help="initial annotations (JSONL)")
    r.add_argument("--gt", help="ground truth (JSONL) for accuracy reporting")
    r.set_defaults(func=cmd_run, out_required=True)

    e = sub.add_parser("eval", parents=[common], help="accuracy of predictions against ground truth")
    e.add_argument("preds")
    e.add_argument("gt")
    e.set_defaults(func=cmd_eval, out_required=False)

    rp = sub.add_parser("report", parents=[common], help="re-render charts from a run directory")
    rp.add_argument("run_dir")
    rp.set_defaults(func=cmd_report, out_required=False)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.out_required and not args.out:
        parser.error("--out is required")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"error: config {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
