"""``segalign`` command line: synth, train, decode and eval."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import jsonschema

from . import __version__
from .core import (LabelVocabulary, Segment, Segmentation, read_segmentations, read_sparse_labels,
                   read_transcript_names, read_transcripts, write_segmentations, write_sparse_labels,
                   write_transcripts)
from .data import SyntheticSpec, generate_corpus, read_feature_dir, sample_sparse_labels, write_feature_dir
from .decoder import DecodeResult
from .lengthprior import PriorKind
from .metrics import evaluate
from .model import SegmentationModel, atomic_write_text, dump_json
from .training import TrainConfig, VideoData, _parallel_map, train

log = logging.getLogger("segalign")

PRIOR_CHOICES = [k.value for k in PriorKind]

TRAIN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "frames_per_subaction": {"type": "integer", "minimum": 1},
        "scorer": {"enum": ["gaussian", "feedforward", "recurrent", "gmm", "mlp", "gru"]},
        "length_prior": {"enum": PRIOR_CHOICES},
        "max_iterations": {"type": "integer", "minimum": 1},
        "stop_threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "supervision": {"enum": ["weak", "sparse", "full"]},
        "reestimate": {"type": "boolean"},
        "seed": {"type": "integer"},
        "hidden": {"type": "integer", "minimum": 1},
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "batch_size": {"type": "integer", "minimum": 1},
        "epochs": {"type": "integer", "minimum": 1},
        "chunk": {"type": "integer", "minimum": 1},
        "variance_floor": {"type": "number", "exclusiveMinimum": 0},
        "jobs": {"type": "integer", "minimum": 1},
    },
}

SYNTH_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "num_actions": {"type": "integer", "minimum": 1},
        "states_per_action": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "templates": {"type": "array", "minItems": 1,
                      "items": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 0}}},
        "num_videos": {"type": "integer", "minimum": 1},
        "dim": {"type": "integer", "minimum": 1},
        "mean_duration": {"oneOf": [{"type": "number", "minimum": 1},
                                    {"type": "array", "items": {"type": "number", "minimum": 1}}]},
        "mean_scale": {"type": "number", "minimum": 0},
        "noise_scale": {"type": "number", "minimum": 0},
        "seed": {"type": "integer"},
        "means": {"type": "array"},
        "variances": {"type": "array"},
        "action_names": {"type": "array", "items": {"type": "string", "pattern": r"^\S+$"}},
    },
}


class CliError(Exception):
    pass


def _load_json(path: str, schema: dict, what: str) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{what} is not valid JSON: {exc}") from None
    try:
        jsonschema.validate(obj, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise CliError(f"{what} schema violation at {where}: {exc.message}") from None
    return obj


def _env_seed(default: int) -> int:
    value = os.environ.get("SEGALIGN_SEED")
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        raise CliError(f"SEGALIGN_SEED must be an integer, got {value!r}") from None


def _require(path: str | None, what: str) -> Path:
    if path is None:
        raise CliError(f"missing {what}")
    p = Path(path)
    if not p.exists():
        raise CliError(f"{what} not found: {p}")
    return p


def _run_record(command: str, args: argparse.Namespace, **resolved) -> dict:
    argv = {k: v for k, v in vars(args).items() if k != "func"}
    return {"command": command, "version": __version__, "arguments": argv, **resolved}


# ---------------------------------------------------------------------------
# synth

def cmd_synth(args) -> int:
    raw = _load_json(args.spec, SYNTH_SCHEMA, "synthetic spec") if args.spec else {}
    spec = SyntheticSpec(**raw)
    spec.seed = _env_seed(spec.seed)
    try:
        corpus = generate_corpus(spec)
    except ValueError as exc:
        raise CliError(f"invalid synthetic spec: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_feature_dir(out / "features", corpus.features)
    write_transcripts(out / "transcripts.txt", corpus.transcripts.values(), corpus.labels)
    write_segmentations(out / "groundtruth.txt", corpus.segmentations.values(), corpus.labels)
    if args.label_fraction is not None:
        labels = sample_sparse_labels(corpus.segmentations, args.label_fraction, spec.seed)
        write_sparse_labels(out / "sparse_labels.txt", labels, corpus.labels)
    atomic_write_text(out / "run.json", dump_json(_run_record("synth", args, spec=asdict(spec))))
    print(f"wrote {len(corpus.features)} videos to {out}")
    return 0


# ---------------------------------------------------------------------------
# train

def _load_training_data(args):
    feats = read_feature_dir(_require(args.features, "--features directory"))
    names = read_transcript_names(_require(args.transcripts, "--transcripts file"))
    label_names = {n for v in names.values() for n in v}
    gt_path = args.ground_truth or args.report_ground_truth
    if gt_path:
        for line in _require(gt_path, "ground-truth file").read_text().splitlines():
            if line.strip():
                label_names.add(line.split("\t")[1])
    labels = LabelVocabulary.from_names(label_names)
    transcripts = read_transcripts(args.transcripts, labels)
    missing = sorted(set(transcripts) - set(feats))
    if missing:
        raise CliError(f"no features for videos: {', '.join(missing[:5])}")
    sparse = read_sparse_labels(_require(args.sparse_labels, "--sparse-labels file"), labels) \
        if args.sparse_labels else {}
    truth = read_segmentations(gt_path, labels) if gt_path else {}
    videos = [VideoData(vid, feats[vid].data, tr, sparse.get(vid), truth.get(vid))
              for vid, tr in transcripts.items()]
    return videos, labels


def cmd_train(args) -> int:
    raw = _load_json(args.config, TRAIN_SCHEMA, "train config") if args.config else {}
    if args.length_prior is not None:
        raw["length_prior"] = args.length_prior
    if args.jobs is not None:
        raw["jobs"] = args.jobs
    raw.setdefault("jobs", os.cpu_count() or 1)
    raw["seed"] = _env_seed(raw.get("seed", 0))
    config = TrainConfig(**raw)
    if config.supervision == "sparse" and not args.sparse_labels:
        raise CliError("supervision 'sparse' needs --sparse-labels")
    if config.supervision == "full" and not args.ground_truth:
        raise CliError("supervision 'full' needs --ground-truth")
    videos, labels = _load_training_data(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "run.json", dump_json(_run_record("train", args, config=config.to_dict())))

    def on_iteration(report, model):
        atomic_write_text(out / f"report_{report.iteration:02d}.json", dump_json(report.to_dict()))
        model.save(out / f"checkpoint_{report.iteration:02d}.json")

    result = train(config, videos, labels, callback=on_iteration)
    result.model.save(out / "model.json")
    summary = {
        "iterations": len(result.reports),
        "initial_mof": result.initial_mof,
        "final_mof": result.final_mof,
        "reports": [r.to_dict() for r in result.reports],
    }
    atomic_write_text(out / "reports.json", dump_json(summary))
    atomic_write_text(out / "timing.json", dump_json([{"iteration": r.iteration, "wall_time": r.wall_time}
                                                      for r in result.reports]))
    print(f"trained {len(result.reports)} iteration(s); model written to {out / 'model.json'}")
    return 0


# ---------------------------------------------------------------------------
# decode

def _decode_one(job):
    model, vid, x, transcript = job
    return model.decode(x, transcript, video_id=vid)


def result_to_json(res: DecodeResult, labels: LabelVocabulary) -> dict:
    al = res.alignment
    starts, ends = al.run_bounds()
    return {
        "log_score": res.log_score,
        "segmentation": [[labels.name(s.action), s.start, s.end] for s in res.segmentation.segments],
        "alignment": [[labels.name(int(al.actions[s])), int(al.substates[s]), int(al.instances[s]), int(s), int(e)]
                      for s, e in zip(starts, ends)],
    }


def cmd_decode(args) -> int:
    model = SegmentationModel.load(_require(args.model, "--model checkpoint"))
    if args.length_prior is not None:
        model.prior = PriorKind.parse(args.length_prior)
    feats = read_feature_dir(_require(args.features, "--features directory"))
    transcripts = {}
    if args.mode == "align":
        transcripts = read_transcripts(_require(args.transcripts, "--transcripts file"), model.labels)
        missing = sorted(set(feats) - set(transcripts))
        if missing:
            raise CliError(f"align mode: no transcript for videos {', '.join(missing[:5])}")
    jobs = [(model, vid, seq.data, transcripts.get(vid)) for vid, seq in feats.items()]
    results = _parallel_map(_decode_one, jobs, args.jobs or os.cpu_count() or 1)
    out = {"mode": args.mode, "length_prior": model.prior.value,
           "videos": {vid: result_to_json(r, model.labels) for (_, vid, _, _), r in zip(jobs, results)}}
    atomic_write_text(args.out, dump_json(out))
    out_path = Path(args.out)
    atomic_write_text(out_path.with_name(out_path.stem + ".run.json"),
                      dump_json(_run_record("decode", args, length_prior=model.prior.value)))
    print(f"decoded {len(results)} video(s) to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# eval

def read_predictions(path: str | Path, labels: LabelVocabulary) -> dict[str, Segmentation]:
    obj = json.loads(Path(path).read_text())
    try:
        videos = obj["videos"]
        return {vid: Segmentation(vid, tuple(Segment(labels.id(n), int(s), int(e)) for n, s, e in v["segmentation"]))
                for vid, v in videos.items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"malformed prediction file {path}: {exc}") from None


def cmd_eval(args) -> int:
    gt_path = _require(args.gt, "--gt file")
    pred_obj = json.loads(_require(args.pred, "--pred file").read_text())
    names = {n for line in gt_path.read_text().splitlines() if line.strip() for n in [line.split("\t")[1]]}
    names |= {s[0] for v in pred_obj.get("videos", {}).values() for s in v.get("segmentation", [])}
    labels = LabelVocabulary.from_names(names)
    gt = read_segmentations(gt_path, labels)
    pred = read_predictions(args.pred, labels)
    missing = sorted(set(pred) - set(gt))
    if missing:
        raise CliError(f"no ground truth for videos {', '.join(missing[:5])}")
    vids = sorted(pred)
    P, G = [pred[v] for v in vids], [gt[v] for v in vids]
    report = evaluate(P, G, labels.names)
    result = {"videos": report.videos, "jaccard_matching": report.matching}
    if args.metric in ("mof", "all"):
        result["mof"] = report.mof
    if args.metric in ("iod", "all"):
        result["iod"] = report.iod
    if args.metric in ("iou", "all"):
        result["iou"] = report.iou
    if args.metric == "all":
        result["per_class_accuracy"] = report.per_class_accuracy
    rows = [(k, result[k]) for k in ("mof", "iod", "iou") if k in result]
    print(f"{'metric':<8}{'value':>10}")
    for k, v in rows:
        print(f"{k:<8}{v:>10.4f}")
    print(f"({report.videos} videos, jaccard matching: {report.matching})")
    if args.out:
        atomic_write_text(args.out, dump_json(result))
        out_path = Path(args.out)
        atomic_write_text(out_path.with_name(out_path.stem + ".run.json"), dump_json(_run_record("eval", args)))
    else:
        print(json.dumps(result, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segalign", description=__doc__)
    parser.add_argument("--version", action="version", version=f"segalign {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--spec", help="JSON generator spec (defaults used when omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--label-fraction", type=float, help="also sample this fraction of frames as sparse labels")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model from transcripts")
    p.add_argument("--config", help="JSON training config")
    p.add_argument("--features", required=True, help="feature directory with manifest.tsv")
    p.add_argument("--transcripts", required=True, help="transcript file")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--sparse-labels", help="sparse frame labels (sparse supervision)")
    g.add_argument("--ground-truth", help="ground-truth segmentation (full supervision)")
    p.add_argument("--report-ground-truth", help="ground truth used only to report training MoF")
    p.add_argument("--length-prior", choices=PRIOR_CHOICES, help="override the config's length prior")
    p.add_argument("--jobs", type=int, help="worker processes for realignment")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="segment or align videos with a trained model")
    p.add_argument("--mode", choices=["segment", "align"], default="segment",
                   help="segment: grammar of training transcripts; align: given transcripts")
    p.add_argument("--length-prior", choices=PRIOR_CHOICES, help="override the checkpoint's length prior")
    p.add_argument("--model", required=True, help="checkpoint written by train")
    p.add_argument("--features", required=True, help="feature directory with manifest.tsv")
    p.add_argument("--transcripts", help="transcript file (required for align mode)")
    p.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    p.add_argument("--out", required=True, help="output JSON file")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True, help="JSON written by decode")
    p.add_argument("--gt", required=True, help="ground-truth segmentation file")
    p.add_argument("--metric", choices=["mof", "iod", "iou", "all"], default="all", help="metric to report")
    p.add_argument("--out", help="write the JSON result here instead of stdout")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError, OSError) as exc:
        err = {"error": type(exc).__name__, "command": args.command, "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
