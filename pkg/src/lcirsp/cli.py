"""The lcirsp command line: batch orchestration of the whole pipeline.

Subcommands: ingest, synth, label, features, correlate, train-ir, train-sp,
experiment-ir, experiment-sp, eval, describe. A JSON config file can supply
defaults; explicit flags win. All randomness derives from --seed.

Exit codes: 0 success, 1 assertion-threshold failure (--assert-accuracy),
2 usage or I/O errors.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys

import numpy as np

from . import evaluation, storage
from .errors import LcirspError
from .features import build_ir_dataset, build_sp_dataset, build_feature_index
from .kinematics import INDICATOR_NAMES
from .labeling import LaneGeometry, detect_lc_events, extract_windows
from .models import (
    INDEPENDENT_TASKS_DEFAULT,
    RELATED_TASKS_DEFAULT,
    Model,
    ModelSpec,
    TaskSet,
)
from .nn_core import TcnConfig
from .synth import GroundTruth, ScenarioConfig, corpus_stats, generate_corpus
from .training import TrainConfig, evaluate_classifier, predict_classifier, \
    predict_regressor, task_targets, train_ir, train_sp
from .trajectory_io import (
    clean_trajectories,
    parse_trajectories,
    write_trajectories_csv,
)

log = logging.getLogger("lcirsp")

SWEEP_LENGTHS = tuple(range(30, 151, 15))
MODEL_CHOICES = ("lstm", "tcn", "tcn-lstm")


def _model_kind(name):
    return name.replace("-", "_")


def _load_corpus(input_path, schema=None, frame_rate=30.0):
    if os.path.isdir(input_path):
        files = sorted(glob.glob(os.path.join(input_path, "*.csv")))
    else:
        files = [input_path]
    if not files:
        raise LcirspError(f"no CSV files under {input_path}")
    trajectories = []
    for path in files:
        with open(path, "rb") as fh:
            trajectories.extend(parse_trajectories(fh, schema, frame_rate))
    return trajectories


def _load_clean_corpus(args):
    schema = json.loads(args.schema) if getattr(args, "schema", None) else None
    trajs = _load_corpus(args.input, schema, args.frame_rate)
    cleaned, dropped = clean_trajectories(
        trajs, split_segments=getattr(args, "split_segments", False)
    )
    if dropped:
        log.info("dropped %d gapped trajectories", len(dropped))
    return cleaned


def _vehicle_width(args):
    if args.vehicle_width is not None:
        return args.vehicle_width
    gt_path = getattr(args, "ground_truth", None)
    if gt_path and os.path.exists(gt_path):
        return GroundTruth.load(gt_path).vehicle_width
    return None


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args):
    settle = None
    if args.settle_depth:
        lo, hi = (float(v) for v in args.settle_depth.split(","))
        settle = (lo, hi)
    cfg = ScenarioConfig(
        n_lanes=args.lanes, lane_width=args.lane_width,
        n_lk=args.n_lk, n_llc=args.n_llc, n_rlc=args.n_rlc,
        speed_range=(args.speed_min, args.speed_max),
        lc_duration=args.lc_duration, noise_std=args.noise, seed=args.seed,
        settle_depth=settle, entry_stagger=args.entry_stagger,
    )
    trajectories, geometry, gt = generate_corpus(cfg)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "trajectories.csv"), "w", newline="") as fh:
        write_trajectories_csv(trajectories, fh)
    geometry.save(os.path.join(args.out, "lanes.json"))
    gt.save(os.path.join(args.out, "ground_truth.json"))
    stats = corpus_stats(trajectories, gt)
    print(json.dumps(stats, indent=1, sort_keys=True))
    return 0


def cmd_ingest(args):
    schema = json.loads(args.schema) if args.schema else None
    trajs = _load_corpus(args.input, schema, args.frame_rate)
    cleaned, dropped = clean_trajectories(trajs, split_segments=args.split_segments)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "cleaned.csv"), "w", newline="") as fh:
        write_trajectories_csv(cleaned, fh, schema)
    for tid in dropped:
        print(f"dropped track {tid}: frame gap > 1")
    print(f"kept {len(cleaned)} trajectories, dropped {len(dropped)}")
    return 0


def cmd_label(args):
    cleaned = _load_clean_corpus(args)
    geometry = LaneGeometry.load(args.lanes)
    width = _vehicle_width(args)
    index, kept = build_feature_index(cleaned, geometry)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    n_windows = 0
    with open(args.out, "w") as fh:
        fh.write("track_id,start_frame,end_frame,label\n")
        for traj in kept:
            events = detect_lc_events(traj, geometry, width)
            frames = index.indicator_frames[traj.track_id]
            if len(frames) < args.length:
                continue
            for start, end, label in extract_windows(frames, events, args.length, args.stride):
                fh.write(f"{traj.track_id},{start},{end},{label}\n")
                n_windows += 1
    print(f"wrote {n_windows} labeled windows to {args.out}")
    return 0


def cmd_features(args):
    cleaned = _load_clean_corpus(args)
    geometry = LaneGeometry.load(args.lanes)
    width = _vehicle_width(args)
    if args.sp:
        ds = build_sp_dataset(
            cleaned, geometry, args.length, args.stride, args.seed,
            split_ratio=args.split_ratio, split_unit=args.split_unit,
            vehicle_width=width,
            n_bins=1 if args.single_bin_60 else 2,
            bin_frames=60 if args.single_bin_60 else 30,
        )
        storage.save_sp_dataset(args.out, ds)
        print(f"sp dataset: {len(ds.train_x)} train / {len(ds.test_x)} test windows")
    else:
        ds = build_ir_dataset(
            cleaned, geometry, args.length, args.stride, args.seed,
            split_ratio=args.split_ratio, split_unit=args.split_unit,
            lk_count=args.lk_count, vehicle_width=width,
        )
        storage.save_ir_dataset(args.out, ds)
        print(f"ir dataset: {len(ds.train_x)} train / {len(ds.test_x)} test windows")
    if args.export_csv:
        arrays, _ = storage.load_dataset(args.out)
        storage.export_dataset_csv(args.out + ".csv", arrays)
    return 0


def cmd_correlate(args):
    cleaned = _load_clean_corpus(args)
    geometry = LaneGeometry.load(args.lanes)
    width = _vehicle_width(args)
    index, kept = build_feature_index(cleaned, geometry)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((args.seed, 0xC0))))
    series = {name: [] for name in INDICATOR_NAMES}
    for traj in kept:
        events = detect_lc_events(traj, geometry, width)
        frames = index.indicator_frames[traj.track_id]
        values = index.indicator_values[traj.track_id]
        if events:
            # intention-interval samples of lane changers
            mask = np.zeros(len(frames), dtype=bool)
            for ev in events:
                mask |= (frames >= ev.intention_start_frame) & (frames <= ev.lc_start_frame)
        else:
            # random sample of lane-keeping frames to balance volumes
            mask = np.zeros(len(frames), dtype=bool)
            take = min(args.lk_samples, len(frames))
            mask[rng.choice(len(frames), size=take, replace=False)] = True
        for k, name in enumerate(INDICATOR_NAMES):
            series[name].append(values[mask, k])
    series = {name: np.concatenate(chunks) for name, chunks in series.items()}
    names, mat = evaluation.correlation_matrix(series)
    tasks = evaluation.correlation_grouping(mat, args.threshold, names)
    os.makedirs(args.out, exist_ok=True)
    doc = {
        "names": list(names),
        "matrix": [[float(v) for v in row] for row in mat],
        "threshold": args.threshold,
        "related": list(tasks.related),
        "independent": list(tasks.independent),
    }
    with open(os.path.join(args.out, "correlation.json"), "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    evaluation.emit_report([], args.out, correlation=(names, mat))
    print(f"related: {', '.join(tasks.related) or '-'}")
    print(f"independent: {', '.join(tasks.independent) or '-'}")
    return 0


def _train_config(args, optimizer):
    return TrainConfig(
        epochs=args.epochs, batch_size=args.batch, optimizer=optimizer,
        learning_rate=args.lr, seed=args.seed, dropout=args.dropout,
        target_accuracy=getattr(args, "target_accuracy", None),
    )


def _ir_spec(args, kind, length):
    return ModelSpec(
        kind=_model_kind(kind), head="classifier", window_length=length,
        tcn=TcnConfig(dropout=args.dropout), seed=args.seed,
    )


def cmd_train_ir(args):
    ds = storage.load_ir_dataset(args.data)
    length = ds.train_x.shape[1]
    if args.length is not None and args.length != length:
        raise LcirspError(
            f"--length {args.length} does not match the dataset's window length {length}"
        )
    spec = _ir_spec(args, args.model, length)
    model = Model(spec)
    model, history = train_ir(model, ds, _train_config(args, "rmsprop"))
    storage.save_checkpoint(args.out, model)
    if args.history:
        with open(args.history, "w") as fh:
            history.write_csv(fh)
    loss, acc = evaluate_classifier(model, ds.test_x, ds.test_y)
    print(f"test loss {loss:.4f} accuracy {acc:.4f}")
    return 0


def cmd_train_sp(args):
    ds = storage.load_sp_dataset(args.data)
    length = ds.train_x.shape[1]
    if args.length is not None and args.length != length:
        raise LcirspError(
            f"--length {args.length} does not match the dataset's window length {length}"
        )
    tasks = tuple(args.tasks.split(",")) if args.tasks else RELATED_TASKS_DEFAULT
    spec = ModelSpec(
        kind=_model_kind(args.model), head="regressor", tasks=tasks,
        mtl=args.mtl or len(tasks) > 1, window_length=length,
        horizon_steps=ds.train_t.shape[1],
        tcn=TcnConfig(dropout=args.dropout), seed=args.seed,
    )
    model = Model(spec)
    model, history = train_sp(model, ds, _train_config(args, "adam"))
    storage.save_checkpoint(args.out, model)
    if args.history:
        with open(args.history, "w") as fh:
            history.write_csv(fh)
    print(f"final train loss {history.train_loss[-1]:.5f} "
          f"test loss {history.test_loss[-1]:.5f}")
    return 0


def _regression_report(name, model, ds):
    rep = evaluation.RegressionReport(model=name)
    if len(ds.test_x) == 0:
        log.warning("empty test split for %s; metrics reported as nan", name)
        for task in model.spec.tasks:
            rep.task_mae[task] = float("nan")
            rep.task_rmse[task] = float("nan")
        return rep
    preds = predict_regressor(model, ds.test_x)
    targets = task_targets(ds.test_t, model.spec.tasks)
    idx = {t: INDICATOR_NAMES.index(t) for t in model.spec.tasks}
    for task in model.spec.tasks:
        # back to physical units through the target scaler
        span = ds.target_scaler.maxima[idx[task]] - ds.target_scaler.minima[idx[task]]
        mae, rmse = evaluation.regression_metrics(
            preds[task] * span, targets[task] * span
        )
        rep.task_mae[task] = mae
        rep.task_rmse[task] = rmse
    return rep


def _formats(args):
    fmt = getattr(args, "format", "both")
    return ("json", "csv") if fmt == "both" else (fmt,)


def cmd_experiment_ir(args):
    cleaned = _load_clean_corpus(args)
    geometry = LaneGeometry.load(args.lanes)
    width = _vehicle_width(args)
    lengths = [int(s) for s in args.lengths.split(",")] if args.lengths else list(SWEEP_LENGTHS)
    model_names = args.models.split(",") if args.models else list(MODEL_CHOICES)
    os.makedirs(args.out, exist_ok=True)

    def run_cell(name, length, ds):
        spec = _ir_spec(args, name, length)
        model = Model(spec)
        model, _ = train_ir(model, ds, _train_config(args, "rmsprop"))
        probs = predict_classifier(model, ds.test_x)
        cm = evaluation.ConfusionMatrix.from_predictions(ds.test_y, probs.argmax(axis=1))
        return evaluation.ClassificationReport(name, length, cm), model

    accuracy_curves = {name: [] for name in model_names}
    reports = []
    worst = 1.0
    for length in lengths:
        ds = build_ir_dataset(
            cleaned, geometry, length, args.stride, args.seed,
            split_ratio=args.split_ratio, split_unit=args.split_unit,
            lk_count=args.lk_count, vehicle_width=width,
        )
        if len(ds.train_x) == 0 or len(ds.test_x) == 0:
            raise LcirspError(
                f"empty {'train' if len(ds.train_x) == 0 else 'test'} split at "
                f"length {length}; add trajectories or use --split-unit window"
            )
        if args.jobs > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                cells = list(pool.map(lambda n: run_cell(n, length, ds), model_names))
        else:
            cells = [run_cell(name, length, ds) for name in model_names]
        # report assembly stays serialized and in fixed model order
        for name, (rep, model) in zip(model_names, cells):
            acc = rep.metrics()["accuracy"]
            worst = min(worst, acc)
            accuracy_curves[name].append((length, acc))
            reports.append(rep)
            # flush the finished cell so partial sweeps are inspectable
            cell = os.path.join(args.out, f"cell_{name}_L{length}.json")
            with open(cell, "w") as fh:
                json.dump(rep.metrics(), fh, indent=1, sort_keys=True)
                fh.write("\n")
            if args.save_checkpoints:
                storage.save_checkpoint(
                    os.path.join(args.out, f"model_{name}_L{length}.ckpt"), model
                )
            print(f"[{name} L={length}] accuracy {acc:.4f}")
    evaluation.emit_report(reports, args.out, accuracy_by_length=accuracy_curves,
                           formats=_formats(args))
    if args.assert_accuracy is not None and worst < args.assert_accuracy:
        print(f"accuracy {worst:.4f} below threshold {args.assert_accuracy}")
        return 1
    return 0


def cmd_experiment_sp(args):
    cleaned = _load_clean_corpus(args)
    geometry = LaneGeometry.load(args.lanes)
    width = _vehicle_width(args)
    ds = build_sp_dataset(
        cleaned, geometry, args.length, args.stride, args.seed,
        split_ratio=args.split_ratio, split_unit=args.split_unit,
        vehicle_width=width,
        n_bins=1 if args.single_bin_60 else 2,
        bin_frames=60 if args.single_bin_60 else 30,
    )
    if len(ds.train_x) == 0:
        raise LcirspError("no labeled lane-change windows with a full horizon; "
                          "check lane geometry and --length/--stride")
    model_names = args.models.split(",") if args.models else list(MODEL_CHOICES)
    if args.tasks:
        related = tuple(args.tasks.split(","))
        independent = tuple(t for t in INDICATOR_NAMES if t not in related)
        tasks = TaskSet(related=related, independent=independent)
    else:
        tasks = TaskSet(RELATED_TASKS_DEFAULT, INDEPENDENT_TASKS_DEFAULT)
    os.makedirs(args.out, exist_ok=True)
    config = _train_config(args, "adam")

    all_tasks = tasks.related + tasks.independent
    jobs = []
    for name in model_names:
        for task in all_tasks:
            jobs.append((name, (task,), False))
        jobs.append((name, tasks.related, True))

    def run_job(job):
        name, job_tasks, is_mtl = job
        spec = ModelSpec(
            kind=_model_kind(name), head="regressor", tasks=job_tasks,
            mtl=is_mtl, window_length=args.length,
            horizon_steps=ds.train_t.shape[1],
            tcn=TcnConfig(dropout=args.dropout), seed=args.seed,
        )
        model, _ = train_sp(Model(spec), ds, config)
        label = f"mtl-{name}" if is_mtl else name
        rep = _regression_report(label, model, ds)
        print(f"[{label}/{','.join(job_tasks)}] done")
        return rep

    if args.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(run_job, jobs))
    else:
        reports = [run_job(job) for job in jobs]

    # merge single-task rows of one model into one report
    merged = {}
    for rep in reports:
        tgt = merged.setdefault(
            rep.model, evaluation.RegressionReport(model=rep.model)
        )
        tgt.task_mae.update(rep.task_mae)
        tgt.task_rmse.update(rep.task_rmse)
    evaluation.emit_report(list(merged.values()), args.out, formats=_formats(args))
    return 0


def cmd_eval(args):
    model = storage.load_checkpoint(args.checkpoint)
    os.makedirs(args.out, exist_ok=True)
    if model.spec.head == "classifier":
        ds = storage.load_ir_dataset(args.data)
        probs = predict_classifier(model, ds.test_x)
        cm = evaluation.ConfusionMatrix.from_predictions(ds.test_y, probs.argmax(axis=1))
        rep = evaluation.ClassificationReport(model.spec.kind, model.spec.window_length, cm)
        evaluation.emit_report([rep], args.out, formats=_formats(args))
        print(json.dumps(rep.metrics(), indent=1, sort_keys=True))
    else:
        ds = storage.load_sp_dataset(args.data)
        rep = _regression_report(model.spec.kind, model, ds)
        evaluation.emit_report([rep], args.out, formats=_formats(args))
        print(json.dumps(rep.metrics(), indent=1, sort_keys=True))
    return 0


def cmd_describe(args):
    model = storage.load_checkpoint(args.model)
    print(model.describe())
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_common_io(p, lanes=True):
    p.add_argument("--input", required=True, help="trajectory CSV file or directory")
    if lanes:
        p.add_argument("--lanes", required=True, help="lane geometry JSON")
    p.add_argument("--schema", help="JSON column-name mapping override")
    p.add_argument("--frame-rate", type=float, default=30.0)
    p.add_argument("--split-segments", action="store_true",
                   help="split gapped tracks instead of dropping them")
    p.add_argument("--vehicle-width", type=float, default=None)
    p.add_argument("--ground-truth",
                   help="ground_truth.json (supplies vehicle width for synth corpora)")


def _add_window_args(p):
    p.add_argument("--length", type=int, default=150)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-ratio", type=float, default=0.8)
    p.add_argument("--split-unit", choices=("trajectory", "window"), default="trajectory")


def _add_train_args(p, seed=True):
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--dropout", type=float, default=0.3)
    if seed:
        p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lcirsp",
        description="lane-change intention recognition and status prediction",
    )
    parser.add_argument("--config", help="JSON file with default argument values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--lanes", type=int, default=4)
    p.add_argument("--lane-width", type=float, default=12.0)
    p.add_argument("--n-lk", type=int, default=20)
    p.add_argument("--n-llc", type=int, default=10)
    p.add_argument("--n-rlc", type=int, default=10)
    p.add_argument("--speed-min", type=float, default=40.0)
    p.add_argument("--speed-max", type=float, default=80.0)
    p.add_argument("--lc-duration", type=float, default=5.0)
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--settle-depth",
                   help="MIN,MAX feet past the boundary to settle (default: "
                        "target lane center); puts the boundary touch near "
                        "the lateral-velocity peak")
    p.add_argument("--entry-stagger", type=int, default=600,
                   help="max random entry frame")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse, gap-filter and smooth CSVs")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--schema")
    p.add_argument("--frame-rate", type=float, default=30.0)
    p.add_argument("--split-segments", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("label", help="write a labeled-window manifest CSV")
    _add_common_io(p)
    p.add_argument("--out", required=True)
    p.add_argument("--length", type=int, default=150)
    p.add_argument("--stride", type=int, default=1)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("features", help="build a dataset container")
    _add_common_io(p)
    _add_window_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--sp", action="store_true", help="status-prediction dataset")
    p.add_argument("--single-bin-60", action="store_true",
                   help="one 60-frame target bin instead of two 30-frame bins")
    p.add_argument("--lk-count", type=int, default=None)
    p.add_argument("--export-csv", action="store_true")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("correlate", help="Pearson matrix and task grouping")
    _add_common_io(p)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--lk-samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("train-ir", help="train an intention classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=MODEL_CHOICES, default="tcn-lstm")
    p.add_argument("--length", type=int, default=None,
                   help="expected window length (validated against the dataset)")
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    _add_train_args(p)
    p.set_defaults(func=cmd_train_ir)

    p = sub.add_parser("train-sp", help="train a status regressor")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=MODEL_CHOICES, default="lstm")
    p.add_argument("--mtl", action="store_true")
    p.add_argument("--tasks", help="comma list, e.g. vx,vy,ay,theta,dtheta")
    p.add_argument("--length", type=int, default=None,
                   help="expected window length (validated against the dataset)")
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    _add_train_args(p)
    p.set_defaults(func=cmd_train_sp)

    p = sub.add_parser("experiment-ir", help="window-length x model sweep")
    _add_common_io(p)
    _add_window_args(p)
    _add_train_args(p, seed=False)
    p.add_argument("--out", required=True)
    p.add_argument("--lengths", help="comma list (default 30..150 step 15)")
    p.add_argument("--models", help="comma list of lstm,tcn,tcn-lstm")
    p.add_argument("--lk-count", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1,
                   help="worker threads for sweep cells within a window length")
    p.add_argument("--target-accuracy", type=float, default=None,
                   help="stop a cell's training once test accuracy reaches this")
    p.add_argument("--assert-accuracy", type=float, default=None,
                   help="exit 1 if any cell is below this accuracy")
    p.add_argument("--save-checkpoints", action="store_true")
    p.add_argument("--format", choices=("json", "csv", "both"), default="both")
    p.set_defaults(func=cmd_experiment_ir)

    p = sub.add_parser("experiment-sp", help="single-task vs MTL comparison")
    _add_common_io(p)
    _add_window_args(p)
    _add_train_args(p, seed=False)
    p.add_argument("--out", required=True)
    p.add_argument("--models", help="comma list of lstm,tcn,tcn-lstm")
    p.add_argument("--tasks", help="comma list of related tasks")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker threads for the single-task trainings")
    p.add_argument("--single-bin-60", action="store_true")
    p.add_argument("--format", choices=("json", "csv", "both"), default="both")
    p.set_defaults(func=cmd_experiment_sp)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("json", "csv", "both"), default="both")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("describe", help="print a checkpoint's architecture")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_describe)

    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # config-file defaults: parse once to find --config, then re-parse
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        try:
            with open(cfg_path) as fh:
                defaults = json.load(fh)
        except OSError as exc:
            print(f"error: cannot read config {cfg_path}: {exc}", file=sys.stderr)
            return 2
        for action in parser._subparsers._group_actions[0].choices.values():
            action.set_defaults(**{
                k.replace("-", "_"): v for k, v in defaults.items()
            })
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (LcirspError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
