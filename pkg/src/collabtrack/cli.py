"""Command-line interface.

Subcommands: `pretrain`, `track`, `eval`, `synth`, `dump-filters`. Every
command reads a flat key=value config file (`--config`) with `--set k=v`
overrides; flag values win over file values, file values over defaults.
The environment variable COLLABTRACK_SEED overrides the seed from both.

Exit codes: 0 success, 1 usage or configuration error, 2 data or format
error, 3 numeric failure (NaN in results).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import network, sampling, synth, tracker
from .errors import ConfigError, FormatError, NumericError
from .imagery import load_sequence, write_pgm
from .metrics import evaluate, load_boxes, write_report
from .tracker import TrackerConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

SEED_ENV_VAR = "COLLABTRACK_SEED"

# Every known key with its default (all values are strings until parsed).
DEFAULTS = {
    "seed": "0",
    # tracking
    "mask_delta": "0.018",
    "tau": "0.8",
    "chi": "0.8",
    "update_interval": "5",
    "eigenvectors_per_block": "16",
    "variances": "6,6,0.01,0,0,0",
    "particles": "600",
    "learning_rate": "0.002",
    "momentum": "0.9",
    "gamma": "0.0",
    "eta": "0.001",
    "rho": "0.05",
    "online_epochs": "20",
    "positives_per_frame": "5",
    "negatives_per_finetune": "100",
    "forgetting": "0.95",
    # offline pretraining
    "train_sequences": "",
    "pretrain_epochs_per_layer": "10",
    "pretrain_learning_rate": "0.1",
    "offline_epochs": "30",
    "offline_batch_size": "100",
    "harvest_positives_per_frame": "5",
    "harvest_negatives_per_frame": "5",
    # synthetic data
    "synth_frames": "100",
    "synth_width": "128",
    "synth_height": "96",
    "synth_target_size": "32",
    "synth_speed": "3.0",
    "occluder_fraction": "0.0",
    "occluder_start": "0",
    "occluder_end": "0",
    # paths
    "sequence_dir": "",
    "ground_truth": "",
    "model_file": "model.cdtm",
    "trajectory": "trajectory.csv",
    "report": "report.csv",
    "filters_dir": "filters",
    "init_box": "",
}


def parse_config_file(path) -> dict:
    """Read key=value lines; '#' starts a comment, blank lines ignored."""
    values = {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{p}: line {lineno}: expected key=value")
        key, value = text.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def merge_config(file_values=None, overrides=None) -> dict:
    """Layer defaults, file values and --set overrides; reject unknown keys."""
    cfg = dict(DEFAULTS)
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key: {key}")
            cfg[key] = value
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        cfg["seed"] = env_seed
    return cfg


def _as_int(cfg, key):
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"config key {key}: expected integer, got {cfg[key]!r}") from exc


def _as_float(cfg, key):
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"config key {key}: expected number, got {cfg[key]!r}") from exc


def _as_floats(cfg, key, count):
    parts = [p for p in cfg[key].split(",") if p.strip()]
    if len(parts) != count:
        raise ConfigError(f"config key {key}: expected {count} comma-separated numbers")
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"config key {key}: non-numeric entry") from exc


def _require(cfg, key):
    if not cfg[key]:
        raise ConfigError(f"config key {key} is required for this command")
    return cfg[key]


def tracker_config(cfg) -> TrackerConfig:
    return TrackerConfig(
        mask_delta=_as_float(cfg, "mask_delta"),
        tau=_as_float(cfg, "tau"),
        chi=_as_float(cfg, "chi"),
        update_interval=_as_int(cfg, "update_interval"),
        eigenvectors_per_block=_as_int(cfg, "eigenvectors_per_block"),
        variances=_as_floats(cfg, "variances", 6),
        particle_count=_as_int(cfg, "particles"),
        learning_rate=_as_float(cfg, "learning_rate"),
        momentum=_as_float(cfg, "momentum"),
        gamma=_as_float(cfg, "gamma"),
        eta=_as_float(cfg, "eta"),
        rho=_as_float(cfg, "rho"),
        online_epochs=_as_int(cfg, "online_epochs"),
        positives_per_frame=_as_int(cfg, "positives_per_frame"),
        negatives_per_finetune=_as_int(cfg, "negatives_per_finetune"),
        forgetting=_as_float(cfg, "forgetting"),
        seed=_as_int(cfg, "seed"),
    )


def cmd_pretrain(cfg) -> int:
    """Harvest patches, pretrain the RBM stack, train supervised, save."""
    spec = _require(cfg, "train_sequences")
    sequences = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise ConfigError(
                "train_sequences entries must be sequence_dir:ground_truth_file"
            )
        seq_dir, gt_path = item.rsplit(":", 1)
        frames = load_sequence(seq_dir)
        boxes = load_boxes(gt_path)
        if len(frames) != len(boxes):
            raise FormatError(
                f"{seq_dir}: {len(frames)} frames but {gt_path} has {len(boxes)} boxes"
            )
        sequences.append((frames, boxes))
    if not sequences:
        raise ConfigError("train_sequences lists no sequences")

    rng = np.random.default_rng(_as_int(cfg, "seed"))
    harvest = sampling.harvest_offline(
        sequences,
        rng,
        per_frame_pos=_as_int(cfg, "harvest_positives_per_frame"),
        per_frame_neg=_as_int(cfg, "harvest_negatives_per_frame"),
    )
    if not harvest:
        raise FormatError("harvest produced no training patches")
    inputs = np.array([item.patch for item in harvest])
    labels = np.array([item.label for item in harvest], dtype=np.float64)

    params = network.pretrain_stack(
        inputs,
        epochs_per_layer=_as_int(cfg, "pretrain_epochs_per_layer"),
        learning_rate=_as_float(cfg, "pretrain_learning_rate"),
        momentum=_as_float(cfg, "momentum"),
        rng=rng,
        batch_size=_as_int(cfg, "offline_batch_size"),
    )
    batch = network.TrainBatch(inputs, labels)
    network.train(
        params,
        batch,
        epochs=_as_int(cfg, "offline_epochs"),
        batch_size=_as_int(cfg, "offline_batch_size"),
        learning_rate=_as_float(cfg, "learning_rate"),
        momentum=_as_float(cfg, "momentum"),
        gamma=_as_float(cfg, "gamma"),
        eta=_as_float(cfg, "eta"),
        rho=_as_float(cfg, "rho"),
        rng=rng,
    )
    terms = network.loss(params, batch, _as_float(cfg, "gamma"),
                         _as_float(cfg, "eta"), _as_float(cfg, "rho"))
    if not np.isfinite(terms.total):
        raise NumericError("training loss is not finite")
    predictions = network.score(params, inputs)
    accuracy = float(np.mean((predictions >= 0.5) == (labels >= 0.5)))
    network.save_model(params, cfg["model_file"])
    print(
        f"pretrained on {len(harvest)} patches "
        f"({int(labels.sum())} positive); final loss {terms.total:.6f}, "
        f"training accuracy {accuracy:.4f}; model written to {cfg['model_file']}"
    )
    return EXIT_OK


def _init_box(cfg):
    if cfg["init_box"]:
        box = _as_floats(cfg, "init_box", 4)
    else:
        gt = _require(cfg, "ground_truth")
        first = load_boxes(gt)[0]
        box = (first.x, first.y, first.w, first.h)
    return box


def cmd_track(cfg) -> int:
    """Run the tracker over a sequence and write the trajectory CSV."""
    frames = load_sequence(_require(cfg, "sequence_dir"))
    params = network.load_model(_require(cfg, "model_file"))
    results = tracker.run(frames, _init_box(cfg), params, tracker_config(cfg))
    values = [
        (r.box.x, r.box.y, r.box.w, r.box.h, r.score, r.occlusion_rate)
        for r in results
    ]
    if not np.isfinite(np.asarray(values)).all():
        raise NumericError("trajectory contains non-finite values")
    tracker.write_trajectory(results, cfg["trajectory"])
    finetunes = sum(r.finetuned for r in results)
    mean_rate = float(np.mean([r.occlusion_rate for r in results]))
    print(
        f"tracked {len(results)} frames; {finetunes} fine-tunes; "
        f"mean visible-block rate {mean_rate:.4f}; trajectory written to "
        f"{cfg['trajectory']}"
    )
    return EXIT_OK


def cmd_eval(cfg) -> int:
    """Score a trajectory CSV against a ground-truth file."""
    trajectory = tracker.read_trajectory(_require(cfg, "trajectory"))
    truth = load_boxes(_require(cfg, "ground_truth"))
    if len(trajectory) != len(truth):
        raise FormatError(
            f"row count mismatch: trajectory has {len(trajectory)} rows, "
            f"ground truth has {len(truth)}"
        )
    report = evaluate(trajectory, truth)
    write_report(report, cfg["report"])
    print(
        f"evaluated {report.frame_count} frames: mean center error "
        f"{report.mean_center_error:.4f} px, mean overlap {report.mean_overlap:.4f}; "
        f"report written to {cfg['report']}"
    )
    return EXIT_OK


def cmd_synth(cfg) -> int:
    """Generate a synthetic sequence plus ground truth."""
    out_dir = _require(cfg, "sequence_dir")
    spec = synth.SynthSpec(
        frames=_as_int(cfg, "synth_frames"),
        width=_as_int(cfg, "synth_width"),
        height=_as_int(cfg, "synth_height"),
        target_size=_as_int(cfg, "synth_target_size"),
        speed=_as_float(cfg, "synth_speed"),
        seed=_as_int(cfg, "seed"),
        occluder_fraction=_as_float(cfg, "occluder_fraction"),
        occluder_start=_as_int(cfg, "occluder_start"),
        occluder_end=_as_int(cfg, "occluder_end"),
    )
    boxes = synth.generate_sequence(out_dir, spec)
    print(
        f"wrote {len(boxes)} frames to {out_dir} "
        f"(ground truth: {Path(out_dir) / 'groundtruth.txt'})"
    )
    return EXIT_OK


def cmd_dump_filters(cfg) -> int:
    """Write first-layer weight columns as normalized 32x32 PGM images."""
    params = network.load_model(_require(cfg, "model_file"))
    weights = params.layers[0].weights
    side = int(round(weights.shape[0] ** 0.5))
    if side * side != weights.shape[0]:
        raise FormatError(
            f"first layer input size {weights.shape[0]} is not a square image"
        )
    out_dir = Path(cfg["filters_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    for j in range(weights.shape[1]):
        column = weights[:, j]
        lo, hi = float(column.min()), float(column.max())
        if hi - lo < 1e-300:
            image = np.full((side, side), 128, dtype=np.uint8)
        else:
            image = np.rint((column - lo) / (hi - lo) * 255).astype(np.uint8)
            image = image.reshape(side, side)
        write_pgm(out_dir / f"filter_{j:03d}.pgm", image)
    print(f"wrote {weights.shape[1]} filter images to {out_dir}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; remap to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_COMMANDS = {
    "pretrain": cmd_pretrain,
    "track": cmd_track,
    "eval": cmd_eval,
    "synth": cmd_synth,
    "dump-filters": cmd_dump_filters,
}


def main(argv=None) -> int:
    parser = _Parser(prog="collabtrack", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in _COMMANDS.items():
        p = sub.add_parser(name, help=func.__doc__)
        p.add_argument("--config", help="key=value config file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one config key (repeatable)",
        )
    args = parser.parse_args(argv)

    try:
        file_values = parse_config_file(args.config) if args.config else {}
        overrides = {}
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            overrides[key.strip()] = value.strip()
        cfg = merge_config(file_values, overrides)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def entry():  # console-script wrapper
    sys.exit(main())


if __name__ == "__main__":
    entry()
