"""Command-line interface: synth / train / eval / infer / bench / inspect.

Every subcommand accepts --config FILE with `key = value` lines (keys are
the long flag names, dashes or underscores); explicit flags win over file
values which win over built-in defaults. The effective configuration is
echoed (and written next to other outputs when --out is given) so every run
is reproducible from its own logs. Commands write only under their --out.

numpy and the kernel backends are imported inside the command handlers so
that --threads can pin BLAS thread counts before any library loads.
"""

import argparse
import json
import os
import sys
from pathlib import Path

_THREAD_VARS = (
    "OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS", "NUMEXPR_NUM_THREADS",
)


def _apply_threads(n):
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def _add_common(p):
    p.add_argument("--config", help="key=value file supplying defaults for this subcommand")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--threads", type=int, default=1,
                   help="BLAS/OpenMP thread count (default 1 for reproducibility)")
    p.add_argument("--backend", choices=("auto", "c", "numpy"), default="auto",
                   help="kernel backend (default auto: compiled if available)")
    p.add_argument("--json", action="store_true", help="machine-readable stdout")


def _add_model_args(p):
    p.add_argument("--window-len", type=int, default=60)
    p.add_argument("--heads", type=int, default=16)
    p.add_argument("--layers", type=int, default=16)
    p.add_argument("--ff-dim", type=int, default=None,
                   help="feed-forward width (default 4x embedding dim)")
    p.add_argument("--dropout", type=float, default=0.0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tseg", description="Per-second intro/credits detection on frame embeddings.")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-series", type=int, default=8)
    p.add_argument("--episodes-per-series", type=int, default=6)
    p.add_argument("--len-range", type=int, nargs=2, default=[120, 300],
                   metavar=("LO", "HI"), help="episode length bounds in seconds")
    p.add_argument("--intro-len-range", type=int, nargs=2, default=[15, 60],
                   metavar=("LO", "HI"))
    p.add_argument("--scene-len-range", type=int, nargs=2, default=[5, 15],
                   metavar=("LO", "HI"), help="film scene length bounds in seconds")
    p.add_argument("--dim", type=int, default=64, help="embedding dimension")
    p.add_argument("--class-separation", type=float, default=None,
                   help="intro/film centroid angle in radians (default pi/3)")
    p.add_argument("--centroid-spread", type=float, default=None,
                   help="per-series intro centroid angle from the shared anchor (default pi/12)")
    p.add_argument("--noise-sigma", type=float, default=0.08)
    p.add_argument("--credits-prob", type=float, default=0.5)
    p.set_defaults(func=cmd_synth)
    subparsers["synth"] = p

    p = sub.add_parser("train", help="train a model on a labeled manifest")
    _add_common(p)
    _add_model_args(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoints, history, and split files go here")
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--lr", type=float, default=5e-5)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--eval-every", type=int, default=100)
    p.add_argument("--stride", type=int, default=30, help="training window / eval stride")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--tv-lambda", type=float, default=0.0,
                   help="weight of the squared label-transition penalty (off by default)")
    p.add_argument("--max-shift", type=int, default=5)
    p.add_argument("--subst-range", type=float, nargs=2, default=[0.10, 0.30],
                   metavar=("LO", "HI"))
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--early-stop", type=int, default=None,
                   help="stop after N evals without F1 improvement")
    p.set_defaults(func=cmd_train)
    subparsers["train"] = p

    p = sub.add_parser("eval", help="score a checkpoint against labeled sequences")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default=None, help="write metrics.json here")
    p.add_argument("--stride", type=int, default=30)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)
    subparsers["eval"] = p

    p = sub.add_parser("infer", help="predict segments for unlabeled sequences")
    _add_common(p)
    p.add_argument("inputs", nargs="*", help=".icsq files")
    p.add_argument("--manifest", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default=None, help="write predictions.jsonl here")
    p.add_argument("--stride", type=int, default=30)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--min-segment", type=int, default=0,
                   help="absorb predicted runs shorter than this many seconds")
    p.add_argument("--agg", choices=("mean", "max", "vote"), default="mean")
    p.add_argument("--probs", action="store_true", help="include per-frame probabilities")
    p.set_defaults(func=cmd_infer)
    subparsers["infer"] = p

    p = sub.add_parser("bench", help="measure inference throughput")
    _add_common(p)
    _add_model_args(p)
    p.add_argument("--checkpoint", default=None, help="time this model instead of a fresh one")
    p.add_argument("--dim", type=int, default=512, help="embedding dim for a fresh model")
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--stride", type=int, default=30)
    p.add_argument("--compare-backends", action="store_true")
    p.add_argument("--out", default=None, help="write bench.json here")
    p.set_defaults(func=cmd_bench)
    subparsers["bench"] = p

    p = sub.add_parser("inspect", help="describe an .icsq sequence or .tseg checkpoint")
    _add_common(p)
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect)
    subparsers["inspect"] = p

    return parser, subparsers


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------

def _parse_config_file(path, subparser):
    from .errors import ConfigError

    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    actions = {a.dest: a for a in subparser._actions
               if a.dest not in ("help", "config", "func")}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        dest = key.replace("-", "_")
        if dest not in actions:
            raise ConfigError(f"{path}:{lineno}: unknown option {key!r}")
        action = actions[dest]
        try:
            if isinstance(action, argparse._StoreTrueAction):
                if val.lower() not in ("true", "false", "0", "1"):
                    raise ValueError("expected true/false")
                values[dest] = val.lower() in ("true", "1")
            elif action.nargs == 2:
                parts = val.replace(",", " ").split()
                if len(parts) != 2:
                    raise ValueError("expected two values")
                values[dest] = [action.type(part) for part in parts]
            elif action.choices is not None and val not in action.choices:
                raise ValueError(f"must be one of {tuple(action.choices)}")
            else:
                values[dest] = (action.type or str)(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return values


def _effective_config(args):
    skip = {"func", "config", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _echo_config(args):
    cfg = _effective_config(args)
    print(f"effective-config: {json.dumps(cfg, default=str)}", file=sys.stderr)
    out = getattr(args, "out", None)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "effective_config.json").write_text(
            json.dumps(cfg, indent=2, default=str) + "\n", encoding="utf-8")


def _setup_runtime(args):
    """Thread pinning must precede the first numpy import; backend follows it."""
    _apply_threads(args.threads)
    if args.backend != "auto":
        from . import _kernels

        _kernels.use_backend(args.backend)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(args):
    import math

    from .synth import SynthConfig, generate

    cfg = SynthConfig(
        n_series=args.n_series, episodes_per_series=args.episodes_per_series,
        len_range_s=tuple(args.len_range), intro_len_range_s=tuple(args.intro_len_range),
        scene_len_range_s=tuple(args.scene_len_range), embed_dim=args.dim,
        class_separation=math.pi / 3 if args.class_separation is None else args.class_separation,
        centroid_spread=math.pi / 12 if args.centroid_spread is None else args.centroid_spread,
        noise_sigma=args.noise_sigma, credits_prob=args.credits_prob, seed=args.seed,
    )
    manifest = generate(cfg, args.out)
    msg = {"sequences": len(manifest), "series": len(manifest.series_ids()),
           "frames": manifest.total_frames(), "out": str(args.out)}
    print(json.dumps(msg) if args.json else
          f"wrote {msg['sequences']} sequences ({msg['frames']} frames, "
          f"{msg['series']} series) to {args.out}")
    return 0


def _model_config(args, embed_dim):
    from .model import ModelConfig

    return ModelConfig(
        window_len=args.window_len, embed_dim=embed_dim, num_heads=args.heads,
        num_layers=args.layers, ff_dim=args.ff_dim, dropout_rate=args.dropout,
    )


def cmd_train(args):
    from .augment import AugmentConfig
    from .data import build_training_windows, load_manifest, load_sequences, save_manifest, split_by_series
    from .errors import ContractError
    from .model import TemporalSegmenter
    from .train import TrainConfig, train

    manifest = load_manifest(args.manifest)
    train_man, val_man = split_by_series(manifest, args.val_fraction, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_manifest(train_man, out / "train_split.tsv")
    save_manifest(val_man, out / "val_split.tsv")
    train_seqs = load_sequences(train_man)
    val_seqs = load_sequences(val_man)
    dims = {s.D for s in train_seqs + val_seqs}
    if len(dims) != 1:
        raise ContractError(f"manifest mixes embedding dims {sorted(dims)}")
    model = TemporalSegmenter(_model_config(args, dims.pop()), seed=args.seed)
    windows = build_training_windows(train_seqs, window_len=args.window_len, stride=args.stride)
    if args.no_augment:
        augment = AugmentConfig.disabled()
    else:
        augment = AugmentConfig(max_shift_s=args.max_shift,
                                substitution_rate_range=tuple(args.subst_range))
    cfg = TrainConfig(
        lr=args.lr, batch_size=args.batch_size, epochs=args.epochs,
        max_steps=args.max_steps, seed=args.seed, augment=augment,
        tv_lambda=args.tv_lambda, eval_every=args.eval_every, eval_stride=args.stride,
        threshold=args.threshold, early_stop_patience=args.early_stop,
        checkpoint_dir=str(out),
    )
    history = train(model, windows, val_seqs, cfg)
    last = history.records[-1] if history.records else None
    result = {
        "steps": history.final_step,
        "train_windows": len(windows),
        "best_f1": history.best_f1,
        "best_step": history.best_step,
        "final_train_loss": None if last is None else last.train_loss,
        "out": str(out),
    }
    print(json.dumps(result) if args.json else
          f"trained {result['steps']} steps on {result['train_windows']} windows; "
          f"best F1 {result['best_f1']} at step {result['best_step']}; "
          f"checkpoints in {out}")
    return 0


def cmd_eval(args):
    from .checkpoint import load_checkpoint
    from .data import load_manifest, load_sequences
    from .train import evaluate

    model = load_checkpoint(args.checkpoint)
    sequences = load_sequences(load_manifest(args.manifest))
    report, val_loss = evaluate(model, sequences, stride=args.stride,
                                threshold=args.threshold)
    payload = report.to_dict()
    payload["val_loss"] = val_loss
    if args.out:
        (Path(args.out) / "metrics.json").write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(payload) if args.json else
          report.summary() + f"  loss {val_loss:.4f}")
    return 0


def cmd_infer(args):
    from .checkpoint import load_checkpoint
    from .data import load_manifest, read_sequence
    from .errors import ContractError
    from .infer import predict_sequence

    if not args.inputs and not args.manifest:
        raise ContractError("give .icsq paths or --manifest")
    model = load_checkpoint(args.checkpoint)
    paths = list(args.inputs)
    if args.manifest:
        paths.extend(e.path for e in load_manifest(args.manifest))
    outputs = []
    for path in paths:
        seq = read_sequence(path)
        pred = predict_sequence(model, seq, stride=args.stride,
                                threshold=args.threshold,
                                min_segment_s=args.min_segment, mode=args.agg)
        outputs.append(pred.to_dict(include_probs=args.probs))
        if not args.json:
            marks = ", ".join(
                f"[{s.start_s}s..{s.end_s}s)" for s in pred.segments if s.label == 1
            ) or "none"
            print(f"{seq.id}: intro/credits {marks}")
    if args.json:
        print(json.dumps(outputs))
    if args.out:
        out = Path(args.out)
        with open(out / "predictions.jsonl", "w", encoding="utf-8") as fh:
            for rec in outputs:
                fh.write(json.dumps(rec) + "\n")
    return 0


def cmd_bench(args):
    from .bench import benchmark, compare_backends, reports_to_json
    from .checkpoint import load_checkpoint
    from .model import TemporalSegmenter

    if args.checkpoint:
        model = load_checkpoint(args.checkpoint)
    else:
        model = TemporalSegmenter(_model_config(args, args.dim), seed=args.seed)
    kwargs = dict(n_frames=args.frames, warmup=args.warmup, reps=args.reps,
                  stride=args.stride, seed=args.seed)
    if args.compare_backends:
        reports = compare_backends(model, **kwargs)
    else:
        report = benchmark(model, **kwargs)
        reports = {report.backend: report}
    text = reports_to_json(reports)
    if args.json:
        print(text)
    else:
        for rep in reports.values():
            print(rep.summary())
    if args.out:
        (Path(args.out) / "bench.json").write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_inspect(args):
    from .checkpoint import TSEG_MAGIC, load_checkpoint
    from .data import ICSQ_MAGIC, read_sequence
    from .errors import FormatError
    from .infer import extract_segments
    from .model import param_count

    path = Path(args.path)
    try:
        with open(path, "rb") as fh:
            magic = fh.read(4)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if magic == ICSQ_MAGIC:
        seq = read_sequence(path)
        info = {"kind": "sequence", "id": seq.id, "series_id": seq.series_id,
                "frames": seq.T, "dim": seq.D, "fps": seq.fps,
                "has_labels": seq.labels is not None}
        if seq.labels is not None:
            info["positive_frames"] = int(seq.labels.sum())
            info["segments"] = [
                {"start_s": s.start_s, "end_s": s.end_s, "label": s.label}
                for s in extract_segments(seq.labels)
            ]
        print(json.dumps(info) if args.json else "\n".join(
            f"{k}: {v}" for k, v in info.items() if k != "segments"))
        if not args.json and "segments" in info:
            for s in info["segments"]:
                print(f"  [{s['start_s']:>5}s .. {s['end_s']:>5}s) label {s['label']}")
        return 0
    if magic == TSEG_MAGIC:
        model = load_checkpoint(path)
        cfg = model.config
        info = {"kind": "checkpoint", "window_len": cfg.window_len,
                "embed_dim": cfg.embed_dim, "num_heads": cfg.num_heads,
                "num_layers": cfg.num_layers, "ff_dim": cfg.ff_dim,
                "dropout_rate": cfg.dropout_rate, "params": param_count(cfg)}
        print(json.dumps(info) if args.json else "\n".join(
            f"{k}: {v}" for k, v in info.items()))
        return 0
    raise FormatError(f"{path}: unrecognized magic {magic!r}; expected ICSQ or TSEG")


def main(argv=None):
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    from .errors import TsegError

    try:
        if args.config:
            subparser = subparsers[args.command]
            subparser.set_defaults(**_parse_config_file(args.config, subparser))
            args = parser.parse_args(argv)
        _setup_runtime(args)
        _echo_config(args)
        return args.func(args)
    except (TsegError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
