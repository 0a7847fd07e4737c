"""Training loop: batched BCE over balanced windows, Adam, periodic eval.

Determinism: one seed fans out (via SeedSequence) into independent streams
for shuffling, augmentation, and dropout, so runs with the same seed and
config produce bit-identical parameters on a given backend.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff
from .augment import AugmentConfig, apply_augmentations, class_pools
from .checkpoint import save_checkpoint
from .errors import ConfigError, ContractError, NumericError
from .infer import predict_sequence
from .metrics import score
from .model import bce_loss, transition_penalty
from .optim import adam_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-5
    batch_size: int = 8
    epochs: int = 20
    max_steps: int | None = None
    seed: int = 0
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    tv_lambda: float = 0.0
    eval_every: int = 100
    eval_stride: int = 30
    threshold: float = 0.5
    early_stop_patience: int | None = None
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("lr must be > 0, batch_size and epochs >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1 when set")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if self.tv_lambda < 0:
            raise ConfigError("tv_lambda must be >= 0")


@dataclass
class EvalRecord:
    step: int
    epoch: int
    train_loss: float
    val_loss: float | None
    metrics: dict | None
    wall_s: float

    def to_json(self):
        return json.dumps({
            "step": self.step, "epoch": self.epoch, "train_loss": self.train_loss,
            "val_loss": self.val_loss, "metrics": self.metrics, "wall_s": self.wall_s,
        })


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_f1: float | None = None
    best_step: int | None = None
    final_step: int = 0

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(r.to_json() + "\n")


def evaluate(model, sequences, stride=30, threshold=0.5):
    """Score a model on labeled sequences via full sliding-window inference.

    Returns (MetricsReport, mean per-frame BCE of the aggregated probabilities).
    """
    if not sequences:
        raise ContractError("evaluate needs at least one sequence")
    pairs = []
    losses = []
    for seq in sequences:
        if seq.labels is None:
            raise ContractError(f"sequence {seq.id!r} has no labels to evaluate against")
        pred = predict_sequence(model, seq, stride=stride, threshold=threshold)
        pairs.append((seq.labels, pred.labels))
        p = np.clip(pred.probs.astype(np.float64), 1e-7, 1.0 - 1e-7)
        y = seq.labels.astype(np.float64)
        losses.append(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
    val_loss = float(np.concatenate(losses).mean())
    return score(pairs), val_loss


def _check_windows(model, windows):
    w = model.config.window_len
    d = model.config.embed_dim
    for win in windows:
        if win.labels is None:
            raise ContractError(f"training window from {win.source_id!r} has no labels")
        if win.frames.shape != (w, d):
            raise ContractError(
                f"training window from {win.source_id!r} has shape "
                f"{win.frames.shape}, model expects {(w, d)}"
            )


def train(model, windows, val_sequences, cfg):
    """Optimize the model in place; returns a TrainHistory.

    Augmentations are re-applied to each window every time it is drawn, so
    the model never sees the same batch twice unless augmentation is off.
    When checkpoint_dir is set, writes best.tseg (highest validation F1 seen,
    undefined F1 counts as worst), final.tseg, and history.jsonl.
    """
    if not windows:
        raise ContractError("no training windows")
    _check_windows(model, windows)

    ss = np.random.SeedSequence(cfg.seed)
    shuffle_rng, aug_rng, drop_rng = (np.random.default_rng(c) for c in ss.spawn(3))
    augmenting = cfg.augment.enable_shift or cfg.augment.enable_substitution
    pools = {}
    if augmenting and cfg.augment.enable_substitution:
        for win in windows:
            if win.source is not None and win.source.id not in pools:
                pools[win.source.id] = class_pools(win.source)

    ckpt_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    if ckpt_dir:
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    history = TrainHistory()
    params = model.parameters()
    step = 0
    interval_losses = []
    stale_evals = 0
    t0 = time.perf_counter()
    stop = False

    def run_eval(epoch):
        nonlocal stale_evals, stop
        train_loss = float(np.mean(interval_losses)) if interval_losses else float("nan")
        interval_losses.clear()
        val_loss = None
        metrics = None
        f1 = None
        if val_sequences:
            report, val_loss = evaluate(
                model, val_sequences, stride=cfg.eval_stride, threshold=cfg.threshold)
            metrics = report.to_dict()
            f1 = report.f1
        rec = EvalRecord(step=step, epoch=epoch, train_loss=train_loss,
                         val_loss=val_loss, metrics=metrics,
                         wall_s=time.perf_counter() - t0)
        history.records.append(rec)
        log.info("step %d epoch %d train_loss %.4f val_loss %s f1 %s",
                 step, epoch, train_loss,
                 "-" if val_loss is None else f"{val_loss:.4f}",
                 "-" if f1 is None else f"{f1:.4f}")
        key = -1.0 if f1 is None else f1
        best = -1.0 if history.best_f1 is None else history.best_f1
        if val_sequences and key >= best:
            if key > best:
                stale_evals = 0
            history.best_f1 = f1
            history.best_step = step
            if ckpt_dir:
                save_checkpoint(model, ckpt_dir / "best.tseg")
        elif val_sequences:
            stale_evals += 1
            if cfg.early_stop_patience is not None and stale_evals >= cfg.early_stop_patience:
                log.info("early stop: %d evals without F1 improvement", stale_evals)
                stop = True

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(windows))
        for lo in range(0, len(order), cfg.batch_size):
            chosen = [windows[i] for i in order[lo:lo + cfg.batch_size]]
            if augmenting:
                chosen = [
                    apply_augmentations(w, pools.get(w.source_id, {}), cfg.augment, aug_rng)
                    for w in chosen
                ]
            x = np.stack([w.frames for w in chosen])
            y = np.stack([w.labels for w in chosen])
            probs = model.forward(x, train_mode=True,
                                  rng=drop_rng if model.config.dropout_rate > 0 else None)
            loss = bce_loss(probs, y)
            if cfg.tv_lambda > 0:
                loss = autodiff.add(loss, transition_penalty(probs, cfg.tv_lambda))
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                raise NumericError(f"non-finite loss {loss_val} at step {step}")
            autodiff.backward(loss)
            adam_step(params, lr=cfg.lr)
            step += 1
            interval_losses.append(loss_val)
            if step % cfg.eval_every == 0:
                run_eval(epoch)
            if stop or (cfg.max_steps is not None and step >= cfg.max_steps):
                stop = True
                break
        if stop:
            break

    if interval_losses or not history.records:
        run_eval(min(epoch, cfg.epochs - 1))
    history.final_step = step
    if ckpt_dir:
        save_checkpoint(model, ckpt_dir / "final.tseg")
        if history.best_step is None:
            save_checkpoint(model, ckpt_dir / "best.tseg")
        history.save(ckpt_dir / "history.jsonl")
    return history
