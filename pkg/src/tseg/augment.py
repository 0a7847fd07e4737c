"""Label-safe training augmentations for windowed sequences.

Two transforms, applied per window per step:

- temporal shift: move the window start a few seconds within the source and
  re-slice frames AND labels, so supervision always matches content;
- frame substitution: replace a random fraction of frames with other frames
  of the same class, leaving labels untouched.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .data import Window
from .errors import ConfigError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentConfig:
    max_shift_s: int = 5
    substitution_rate_range: tuple = (0.10, 0.30)
    enable_shift: bool = True
    enable_substitution: bool = True
    similarity_weighted: bool = False

    def __post_init__(self):
        if self.max_shift_s < 0:
            raise ConfigError("max_shift_s must be >= 0")
        lo, hi = self.substitution_rate_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ConfigError("substitution_rate_range must satisfy 0 <= lo <= hi <= 1")

    @classmethod
    def disabled(cls):
        return cls(max_shift_s=0, substitution_rate_range=(0.0, 0.0),
                   enable_shift=False, enable_substitution=False)


def temporal_shift(window, cfg, rng):
    """Re-slice the window at a uniformly drawn offset within +-max_shift_s.

    The shift is clamped so the window stays inside the source. Padded
    windows (source shorter than the window) are returned unchanged.
    """
    src = window.source
    if not cfg.enable_shift or cfg.max_shift_s == 0:
        return window
    if src is None:
        raise ConfigError(f"window from {window.source_id!r} has no source to re-slice")
    w = window.length
    if src.T <= w:
        return window
    delta = int(rng.integers(-cfg.max_shift_s, cfg.max_shift_s + 1))
    offset = min(max(window.offset + delta, 0), src.T - w)
    frames = src.frames[offset:offset + w]
    labels = None if src.labels is None else src.labels[offset:offset + w]
    return Window(window.source_id, offset, frames, labels, 0, src)


def class_pools(seq):
    """Frames of a labeled sequence grouped by class: {label: (n, D) array}."""
    if seq.labels is None:
        raise ConfigError(f"sequence {seq.id!r} has no labels to pool by class")
    return {int(v): seq.frames[seq.labels == v] for v in (0, 1)}


def frame_substitution(window, pools, cfg, rng):
    """Replace floor(rate * length) frames with same-class frames from pools.

    rate is drawn uniformly from the configured range; replaced positions are
    sampled without replacement. With similarity_weighted, candidates are
    drawn proportionally to clamped cosine similarity with the original frame
    instead of uniformly. Labels are unchanged by construction.
    """
    if not cfg.enable_substitution:
        return window
    if window.labels is None:
        raise ConfigError(f"window from {window.source_id!r} has no labels")
    lo, hi = cfg.substitution_rate_range
    rate = float(rng.uniform(lo, hi))
    k = int(rate * window.length)
    if k == 0:
        return window
    frames = window.frames.copy()
    positions = rng.choice(window.length, size=k, replace=False)
    for pos in positions:
        label = int(window.labels[pos])
        cands = pools.get(label)
        if cands is None or len(cands) == 0:
            log.warning("no class-%d pool for %s; leaving frame %d in place",
                        label, window.source_id, pos)
            continue
        if cfg.similarity_weighted:
            orig = frames[pos]
            sims = cands @ orig
            norms = np.linalg.norm(cands, axis=1) * max(np.linalg.norm(orig), 1e-12)
            weights = np.maximum(sims / np.maximum(norms, 1e-12), 0.0) + 1e-9
            idx = int(rng.choice(len(cands), p=weights / weights.sum()))
        else:
            idx = int(rng.integers(len(cands)))
        frames[pos] = cands[idx]
    return Window(window.source_id, window.offset, frames, window.labels,
                  window.n_pad, window.source)


def apply_augmentations(window, pools, cfg, rng):
    """Shift first (so labels are re-derived from source truth), then substitute."""
    out = temporal_shift(window, cfg, rng)
    return frame_substitution(out, pools, cfg, rng)
