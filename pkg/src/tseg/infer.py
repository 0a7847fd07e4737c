"""Whole-sequence prediction by sliding a fixed window across the frames.

Windows overlap (stride < window length), every frame gets at least one
prediction, and overlapping predictions are combined per frame before
thresholding. Thresholding is strict (p > threshold), so a probability
exactly at the threshold maps to film.
"""

from dataclasses import dataclass, field

import numpy as np

from .data import make_windows
from .errors import ContractError

AGG_MODES = ("mean", "max", "vote")


@dataclass(frozen=True)
class Segment:
    """Maximal run of one label; [start_s, end_s) in frames (= seconds at 1 fps)."""
    start_s: int
    end_s: int
    label: int

    @property
    def length(self):
        return self.end_s - self.start_s


@dataclass
class SequencePrediction:
    sequence_id: str
    probs: np.ndarray
    labels: np.ndarray
    segments: list = field(default_factory=list)

    def to_dict(self, include_probs=False):
        d = {
            "id": self.sequence_id,
            "labels": self.labels.astype(int).tolist(),
            "segments": [
                {"start_s": s.start_s, "end_s": s.end_s, "label": s.label}
                for s in self.segments
            ],
        }
        if include_probs:
            d["probs"] = [float(p) for p in self.probs]
        return d


def extract_segments(labels):
    """Maximal constant-label runs as Segment objects, in order."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ContractError("labels must be a non-empty 1-D array")
    segments = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            segments.append(Segment(start, i, int(labels[start])))
            start = i
    return segments


def enforce_min_segment(labels, min_len):
    """Absorb runs shorter than min_len into a neighbor (left if it exists).

    Shortest run first, leftmost on ties; repeats until every remaining run
    is long enough or only one run is left.
    """
    labels = np.asarray(labels).copy()
    if min_len <= 1:
        return labels
    while True:
        segments = extract_segments(labels)
        if len(segments) <= 1:
            return labels
        short = [s for s in segments if s.length < min_len]
        if not short:
            return labels
        victim = min(short, key=lambda s: (s.length, s.start_s))
        if victim.start_s > 0:
            labels[victim.start_s:victim.end_s] = labels[victim.start_s - 1]
        else:
            labels[victim.start_s:victim.end_s] = labels[victim.end_s]


def aggregate_overlaps(contributions, total_len, mode="mean"):
    """Combine per-window probabilities into one probability per frame.

    contributions: iterable of (offset, probs, n_valid); only the first
    n_valid entries of each window count (the rest are padding). Modes:
    mean of contributions, max of contributions, or vote (fraction of
    contributions above 0.5). Every frame must be covered.
    """
    if mode not in AGG_MODES:
        raise ContractError(f"unknown aggregation mode {mode!r}; use one of {AGG_MODES}")
    out = np.zeros(total_len, dtype=np.float64)
    counts = np.zeros(total_len, dtype=np.int64)
    if mode == "max":
        out[:] = -np.inf
    for offset, probs, n_valid in contributions:
        p = np.asarray(probs, dtype=np.float64)[:n_valid]
        sl = slice(offset, offset + n_valid)
        if mode == "mean":
            out[sl] += p
        elif mode == "max":
            out[sl] = np.maximum(out[sl], p)
        else:
            out[sl] += (p > 0.5)
        counts[sl] += 1
    if counts.min(initial=1) == 0 or (counts == 0).any():
        raise ContractError("aggregation left some frames uncovered")
    if mode in ("mean", "vote"):
        out /= counts
    return out.astype(np.float32)


def predict_sequence(model, seq, stride=30, threshold=0.5, min_segment_s=0,
                     batch_size=32, mode="mean"):
    """Per-frame probabilities, thresholded labels, and segments for one sequence."""
    if seq.D != model.config.embed_dim:
        raise ContractError(
            f"sequence dim {seq.D} != model dim {model.config.embed_dim}"
        )
    window_len = model.config.window_len
    if stride > window_len:
        raise ContractError(
            f"stride {stride} > window length {window_len} would leave frames uncovered"
        )
    windows = make_windows(seq, window_len=window_len, stride=stride)
    contributions = []
    for i in range(0, len(windows), batch_size):
        chunk = windows[i:i + batch_size]
        batch = np.stack([w.frames for w in chunk])
        probs = model.forward_probs(batch)
        for w, p in zip(chunk, probs):
            contributions.append((w.offset, p, window_len - w.n_pad))
    frame_probs = aggregate_overlaps(contributions, seq.T, mode=mode)
    labels = (frame_probs > threshold).astype(np.uint8)
    if min_segment_s > 1:
        labels = enforce_min_segment(labels, min_segment_s)
    return SequencePrediction(
        sequence_id=seq.id, probs=frame_probs, labels=labels,
        segments=extract_segments(labels),
    )
