"""Embedding-sequence storage, windowing, pairing, and dataset splitting.

The on-disk sequence format ("ICSQ", all integers little-endian):

    bytes 0..3   magic "ICSQ"
    u32          version (1)
    u32 + utf-8  sequence id (length-prefixed)
    u32 + utf-8  series id (length-prefixed)
    f32          frames per second
    u32          T (frame count)
    u32          D (embedding dim)
    u8           has_labels (0/1)
    f32[T*D]     frame embeddings, row-major
    u8[T]        labels in {0,1}, present iff has_labels
    u32          CRC-32 of everything above

Manifests are line-delimited UTF-8 text: a `# tseg-manifest v1` header,
then one tab-separated record per sequence:
id, series_id, relative path, has_labels (0/1), T, split_tag ('-' if none).
"""

import logging
import struct
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ContractError, FormatError, PairingError, SplitError

log = logging.getLogger(__name__)

ICSQ_MAGIC = b"ICSQ"
ICSQ_VERSION = 1
MANIFEST_HEADER = "# tseg-manifest v1"


@dataclass
class EmbeddingSequence:
    """One video as a (T, D) float32 embedding matrix at a fixed FPS,
    optionally with one {0,1} label per frame (1 = intro/credits)."""

    id: str
    series_id: str
    frames: np.ndarray
    labels: np.ndarray | None = None
    fps: float = 1.0

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ContractError(f"sequence {self.id!r}: frames must be (T>=1, D)")
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
            if self.labels.shape != (self.frames.shape[0],):
                raise ContractError(f"sequence {self.id!r}: labels length != T")
            if self.labels.max(initial=0) > 1:
                raise ContractError(f"sequence {self.id!r}: labels must be 0/1")

    @property
    def T(self):
        return self.frames.shape[0]

    @property
    def D(self):
        return self.frames.shape[1]


def write_sequence(seq, path):
    sid = seq.id.encode("utf-8")
    ser = seq.series_id.encode("utf-8")
    parts = [
        ICSQ_MAGIC,
        struct.pack("<I", ICSQ_VERSION),
        struct.pack("<I", len(sid)), sid,
        struct.pack("<I", len(ser)), ser,
        struct.pack("<f", seq.fps),
        struct.pack("<II", seq.T, seq.D),
        struct.pack("<B", 0 if seq.labels is None else 1),
        np.ascontiguousarray(seq.frames, dtype="<f4").tobytes(),
    ]
    if seq.labels is not None:
        parts.append(seq.labels.tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def expected_icsq_size(id_len, series_len, t, d, has_labels):
    """Total file size implied by the layout above."""
    return 4 + 4 + 4 + id_len + 4 + series_len + 4 + 8 + 1 + 4 * t * d + (t if has_labels else 0) + 4


def read_sequence(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != ICSQ_MAGIC:
        raise FormatError(f"{path}: not an ICSQ file (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != ICSQ_VERSION:
        raise FormatError(f"{path}: unsupported ICSQ version {version}")

    def take(n, off):
        if off + n > len(blob):
            raise FormatError(f"{path}: truncated ICSQ file")
        return blob[off:off + n], off + n

    raw, off = take(4, 8)
    (id_len,) = struct.unpack("<I", raw)
    raw, off = take(id_len, off)
    seq_id = raw.decode("utf-8")
    raw, off = take(4, off)
    (ser_len,) = struct.unpack("<I", raw)
    raw, off = take(ser_len, off)
    series_id = raw.decode("utf-8")
    raw, off = take(13, off)
    fps, t, d, has_labels = struct.unpack("<fIIB", raw)
    if has_labels not in (0, 1):
        raise FormatError(f"{path}: has_labels flag must be 0/1")
    expected = expected_icsq_size(id_len, ser_len, t, d, has_labels)
    if len(blob) != expected:
        raise FormatError(f"{path}: wrong size ({len(blob)} bytes, expected {expected})")
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    actual_crc = zlib.crc32(blob[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(
            f"{path}: checksum mismatch (stored {stored_crc:#010x}, computed {actual_crc:#010x})"
        )
    frames = np.frombuffer(blob, dtype="<f4", count=t * d, offset=off).reshape(t, d)
    off += 4 * t * d
    labels = None
    if has_labels:
        labels = np.frombuffer(blob, dtype=np.uint8, count=t, offset=off)
        if labels.max(initial=0) > 1:
            raise FormatError(f"{path}: label bytes outside {{0,1}}")
    return EmbeddingSequence(
        id=seq_id, series_id=series_id, frames=frames.astype(np.float32),
        labels=None if labels is None else labels.copy(), fps=fps,
    )


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

@dataclass
class ManifestEntry:
    id: str
    series_id: str
    path: str  # absolute after load; relative in the file
    has_labels: bool
    T: int
    split_tag: str = ""


@dataclass
class Manifest:
    entries: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def series_ids(self):
        return sorted({e.series_id for e in self.entries})

    def total_frames(self):
        return sum(e.T for e in self.entries)

    def validate(self):
        seen = set()
        for e in self.entries:
            if e.id in seen:
                raise FormatError(f"manifest: duplicate id {e.id!r}")
            seen.add(e.id)
        return self


def save_manifest(manifest, path):
    path = Path(path)
    base = path.parent
    lines = [MANIFEST_HEADER]
    for e in manifest.entries:
        for fieldval in (e.id, e.series_id):
            if "\t" in fieldval or "\n" in fieldval:
                raise ContractError(f"manifest field {fieldval!r} contains tab/newline")
        rel = Path(e.path)
        if rel.is_absolute():
            try:
                rel = rel.relative_to(base.resolve())
            except ValueError:
                pass  # outside the manifest dir; keep absolute
        lines.append(
            "\t".join([e.id, e.series_id, str(rel), "1" if e.has_labels else "0",
                       str(e.T), e.split_tag or "-"])
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_manifest(path, check_paths=True):
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != MANIFEST_HEADER:
        raise FormatError(f"{path}: missing manifest header {MANIFEST_HEADER!r}")
    manifest = Manifest()
    for ln in lines[1:]:
        if ln.startswith("#"):
            continue
        cols = ln.split("\t")
        if len(cols) != 6:
            raise FormatError(f"{path}: bad manifest record {ln!r}")
        sid, series, rel, has_labels, t, tag = cols
        resolved = (path.parent / rel).resolve() if not Path(rel).is_absolute() else Path(rel)
        if check_paths and not resolved.is_file():
            raise FormatError(f"{path}: referenced file does not exist: {resolved}")
        manifest.entries.append(ManifestEntry(
            id=sid, series_id=series, path=str(resolved),
            has_labels=has_labels == "1", T=int(t),
            split_tag="" if tag == "-" else tag,
        ))
    return manifest.validate()


def load_sequences(manifest):
    return [read_sequence(e.path) for e in manifest.entries]


# ---------------------------------------------------------------------------
# Windowing
# ---------------------------------------------------------------------------

@dataclass
class Window:
    """A fixed-length slice of a source sequence.

    ``offset`` is the slice start in the source; ``n_pad`` counts trailing
    frames that repeat the source's final frame because the source was
    shorter than the window. Padded positions must be discarded downstream.
    ``source`` keeps the live sequence around for augmentation re-slicing.
    """

    source_id: str
    offset: int
    frames: np.ndarray
    labels: np.ndarray | None = None
    n_pad: int = 0
    source: EmbeddingSequence | None = field(default=None, repr=False)

    @property
    def length(self):
        return self.frames.shape[0]


def _slice_window(seq, offset, window_len):
    end = offset + window_len
    frames = seq.frames[offset:end]
    labels = None if seq.labels is None else seq.labels[offset:end]
    return Window(seq.id, offset, frames, labels, 0, seq)


def _padded_window(seq, window_len):
    n_pad = window_len - seq.T
    frames = np.concatenate([seq.frames, np.repeat(seq.frames[-1:], n_pad, axis=0)])
    labels = None
    if seq.labels is not None:
        labels = np.concatenate([seq.labels, np.repeat(seq.labels[-1:], n_pad)])
    return Window(seq.id, 0, frames, labels, n_pad, seq)


def make_windows(seq, window_len=60, stride=30):
    """Overlapping windows covering every frame of the sequence.

    Offsets run 0, stride, 2*stride, ...; a final window at T - window_len
    is always emitted so the tail is covered. Sources shorter than the
    window yield one padded window.
    """
    if window_len < 1 or stride < 1:
        raise ContractError("window_len and stride must be >= 1")
    if seq.T < window_len:
        return [_padded_window(seq, window_len)]
    offsets = list(range(0, seq.T - window_len + 1, stride))
    if offsets[-1] != seq.T - window_len:
        offsets.append(seq.T - window_len)
    return [_slice_window(seq, o, window_len) for o in offsets]


# ---------------------------------------------------------------------------
# Balanced pairing of labeled runs
# ---------------------------------------------------------------------------

@dataclass
class PairedRun:
    """A positive (intro/credits) run and its equal-length film counterpart.

    The two windows are adjacent slices of the same source, so together they
    span one contiguous balanced segment."""

    intro: Window
    film: Window

    def span(self):
        start = min(self.intro.offset, self.film.offset)
        end = max(self.intro.offset + self.intro.length, self.film.offset + self.film.length)
        return start, end


def label_runs(labels):
    """Maximal (start, end, value) runs of a label vector, end exclusive."""
    runs = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            runs.append((start, i, int(labels[start])))
            start = i
    return runs


def balance_pairs(seq):
    """Pair each maximal run of positive labels with equal-length film content.

    The film slice is taken immediately before the run; when the run starts
    the sequence, it is taken immediately after instead. Pairs are truncated
    (with a warning) when the adjacent film gap is shorter than the run.
    """
    if seq.labels is None:
        raise ContractError(f"sequence {seq.id!r} has no labels")
    runs = label_runs(seq.labels)
    pairs = []
    for idx, (s, e, value) in enumerate(runs):
        if value != 1:
            continue
        run_len = e - s
        # Runs tile the sequence and alternate value, so the neighbors of a
        # positive run are zero-runs; their lengths are the available gaps.
        gap_before = runs[idx - 1][1] - runs[idx - 1][0] if idx > 0 else 0
        gap_after = runs[idx + 1][1] - runs[idx + 1][0] if idx + 1 < len(runs) else 0
        if gap_before > 0:
            take = min(run_len, gap_before)
            if take < run_len:
                log.warning(
                    "sequence %s: run [%d,%d) truncated to %d film frames before it",
                    seq.id, s, e, take,
                )
            film = _slice_window_exact(seq, s - take, take)
        else:
            if gap_after <= 0:
                raise PairingError(
                    f"sequence {seq.id!r}: run [{s},{e}) has no adjacent film content"
                )
            take = min(run_len, gap_after)
            if take < run_len:
                log.warning(
                    "sequence %s: run [%d,%d) truncated to %d film frames after it",
                    seq.id, s, e, take,
                )
            film = _slice_window_exact(seq, e, take)
        intro = _slice_window_exact(seq, s, run_len)
        pairs.append(PairedRun(intro=intro, film=film))
    return pairs


def _slice_window_exact(seq, offset, length):
    frames = seq.frames[offset:offset + length]
    labels = None if seq.labels is None else seq.labels[offset:offset + length]
    return Window(seq.id, offset, frames, labels, 0, seq)


def build_training_windows(sequences, window_len=60, stride=30):
    """Balanced training windows for a set of labeled sequences.

    Each paired run defines a contiguous balanced span of its source; spans
    at least window_len long are cut into overlapping windows, shorter spans
    are widened to window_len inside the source (keeping true labels) and
    padded only when the whole source is shorter than the window.
    """
    windows = []
    for seq in sequences:
        for pair in balance_pairs(seq):
            a, b = pair.span()
            if b - a >= window_len:
                offsets = list(range(a, b - window_len + 1, stride))
                if offsets[-1] != b - window_len:
                    offsets.append(b - window_len)
                windows.extend(_slice_window(seq, o, window_len) for o in offsets)
            elif seq.T >= window_len:
                o = min(a, seq.T - window_len)
                windows.append(_slice_window(seq, o, window_len))
            else:
                windows.append(_padded_window(seq, window_len))
    return windows


# ---------------------------------------------------------------------------
# Series-aware splitting
# ---------------------------------------------------------------------------

def split_by_series(manifest, val_fraction, seed):
    """Partition a manifest into (train, val) with series as the atomic unit.

    Deterministic for a given seed; no series appears on both sides. The
    validation side is filled greedily toward val_fraction of total frames.
    """
    if not 0.0 < val_fraction < 1.0:
        raise SplitError(f"val_fraction must be in (0,1), got {val_fraction}")
    by_series = {}
    for e in manifest.entries:
        by_series.setdefault(e.series_id, []).append(e)
    series = sorted(by_series)
    if len(series) < 2:
        raise SplitError(f"need at least 2 series to split, got {len(series)}")
    rng = np.random.default_rng(seed)
    order = [series[i] for i in rng.permutation(len(series))]
    total = manifest.total_frames()
    target = val_fraction * total
    val_series = []
    acc = 0
    for sid in order:
        frames = sum(e.T for e in by_series[sid])
        if not val_series:
            val_series.append(sid)
            acc += frames
            continue
        if abs(acc + frames - target) <= abs(acc - target) and len(val_series) < len(series) - 1:
            val_series.append(sid)
            acc += frames
    val_set = set(val_series)
    if len(val_set) >= len(series):
        val_set.discard(order[-1])
    train = Manifest([replace(e, split_tag="train") for e in manifest.entries
                      if e.series_id not in val_set])
    val = Manifest([replace(e, split_tag="val") for e in manifest.entries
                    if e.series_id in val_set])
    return train, val
