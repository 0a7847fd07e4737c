"""Synthetic embedding-sequence datasets with known intro/credits structure.

Geometry mirrors what makes the real task learnable: intro/credits content
repeats, film content does not. One global unit direction anchors all
intro/credits content; each series places its intro centroid at a small
angle (centroid_spread) from that anchor and reuses it for every episode.
Film content is cut into scenes, and every scene draws a fresh unit-norm
centroid at class_separation radians from the series intro centroid, so film
directions never repeat and cannot be memorized per series. Frames are their
centroid plus isotropic Gaussian noise.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import EmbeddingSequence, Manifest, ManifestEntry, save_manifest, write_sequence
from .errors import ConfigError


@dataclass(frozen=True)
class SynthConfig:
    n_series: int = 8
    episodes_per_series: int = 6
    len_range_s: tuple = (120, 300)
    intro_len_range_s: tuple = (15, 60)
    scene_len_range_s: tuple = (5, 15)
    embed_dim: int = 64
    class_separation: float = math.pi / 3
    centroid_spread: float = math.pi / 12
    noise_sigma: float = 0.08
    credits_prob: float = 0.5
    fps: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_series < 1 or self.episodes_per_series < 1:
            raise ConfigError("n_series and episodes_per_series must be >= 1")
        if self.embed_dim < 2:
            raise ConfigError("embed_dim must be >= 2")
        lo, hi = self.len_range_s
        ilo, ihi = self.intro_len_range_s
        slo, shi = self.scene_len_range_s
        if not (1 <= ilo <= ihi) or not (3 <= lo <= hi) or not (1 <= slo <= shi):
            raise ConfigError("bad length ranges")
        if not 0.0 < self.class_separation <= math.pi:
            raise ConfigError("class_separation must be in (0, pi]")
        if not 0.0 <= self.centroid_spread < math.pi / 2:
            raise ConfigError("centroid_spread must be in [0, pi/2)")
        if self.noise_sigma < 0.0:
            raise ConfigError("noise_sigma must be >= 0")
        if not 0.0 <= self.credits_prob <= 1.0:
            raise ConfigError("credits_prob must be in [0, 1]")
        if self.fps <= 0.0:
            raise ConfigError("fps must be positive")


def _unit_orthogonal(rng, anchor):
    """Random unit vector orthogonal to a unit anchor."""
    while True:
        v = rng.standard_normal(anchor.shape[0])
        v -= v.dot(anchor) * anchor
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            return v / norm


def series_intro_centroids(cfg, rng):
    """Unit-norm intro/credits centroid for each series, all near one anchor."""
    anchor = rng.standard_normal(cfg.embed_dim)
    anchor /= np.linalg.norm(anchor)
    out = []
    for _ in range(cfg.n_series):
        tilt = _unit_orthogonal(rng, anchor)
        c = math.cos(cfg.centroid_spread) * anchor + math.sin(cfg.centroid_spread) * tilt
        out.append(c)
    return out


def _scene_centroid(cfg, rng, c_intro):
    away = _unit_orthogonal(rng, c_intro)
    return math.cos(cfg.class_separation) * c_intro + math.sin(cfg.class_separation) * away


def _episode(cfg, rng, c_intro):
    lo, hi = cfg.len_range_s
    ilo, ihi = cfg.intro_len_range_s
    slo, shi = cfg.scene_len_range_s
    ep_len = int(rng.integers(lo, hi + 1))
    intro_len = min(int(rng.integers(ilo, ihi + 1)), (ep_len - 1) // 2)
    cred_len = 0
    if rng.random() < cfg.credits_prob:
        cred_len = min(int(rng.integers(ilo, ihi + 1)), ep_len - intro_len - 1)
    labels = np.zeros(ep_len, dtype=np.uint8)
    labels[:intro_len] = 1
    if cred_len:
        labels[ep_len - cred_len:] = 1
    centroids = np.empty((ep_len, cfg.embed_dim), dtype=np.float64)
    centroids[labels == 1] = c_intro
    film_len = ep_len - intro_len - cred_len
    pos = intro_len
    while pos < intro_len + film_len:
        take = min(int(rng.integers(slo, shi + 1)), intro_len + film_len - pos)
        centroids[pos:pos + take] = _scene_centroid(cfg, rng, c_intro)
        pos += take
    frames = centroids + cfg.noise_sigma * rng.standard_normal((ep_len, cfg.embed_dim))
    return frames.astype(np.float32), labels


def generate(cfg, out_dir):
    """Write one .icsq file per episode plus manifest.tsv; returns the manifest.

    Fully deterministic for a given config: a single PCG64 stream drawn in a
    fixed order (anchor, per-series centroids, then per-episode shape, scene
    directions, and noise).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    centroids = series_intro_centroids(cfg, rng)
    manifest = Manifest()
    for si, c_intro in enumerate(centroids):
        series_id = f"s{si:02d}"
        for ei in range(cfg.episodes_per_series):
            frames, labels = _episode(cfg, rng, c_intro)
            seq_id = f"{series_id}e{ei:02d}"
            seq = EmbeddingSequence(
                id=seq_id, series_id=series_id, frames=frames, labels=labels, fps=cfg.fps,
            )
            rel = f"{seq_id}.icsq"
            write_sequence(seq, out_dir / rel)
            manifest.entries.append(ManifestEntry(
                id=seq_id, series_id=series_id, path=str((out_dir / rel).resolve()),
                has_labels=True, T=seq.T,
            ))
    save_manifest(manifest, out_dir / "manifest.tsv")
    return manifest
