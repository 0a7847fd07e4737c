"""Inference throughput measurement over a fixed synthetic clip.

Timed region: sliding-window prediction only. Model construction, input
generation, and warmup are excluded. Throughput is frames per second
computed from the median rep so a single slow rep cannot flatter or sink
the number.
"""

import json
import platform
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import EmbeddingSequence
from .errors import ContractError
from .infer import predict_sequence


@dataclass
class BenchReport:
    backend: str
    n_frames: int
    warmup_reps: int
    timed_reps: int
    per_rep_s: list
    median_s: float
    mean_s: float
    stdev_s: float
    fps: float
    environment: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "backend": self.backend, "n_frames": self.n_frames,
            "warmup_reps": self.warmup_reps, "timed_reps": self.timed_reps,
            "per_rep_s": self.per_rep_s, "median_s": self.median_s,
            "mean_s": self.mean_s, "stdev_s": self.stdev_s, "fps": self.fps,
            "environment": self.environment,
        }

    def summary(self):
        return (
            f"[{self.backend}] {self.n_frames} frames: median {self.median_s * 1e3:.1f} ms "
            f"({self.fps:.1f} fps; {self.timed_reps} reps, "
            f"stdev {self.stdev_s * 1e3:.1f} ms)"
        )


def _environment():
    return {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "processor": platform.processor() or "unknown",
    }


def bench_input(embed_dim, n_frames=300, seed=0):
    rng = np.random.default_rng(seed)
    frames = rng.standard_normal((n_frames, embed_dim)).astype(np.float32)
    return EmbeddingSequence(id="bench", series_id="bench", frames=frames)


def benchmark(model, n_frames=300, warmup=2, reps=10, stride=30, seed=0):
    """Time repeated predict_sequence calls on one reusable model and input."""
    if reps < 3:
        raise ContractError("need at least 3 timed reps for a stable median")
    if warmup < 0 or n_frames < model.config.window_len:
        raise ContractError("warmup must be >= 0 and n_frames >= the model window")
    seq = bench_input(model.config.embed_dim, n_frames=n_frames, seed=seed)
    for _ in range(warmup):
        predict_sequence(model, seq, stride=stride)
    per_rep = []
    for _ in range(reps):
        t0 = time.perf_counter()
        predict_sequence(model, seq, stride=stride)
        per_rep.append(time.perf_counter() - t0)
    median = statistics.median(per_rep)
    return BenchReport(
        backend=_kernels.backend_name(), n_frames=n_frames,
        warmup_reps=warmup, timed_reps=reps, per_rep_s=per_rep,
        median_s=median, mean_s=statistics.fmean(per_rep),
        stdev_s=statistics.stdev(per_rep), fps=n_frames / median,
        environment=_environment(),
    )


def compare_backends(model, n_frames=300, warmup=2, reps=10, stride=30, seed=0):
    """Run the same benchmark under every available kernel backend."""
    current = _kernels.backend_name()
    reports = {}
    try:
        for name in _kernels.available_backends():
            _kernels.use_backend(name)
            reports[name] = benchmark(
                model, n_frames=n_frames, warmup=warmup, reps=reps,
                stride=stride, seed=seed,
            )
    finally:
        _kernels.use_backend(current)
    return reports


def reports_to_json(reports):
    return json.dumps({k: v.to_dict() for k, v in reports.items()}, indent=2)
