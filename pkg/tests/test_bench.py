"""Benchmark harness: timing bookkeeping, fps identity, backend comparison."""

import json

import pytest

from tseg import _kernels
from tseg.bench import bench_input, benchmark, compare_backends, reports_to_json
from tseg.errors import ContractError
from tseg.model import ModelConfig, TemporalSegmenter

TINY = ModelConfig(window_len=20, embed_dim=8, num_heads=2, num_layers=1, ff_dim=16)


@pytest.fixture(scope="module")
def model():
    return TemporalSegmenter(TINY, seed=0)


def test_report_fields_consistent(model):
    rep = benchmark(model, n_frames=40, warmup=1, reps=3, stride=10)
    assert rep.timed_reps == 3 and len(rep.per_rep_s) == 3
    assert rep.n_frames == 40
    assert rep.median_s == sorted(rep.per_rep_s)[1]
    assert rep.fps == pytest.approx(40 / rep.median_s)
    assert rep.backend in _kernels.available_backends()
    assert all(t > 0 for t in rep.per_rep_s)


def test_minimum_reps_enforced(model):
    with pytest.raises(ContractError, match="3"):
        benchmark(model, n_frames=40, reps=2)


def test_input_shorter_than_window_rejected(model):
    with pytest.raises(ContractError):
        benchmark(model, n_frames=10, reps=3)
    with pytest.raises(ContractError):
        benchmark(model, n_frames=40, reps=3, warmup=-1)


def test_bench_input_deterministic():
    a = bench_input(8, n_frames=30, seed=5)
    b = bench_input(8, n_frames=30, seed=5)
    assert (a.frames == b.frames).all()
    assert a.labels is None


def test_compare_backends_covers_all_and_restores(model, restore_backend):
    before = _kernels.backend_name()
    reports = compare_backends(model, n_frames=40, warmup=0, reps=3, stride=10)
    assert set(reports) == set(_kernels.available_backends())
    assert _kernels.backend_name() == before
    for name, rep in reports.items():
        assert rep.backend == name


def test_reports_serialize_to_json(model):
    rep = benchmark(model, n_frames=40, warmup=0, reps=3, stride=10)
    blob = json.loads(reports_to_json({"x": rep}))
    assert blob["x"]["fps"] == rep.fps
    assert "environment" in blob["x"]
    assert "median" in rep.summary() or "ms" in rep.summary()
