"""End-to-end acceptance checks, one per release criterion.

Each test prints a single PASS/FAIL line (undisturbed by capture) with the
measured quantity and its pinned tolerance, then asserts. Budgets are wall
clock on a single CPU core.
"""

import dataclasses
import time

import numpy as np
import pytest

from tseg import _kernels
from tseg.augment import AugmentConfig, class_pools, frame_substitution, temporal_shift
from tseg.bench import benchmark
from tseg.checkpoint import load_checkpoint, save_checkpoint
from tseg.data import (
    EmbeddingSequence,
    build_training_windows,
    load_sequences,
    make_windows,
    read_sequence,
    split_by_series,
    write_sequence,
)
from tseg.errors import FormatError
from tseg.gradcheck import grad_check
from tseg.infer import predict_sequence
from tseg.metrics import score
from tseg.model import ModelConfig, TemporalSegmenter, bce_loss
from tseg.synth import SynthConfig, generate
from tseg.train import TrainConfig, evaluate, train

TINY = ModelConfig(window_len=8, embed_dim=16, num_heads=2, num_layers=2, ff_dim=32)


def _verdict(capsys, name, ok, detail):
    line = f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    with capsys.disabled():
        print(line, flush=True)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. Gradient correctness
# ---------------------------------------------------------------------------

def test_gradient_correctness(capsys):
    """Full-model analytic gradients vs central differences, 64-bit,
    max relative error < 1e-5, < 60 s."""
    model = TemporalSegmenter(TINY, seed=0).to_double()
    rng = np.random.default_rng(7)
    x = rng.standard_normal((2, 8, 16))
    y = rng.integers(0, 2, size=(2, 8)).astype(np.float64)

    def closure():
        return bce_loss(model.forward(x), y)

    t0 = time.perf_counter()
    report = grad_check(closure, model.parameters())
    wall = time.perf_counter() - t0
    ok = report.passed(1e-5) and wall < 60.0
    _verdict(capsys, "gradient-correctness", ok,
             f"max rel err {report.max_rel_err:.2e} < 1e-5, {wall:.1f}s < 60s")


# ---------------------------------------------------------------------------
# 2. Overfit sanity
# ---------------------------------------------------------------------------

def test_overfit_sanity(tmp_path, capsys):
    """4 synthetic windows, tiny model, <= 2000 Adam steps at lr 5e-4,
    training loss < 0.05, < 5 min."""
    cfg = SynthConfig(n_series=2, episodes_per_series=2, len_range_s=(60, 80),
                      intro_len_range_s=(10, 20), embed_dim=16, seed=0)
    seqs = load_sequences(generate(cfg, tmp_path / "d"))
    windows = build_training_windows(seqs, window_len=8, stride=8)[:4]
    assert len(windows) == 4

    model = TemporalSegmenter(TINY, seed=0)
    tc = TrainConfig(lr=5e-4, batch_size=4, epochs=10**6, max_steps=2000, seed=0,
                     augment=AugmentConfig.disabled(), eval_every=100)
    t0 = time.perf_counter()
    history = train(model, windows, [], tc)
    wall = time.perf_counter() - t0
    final_loss = history.records[-1].train_loss
    ok = history.final_step <= 2000 and final_loss < 0.05 and wall < 300.0
    _verdict(capsys, "overfit-sanity", ok,
             f"loss {final_loss:.4f} < 0.05 after {history.final_step} steps, "
             f"{wall:.1f}s < 300s")


# ---------------------------------------------------------------------------
# 3. End-to-end synthetic benchmark
# ---------------------------------------------------------------------------

def test_end_to_end_synthetic(tmp_path, capsys):
    """Default synthetic corpus (8 series x 6 episodes, 120-300 s, seed 42),
    series-level split, 20 epochs on the scaled-down model (T=60, D=64,
    4 heads, 4 layers), F1 >= 0.95 on held-out series, < 30 min."""
    t0 = time.perf_counter()
    manifest = generate(SynthConfig(seed=42), tmp_path / "corpus")
    train_man, val_man = split_by_series(manifest, 0.2, seed=42)
    train_seqs = load_sequences(train_man)
    val_seqs = load_sequences(val_man)
    windows = build_training_windows(train_seqs, window_len=60, stride=15)

    model = TemporalSegmenter(
        ModelConfig(window_len=60, embed_dim=64, num_heads=4, num_layers=4), seed=42)
    tc = TrainConfig(lr=3e-4, batch_size=8, epochs=20, seed=42, eval_every=100,
                     checkpoint_dir=str(tmp_path / "run"))
    train(model, windows, val_seqs, tc)

    best = load_checkpoint(tmp_path / "run" / "best.tseg")
    report, _ = evaluate(best, val_seqs, stride=30, threshold=0.5)
    wall = time.perf_counter() - t0
    ok = report.f1 is not None and report.f1 >= 0.95 and wall < 1800.0
    _verdict(capsys, "end-to-end-synthetic", ok,
             f"held-out F1 {report.f1:.4f} >= 0.95 "
             f"(P {report.precision:.3f} R {report.recall:.3f}, "
             f"{len(val_seqs)} videos), {wall:.0f}s < 1800s")


# ---------------------------------------------------------------------------
# 4. Metric oracle equivalence
# ---------------------------------------------------------------------------

def _oracle(pairs):
    tp = fp = fn = tn = correct = total = 0
    for truth, pred in pairs:
        for t, p in zip(truth.tolist(), pred.tolist()):
            correct += t == p
            total += 1
        if truth.min() == truth.max():
            continue
        for t, p in zip(truth.tolist(), pred.tolist()):
            tp += t == 1 and p == 1
            fp += t == 0 and p == 1
            fn += t == 1 and p == 0
            tn += t == 0 and p == 0
    return tp, fp, fn, tn, correct / total


def test_metric_oracle_equivalence(capsys):
    """score() matches a brute-force confusion oracle on 1000 random video
    sets: integer counts exact, ratios within 1e-12."""
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        pairs = []
        for _ in range(int(rng.integers(1, 6))):
            t = int(rng.integers(1, 50))
            kind = int(rng.integers(4))
            truth = (np.zeros(t, dtype=int) if kind == 0 else
                     np.ones(t, dtype=int) if kind == 1 else
                     rng.integers(0, 2, size=t))
            pairs.append((truth, rng.integers(0, 2, size=t)))
        r = score(pairs)
        tp, fp, fn, tn, acc = _oracle(pairs)
        c = r.confusion_scored
        assert (c.tp, c.fp, c.fn, c.tn) == (tp, fp, fn, tn)
        worst = max(worst, abs(r.accuracy - acc))
        if r.precision is not None:
            worst = max(worst, abs(r.precision - tp / (tp + fp)))
        if r.recall is not None:
            worst = max(worst, abs(r.recall - tp / (tp + fn)))
    ok = worst < 1e-12
    _verdict(capsys, "metric-oracle-equivalence", ok,
             f"1000 sets, counts exact, worst ratio gap {worst:.1e} < 1e-12")


# ---------------------------------------------------------------------------
# 5. Window consistency
# ---------------------------------------------------------------------------

def test_window_consistency(capsys):
    """T=60 equals one forward pass bit-exactly; T=150 stride 30 equals
    recomputed per-frame means within 1e-6."""
    model = TemporalSegmenter(
        ModelConfig(window_len=60, embed_dim=16, num_heads=2, num_layers=2, ff_dim=32),
        seed=1)
    rng = np.random.default_rng(5)

    seq60 = EmbeddingSequence("a", "s", rng.standard_normal((60, 16)).astype(np.float32))
    pred = predict_sequence(model, seq60, stride=30)
    direct = model.forward_probs(seq60.frames[None])[0].astype(np.float32)
    exact = np.array_equal(pred.probs, direct)

    seq150 = EmbeddingSequence("b", "s", rng.standard_normal((150, 16)).astype(np.float32))
    pred150 = predict_sequence(model, seq150, stride=30)
    sums = np.zeros(150)
    counts = np.zeros(150)
    for w in make_windows(seq150, window_len=60, stride=30):
        p = model.forward_probs(w.frames[None])[0]
        sums[w.offset:w.offset + 60] += p
        counts[w.offset:w.offset + 60] += 1
    manual = (sums / counts).astype(np.float32)
    gap = float(np.abs(pred150.probs - manual).max())

    ok = exact and gap < 1e-6
    _verdict(capsys, "window-consistency", ok,
             f"T=60 bit-exact: {exact}; T=150 max mean gap {gap:.1e} < 1e-6")


# ---------------------------------------------------------------------------
# 6. Format round-trips
# ---------------------------------------------------------------------------

def test_format_round_trips(tmp_path, capsys):
    """100 randomized artifacts round-trip bit-exactly; 100 payload byte
    flips are all rejected with checksum errors."""
    rng = np.random.default_rng(99)
    artifacts = []  # (path, payload_start, payload_end)

    for i in range(80):
        t = int(rng.integers(1, 40))
        d = int(rng.integers(1, 17))
        labels = rng.integers(0, 2, size=t).astype(np.uint8) if rng.random() < 0.7 else None
        seq = EmbeddingSequence(f"seq{i}", f"series{i % 7}",
                                rng.standard_normal((t, d)).astype(np.float32), labels)
        path = tmp_path / f"rt{i}.icsq"
        write_sequence(seq, path)
        back = read_sequence(path)
        assert back.id == seq.id and back.series_id == seq.series_id
        assert np.array_equal(back.frames, seq.frames)
        assert (labels is None and back.labels is None) or np.array_equal(back.labels, labels)
        write_sequence(back, tmp_path / "rt_again.icsq")
        assert (tmp_path / "rt_again.icsq").read_bytes() == path.read_bytes()
        header = 29 + len(seq.id.encode()) + len(seq.series_id.encode())
        artifacts.append((path, header, header + 4 * t * d))

    for i in range(20):
        heads = int(rng.integers(1, 3))
        cfg = ModelConfig(window_len=int(rng.integers(2, 7)), embed_dim=4 * heads,
                          num_heads=heads, num_layers=int(rng.integers(1, 3)), ff_dim=8)
        model = TemporalSegmenter(cfg, seed=i)
        path = tmp_path / f"rt{i}.tseg"
        save_checkpoint(model, path)
        back = load_checkpoint(path)
        for a, b in zip(model.parameters(), back.parameters()):
            assert np.array_equal(a.data, b.data)
        save_checkpoint(back, tmp_path / "rt_again.tseg")
        assert (tmp_path / "rt_again.tseg").read_bytes() == path.read_bytes()
        blob = path.read_bytes()
        cfg_len = int.from_bytes(blob[8:12], "little")
        artifacts.append((path, 12 + cfg_len, len(blob) - 4))

    rejected = 0
    for trial in range(100):
        path, lo, hi = artifacts[int(rng.integers(len(artifacts)))]
        blob = bytearray(path.read_bytes())
        pos = int(rng.integers(lo, hi)) if hi > lo else lo
        blob[pos] ^= int(rng.integers(1, 256))
        bad = tmp_path / "corrupt.bin"
        bad.write_bytes(bytes(blob))
        loader = read_sequence if path.suffix == ".icsq" else load_checkpoint
        try:
            loader(bad)
        except FormatError as exc:
            rejected += "checksum" in str(exc)
    ok = rejected == 100
    _verdict(capsys, "format-round-trips", ok,
             f"100/100 round-trips bit-exact, {rejected}/100 flips rejected by checksum")


# ---------------------------------------------------------------------------
# 7. Augmentation contracts
# ---------------------------------------------------------------------------

def test_augmentation_contracts(capsys):
    """Disabled settings are identities; substitution never touches labels;
    every shift is a contiguous source slice. 1000 random draws."""
    t, d = 200, 8
    frames = np.zeros((t, d), dtype=np.float32)
    frames[:, 0] = np.arange(t)
    labels = np.zeros(t, dtype=np.uint8)
    labels[:40] = 1
    seq = EmbeddingSequence("tagged", "s", frames, labels)
    window = make_windows(seq, window_len=60, stride=30)[1]
    pools = class_pools(seq)
    rng = np.random.default_rng(17)

    ident = AugmentConfig(max_shift_s=0, substitution_rate_range=(0.0, 0.0))
    identities = (temporal_shift(window, ident, rng) is window
                  and frame_substitution(window, pools, ident, rng) is window)

    live = AugmentConfig(max_shift_s=5, substitution_rate_range=(0.1, 0.3))
    labels_ok = contiguous_ok = 0
    for _ in range(1000):
        sub = frame_substitution(window, pools, live, rng)
        labels_ok += np.array_equal(sub.labels, window.labels)
        sh = temporal_shift(window, live, rng)
        start = int(sh.frames[0, 0])
        contiguous_ok += (np.array_equal(sh.frames[:, 0], np.arange(start, start + 60))
                          and np.array_equal(sh.labels, seq.labels[start:start + 60]))

    ok = identities and labels_ok == 1000 and contiguous_ok == 1000
    _verdict(capsys, "augmentation-contracts", ok,
             f"identities {identities}, labels preserved {labels_ok}/1000, "
             f"contiguous slices {contiguous_ok}/1000")


# ---------------------------------------------------------------------------
# 8. Determinism
# ---------------------------------------------------------------------------

def test_determinism(tmp_path, capsys):
    """Same seeds give bit-identical synthetic data, training runs, and
    predictions (single-threaded)."""
    cfg = SynthConfig(n_series=2, episodes_per_series=2, len_range_s=(60, 80),
                      intro_len_range_s=(8, 15), embed_dim=16, seed=12)
    m1 = generate(cfg, tmp_path / "a")
    m2 = generate(cfg, tmp_path / "b")
    synth_ok = all(
        (tmp_path / "a" / f"{e.id}.icsq").read_bytes()
        == (tmp_path / "b" / f"{e.id}.icsq").read_bytes()
        for e in m1
    ) and len(m1) == len(m2)

    seqs = load_sequences(m1)
    windows = build_training_windows(seqs, window_len=8, stride=8)
    tc = TrainConfig(lr=1e-3, batch_size=4, epochs=2, seed=5, eval_every=4,
                     eval_stride=8)
    runs = []
    for _ in range(2):
        model = TemporalSegmenter(TINY, seed=3)
        history = train(model, windows, seqs[:1], tc)
        runs.append((
            [p.data.copy() for p in model.parameters()],
            [(r.step, r.train_loss, r.val_loss) for r in history.records],
            predict_sequence(model, seqs[0], stride=8).probs,
        ))
    params_ok = all(np.array_equal(a, b) for a, b in zip(runs[0][0], runs[1][0]))
    history_ok = runs[0][1] == runs[1][1]
    preds_ok = np.array_equal(runs[0][2], runs[1][2])

    ok = synth_ok and params_ok and history_ok and preds_ok
    _verdict(capsys, "determinism", ok,
             f"synth {synth_ok}, params {params_ok}, "
             f"history {history_ok}, predictions {preds_ok}")


# ---------------------------------------------------------------------------
# 9. Bench harness
# ---------------------------------------------------------------------------

def test_bench_harness(capsys):
    """>= 3 reps over 300 frames; fps equals n_frames/median exactly;
    median/mean/stdev all reported."""
    model = TemporalSegmenter(
        ModelConfig(window_len=60, embed_dim=64, num_heads=4, num_layers=2), seed=0)
    report = benchmark(model, n_frames=300, warmup=1, reps=3, stride=30)
    identity = report.fps == 300 / report.median_s
    stats_ok = (report.timed_reps >= 3
                and report.median_s == sorted(report.per_rep_s)[1]
                and np.isfinite([report.mean_s, report.stdev_s]).all()
                and report.backend in _kernels.available_backends())
    ok = identity and stats_ok
    _verdict(capsys, "bench-harness", ok,
             f"{report.timed_reps} reps, fps {report.fps:.1f} == 300/median, "
             f"median {report.median_s * 1e3:.1f}ms stdev {report.stdev_s * 1e3:.1f}ms")
