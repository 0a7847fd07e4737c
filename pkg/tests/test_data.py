"""Sequence I/O, windowing, balanced pairing, and series splitting."""

import logging
import struct
import zlib

import numpy as np
import pytest

from tseg.data import (
    EmbeddingSequence,
    Manifest,
    ManifestEntry,
    balance_pairs,
    build_training_windows,
    expected_icsq_size,
    label_runs,
    load_manifest,
    load_sequences,
    make_windows,
    read_sequence,
    save_manifest,
    split_by_series,
    write_sequence,
)
from tseg.errors import ContractError, FormatError, PairingError, SplitError


def _seq(labels, d=4, sid="ep1", series="show-a", rng=None):
    labels = np.asarray(labels, dtype=np.uint8)
    rng = rng or np.random.default_rng(0)
    frames = rng.standard_normal((len(labels), d)).astype(np.float32)
    return EmbeddingSequence(id=sid, series_id=series, frames=frames, labels=labels)


def _pattern(*run_spec):
    """Label vector from (value, length) runs, e.g. _pattern((0, 20), (1, 10))."""
    return np.concatenate([np.full(n, v, dtype=np.uint8) for v, n in run_spec])


# ---------------------------------------------------------------------------
# EmbeddingSequence validation
# ---------------------------------------------------------------------------

class TestSequence:
    def test_frames_coerced_to_float32(self):
        seq = EmbeddingSequence("a", "s", np.ones((3, 2), dtype=np.float64))
        assert seq.frames.dtype == np.float32
        assert (seq.T, seq.D) == (3, 2)

    def test_rejects_bad_shapes(self):
        with pytest.raises(ContractError):
            EmbeddingSequence("a", "s", np.ones(5))
        with pytest.raises(ContractError):
            EmbeddingSequence("a", "s", np.ones((0, 4)))

    def test_rejects_bad_labels(self):
        with pytest.raises(ContractError, match="length"):
            EmbeddingSequence("a", "s", np.ones((3, 2)), labels=np.zeros(2))
        with pytest.raises(ContractError, match="0/1"):
            EmbeddingSequence("a", "s", np.ones((3, 2)), labels=np.array([0, 1, 2]))


# ---------------------------------------------------------------------------
# ICSQ round-trips and corruption
# ---------------------------------------------------------------------------

class TestIcsq:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        seq = _seq(_pattern((0, 7), (1, 3)), d=6, sid="épisode-1", series="sérié", rng=rng)
        path = tmp_path / "a.icsq"
        write_sequence(seq, path)
        back = read_sequence(path)
        assert back.id == seq.id and back.series_id == seq.series_id
        assert back.fps == seq.fps
        np.testing.assert_array_equal(back.frames, seq.frames)
        np.testing.assert_array_equal(back.labels, seq.labels)

    def test_roundtrip_without_labels(self, tmp_path, rng):
        seq = EmbeddingSequence("x", "s", rng.standard_normal((5, 3)))
        path = tmp_path / "x.icsq"
        write_sequence(seq, path)
        back = read_sequence(path)
        assert back.labels is None
        np.testing.assert_array_equal(back.frames, seq.frames)

    def test_file_size_matches_layout(self, tmp_path):
        seq = _seq(_pattern((1, 4), (0, 8)), d=5)
        path = tmp_path / "a.icsq"
        write_sequence(seq, path)
        expected = expected_icsq_size(len(seq.id.encode()), len(seq.series_id.encode()),
                                      seq.T, seq.D, True)
        assert path.stat().st_size == expected

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "a.icsq"
        write_sequence(_seq(_pattern((0, 4))), path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"JUNK"
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="magic"):
            read_sequence(path)

    def test_bad_version_rejected(self, tmp_path):
        path = tmp_path / "a.icsq"
        write_sequence(_seq(_pattern((0, 4))), path)
        blob = bytearray(path.read_bytes())
        blob[4:8] = struct.pack("<I", 7)
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="version"):
            read_sequence(path)

    def test_truncation_rejected(self, tmp_path):
        path = tmp_path / "a.icsq"
        write_sequence(_seq(_pattern((0, 4))), path)
        path.write_bytes(path.read_bytes()[:-9])
        with pytest.raises(FormatError):
            read_sequence(path)

    def test_payload_flip_rejected_by_crc(self, tmp_path):
        path = tmp_path / "a.icsq"
        write_sequence(_seq(_pattern((0, 10)), d=8), path)
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0x01
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="checksum"):
            read_sequence(path)

    def test_out_of_range_label_byte_rejected(self, tmp_path):
        path = tmp_path / "a.icsq"
        write_sequence(_seq(_pattern((0, 4), (1, 2))), path)
        blob = bytearray(path.read_bytes())
        blob[-5] = 9  # last label byte, then re-seal the checksum
        blob[-4:] = struct.pack("<I", zlib.crc32(bytes(blob[:-4])) & 0xFFFFFFFF)
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="label"):
            read_sequence(path)


# ---------------------------------------------------------------------------
# Windowing
# ---------------------------------------------------------------------------

class TestWindows:
    def test_exact_fit_single_window(self):
        seq = _seq(_pattern((0, 60)))
        wins = make_windows(seq, window_len=60, stride=30)
        assert len(wins) == 1
        assert wins[0].offset == 0 and wins[0].n_pad == 0
        np.testing.assert_array_equal(wins[0].frames, seq.frames)

    def test_offsets_include_forced_tail(self):
        seq = _seq(_pattern((0, 100)))
        wins = make_windows(seq, window_len=60, stride=30)
        assert [w.offset for w in wins] == [0, 30, 40]

    def test_aligned_tail_not_duplicated(self):
        seq = _seq(_pattern((0, 150)))
        wins = make_windows(seq, window_len=60, stride=30)
        assert [w.offset for w in wins] == [0, 30, 60, 90]

    def test_every_frame_covered(self):
        for t in (60, 61, 89, 90, 91, 137, 300):
            seq = _seq(_pattern((0, t)))
            covered = np.zeros(t, dtype=bool)
            for w in make_windows(seq, window_len=60, stride=30):
                covered[w.offset:w.offset + w.length] = True
            assert covered.all(), f"T={t} leaves uncovered frames"

    def test_short_source_padded_with_final_frame(self):
        seq = _seq(_pattern((0, 45), (1, 5)))
        (w,) = make_windows(seq, window_len=60, stride=30)
        assert w.n_pad == 10 and w.length == 60
        np.testing.assert_array_equal(w.frames[:50], seq.frames)
        np.testing.assert_array_equal(w.frames[50:], np.repeat(seq.frames[-1:], 10, axis=0))
        assert (w.labels[50:] == seq.labels[-1]).all()

    def test_window_slices_are_views_of_source(self):
        seq = _seq(_pattern((0, 90)))
        (w, *_rest) = make_windows(seq, window_len=60, stride=30)
        assert w.source is seq
        np.testing.assert_array_equal(w.frames, seq.frames[:60])

    def test_bad_arguments(self):
        seq = _seq(_pattern((0, 10)))
        with pytest.raises(ContractError):
            make_windows(seq, window_len=0)
        with pytest.raises(ContractError):
            make_windows(seq, stride=0)


# ---------------------------------------------------------------------------
# Run extraction and balanced pairing
# ---------------------------------------------------------------------------

class TestRuns:
    def test_label_runs_tile_the_sequence(self):
        runs = label_runs(_pattern((0, 3), (1, 2), (0, 4)))
        assert runs == [(0, 3, 0), (3, 5, 1), (5, 9, 0)]

    def test_single_run(self):
        assert label_runs(_pattern((1, 5))) == [(0, 5, 1)]


class TestBalancePairs:
    def test_film_taken_immediately_before_run(self):
        seq = _seq(_pattern((0, 20), (1, 10), (0, 30)))
        (pair,) = balance_pairs(seq)
        assert (pair.intro.offset, pair.intro.length) == (20, 10)
        assert (pair.film.offset, pair.film.length) == (10, 10)
        assert pair.span() == (10, 30)
        assert pair.intro.labels.all() and not pair.film.labels.any()

    def test_run_at_start_pairs_with_following_film(self):
        seq = _seq(_pattern((1, 10), (0, 20)))
        (pair,) = balance_pairs(seq)
        assert (pair.intro.offset, pair.intro.length) == (0, 10)
        assert (pair.film.offset, pair.film.length) == (10, 10)

    def test_two_positive_runs_give_two_pairs(self):
        seq = _seq(_pattern((1, 8), (0, 40), (1, 12)))
        intro_run, credits_run = balance_pairs(seq)
        assert (intro_run.intro.offset, intro_run.film.offset) == (0, 8)
        assert (credits_run.intro.offset, credits_run.intro.length) == (48, 12)
        assert (credits_run.film.offset, credits_run.film.length) == (36, 12)

    def test_short_gap_truncates_with_warning(self, caplog):
        seq = _seq(_pattern((0, 5), (1, 10), (0, 30)))
        with caplog.at_level(logging.WARNING, logger="tseg.data"):
            (pair,) = balance_pairs(seq)
        assert (pair.film.offset, pair.film.length) == (0, 5)
        assert (pair.intro.offset, pair.intro.length) == (5, 10)
        assert any("truncated" in r.message for r in caplog.records)

    def test_all_positive_has_no_film(self):
        with pytest.raises(PairingError, match="no adjacent film"):
            balance_pairs(_seq(_pattern((1, 30))))

    def test_all_negative_yields_no_pairs(self):
        assert balance_pairs(_seq(_pattern((0, 30)))) == []

    def test_unlabeled_rejected(self):
        seq = EmbeddingSequence("u", "s", np.ones((5, 2)))
        with pytest.raises(ContractError):
            balance_pairs(seq)


class TestTrainingWindows:
    def test_long_span_cut_with_stride(self):
        seq = _seq(_pattern((0, 40), (1, 40), (0, 40)))
        wins = build_training_windows([seq], window_len=60, stride=15)
        # Span is [0, 80): film [0,40) pairs the run [40,80).
        assert [w.offset for w in wins] == [0, 15, 20]
        assert all(w.length == 60 for w in wins)

    def test_short_span_widened_inside_source(self):
        seq = _seq(_pattern((0, 20), (1, 10), (0, 30)))
        (w,) = build_training_windows([seq], window_len=60, stride=30)
        assert w.length == 60 and w.n_pad == 0
        assert w.offset == 0
        np.testing.assert_array_equal(w.labels, seq.labels)

    def test_source_shorter_than_window_is_padded(self):
        seq = _seq(_pattern((0, 10), (1, 10), (0, 10)))
        (w,) = build_training_windows([seq], window_len=60, stride=30)
        assert w.n_pad == 30 and w.length == 60

    def test_windows_balanced_on_exact_span(self):
        seq = _seq(_pattern((0, 30), (1, 30), (0, 30)))
        wins = build_training_windows([seq], window_len=60, stride=60)
        assert len(wins) == 1
        assert int(wins[0].labels.sum()) == 30


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

def _write_corpus(tmp_path, spec):
    """spec: list of (id, series_id, labels). Returns the manifest path."""
    manifest = Manifest()
    rng = np.random.default_rng(1)
    for sid, series, labels in spec:
        seq = _seq(labels, sid=sid, series=series, rng=rng)
        write_sequence(seq, tmp_path / f"{sid}.icsq")
        manifest.entries.append(ManifestEntry(
            id=sid, series_id=series, path=f"{sid}.icsq",
            has_labels=True, T=seq.T,
        ))
    mpath = tmp_path / "manifest.tsv"
    save_manifest(manifest, mpath)
    return mpath


class TestManifest:
    def test_roundtrip(self, tmp_path):
        mpath = _write_corpus(tmp_path, [
            ("a1", "show-a", _pattern((1, 5), (0, 20))),
            ("b1", "show-b", _pattern((0, 10), (1, 5), (0, 10))),
        ])
        manifest = load_manifest(mpath)
        assert [e.id for e in manifest] == ["a1", "b1"]
        assert manifest.series_ids() == ["show-a", "show-b"]
        assert manifest.total_frames() == 50
        seqs = load_sequences(manifest)
        assert [s.id for s in seqs] == ["a1", "b1"]

    def test_duplicate_id_rejected(self, tmp_path):
        mpath = _write_corpus(tmp_path, [("a1", "s", _pattern((0, 5)))])
        text = mpath.read_text()
        record = text.splitlines()[1]
        mpath.write_text(text + record + "\n")
        with pytest.raises(FormatError, match="duplicate"):
            load_manifest(mpath)

    def test_missing_file_detected(self, tmp_path):
        mpath = _write_corpus(tmp_path, [("a1", "s", _pattern((0, 5)))])
        (tmp_path / "a1.icsq").unlink()
        with pytest.raises(FormatError, match="does not exist"):
            load_manifest(mpath)
        assert len(load_manifest(mpath, check_paths=False)) == 1

    def test_bad_header_rejected(self, tmp_path):
        mpath = tmp_path / "m.tsv"
        mpath.write_text("not a manifest\n")
        with pytest.raises(FormatError, match="header"):
            load_manifest(mpath)

    def test_bad_record_rejected(self, tmp_path):
        mpath = _write_corpus(tmp_path, [("a1", "s", _pattern((0, 5)))])
        mpath.write_text(mpath.read_text() + "only\tthree\tcols\n")
        with pytest.raises(FormatError, match="record"):
            load_manifest(mpath)

    def test_tab_in_id_rejected_on_save(self, tmp_path):
        manifest = Manifest([ManifestEntry("a\tb", "s", "x.icsq", False, 5)])
        with pytest.raises(ContractError):
            save_manifest(manifest, tmp_path / "m.tsv")


# ---------------------------------------------------------------------------
# Series splitting
# ---------------------------------------------------------------------------

def _manifest_for_series(counts):
    """counts: {series_id: [episode frame counts]}"""
    manifest = Manifest()
    for series, lens in counts.items():
        for i, t in enumerate(lens):
            manifest.entries.append(ManifestEntry(
                id=f"{series}-e{i}", series_id=series, path="unused.icsq",
                has_labels=True, T=t,
            ))
    return manifest


class TestSplit:
    def test_series_never_straddle_the_split(self):
        manifest = _manifest_for_series(
            {f"s{i}": [100, 120, 90] for i in range(8)}
        )
        train, val = split_by_series(manifest, 0.25, seed=3)
        assert set(train.series_ids()).isdisjoint(val.series_ids())
        assert len(train) + len(val) == len(manifest)
        assert sorted(e.id for e in list(train) + list(val)) == sorted(e.id for e in manifest)

    def test_split_tags_applied(self):
        manifest = _manifest_for_series({"a": [50], "b": [50], "c": [50]})
        train, val = split_by_series(manifest, 0.33, seed=0)
        assert all(e.split_tag == "train" for e in train)
        assert all(e.split_tag == "val" for e in val)

    def test_fraction_roughly_respected(self):
        manifest = _manifest_for_series({f"s{i}": [100] * 4 for i in range(10)})
        train, val = split_by_series(manifest, 0.2, seed=7)
        frac = val.total_frames() / manifest.total_frames()
        assert 0.1 <= frac <= 0.3

    def test_deterministic_per_seed(self):
        manifest = _manifest_for_series({f"s{i}": [80, 90] for i in range(6)})
        a = split_by_series(manifest, 0.3, seed=11)
        b = split_by_series(manifest, 0.3, seed=11)
        assert [e.id for e in a[1]] == [e.id for e in b[1]]

    def test_both_sides_nonempty(self):
        manifest = _manifest_for_series({"a": [100], "b": [100]})
        train, val = split_by_series(manifest, 0.5, seed=0)
        assert len(train) >= 1 and len(val) >= 1

    def test_errors(self):
        manifest = _manifest_for_series({"a": [100]})
        with pytest.raises(SplitError, match="2 series"):
            split_by_series(manifest, 0.2, seed=0)
        two = _manifest_for_series({"a": [100], "b": [100]})
        with pytest.raises(SplitError, match="val_fraction"):
            split_by_series(two, 1.5, seed=0)
