"""Dataset pipeline: transposition, windowing, chord detection, corpus build."""
import json

import numpy as np
import pytest

from pom.dataset import (CHORD_VOCABULARY, build_dataset, chord_detect,
                         make_motif_corpus, transpose_augment, window_random)
from pom.notes import NoteEvent
from pom.roll import load_png
from pom.smf import notes_to_midi


class TestTranspose:
    def test_all_offsets_kept(self):
        notes = [NoteEvent(60, 0, 4, 100)]
        variants = transpose_augment(notes)
        assert sorted(variants) == list(range(-12, 13))
        assert variants[5][0].pitch == 65

    def test_out_of_range_variant_dropped(self):
        notes = [NoteEvent(110, 0, 4, 100)]  # +10 and up leave the range
        with pytest.warns(UserWarning, match="dropped"):
            variants = transpose_augment(notes)
        assert max(variants) == 9
        assert min(variants) == -12


class TestWindow:
    def test_short_song_zero_padded(self, rng):
        image = np.full((128, 100, 3), 7, dtype=np.uint8)
        window = window_random(image, rng)
        assert window.shape == (128, 512, 3)
        assert (window[:, :100] == 7).all()
        assert (window[:, 100:] == 0).all()

    def test_long_song_in_range(self, rng):
        image = np.zeros((128, 2000, 3), dtype=np.uint8)
        image[:, :, 0] = (np.arange(2000) % 256).astype(np.uint8)[None, :]
        for _ in range(5):
            window = window_random(image, rng)
            assert window.shape == (128, 512, 3)


class TestChordDetect:
    def test_major_triad(self):
        notes = [NoteEvent(p, 0, 4, 100) for p in (60, 64, 67)]  # C E G
        track = chord_detect(notes)
        assert track.index_pairs() == [(0, 4, 1)]
        assert CHORD_VOCABULARY[1] == "C:maj"

    def test_minor_triad(self):
        notes = [NoteEvent(p, 0, 4, 100) for p in (57, 60, 64)]  # A C E
        assert chord_detect(notes).index_pairs() == [(0, 4, 22)]
        assert CHORD_VOCABULARY[22] == "A:min"

    def test_silent_beat_gap(self):
        notes = [NoteEvent(p, 0, 4, 100) for p in (60, 64, 67)] \
            + [NoteEvent(p, 8, 4, 100) for p in (62, 66, 69)]  # rest between
        assert chord_detect(notes).index_pairs() == [(0, 4, 1), (8, 12, 3)]

    def test_equal_neighbors_merge(self):
        notes = [NoteEvent(p, 0, 8, 100) for p in (60, 64, 67)]
        assert chord_detect(notes).index_pairs() == [(0, 8, 1)]

    def test_empty(self):
        assert len(chord_detect([])) == 0


class TestBuildDataset:
    def test_end_to_end(self, tmp_path):
        midi_dir = tmp_path / "midi"
        midi_dir.mkdir()
        notes = [NoteEvent(60, 0, 4, 100), NoteEvent(64, 4, 4, 100)]
        (midi_dir / "song.mid").write_bytes(notes_to_midi(notes))
        (midi_dir / "broken.mid").write_bytes(b"not a midi file")

        out_dir = tmp_path / "dataset"
        manifest = build_dataset(midi_dir, out_dir, -2, 2)
        assert len(manifest["entries"]) == 5
        assert [e["file"] for e in manifest["errors"]] == ["broken.mid"]
        assert (out_dir / "song_+00.png").exists()
        assert (out_dir / "song_-02.png").exists()
        assert json.loads((out_dir / "manifest.json").read_text()) == manifest
        vocab = json.loads((out_dir / "chords.json").read_text())
        assert vocab["0"] == "N" and vocab["1"] == "C:maj"
        image = load_png(out_dir / "song_+00.png")
        assert image.shape == (128, 8, 3)

    def test_empty_dir(self, tmp_path):
        manifest = build_dataset(tmp_path, tmp_path / "out")
        assert manifest["entries"] == [] and manifest["errors"] == []


class TestMotifCorpus:
    def test_shapes_and_band(self, tmp_path):
        paths = make_motif_corpus(tmp_path, n_images=16, seed=0)
        assert len(paths) == 16
        high_band_mass = []
        for path in paths:
            image = load_png(path)
            assert image.shape == (64, 64, 3)
            assert image[:, :, 1].max() > 0
            # pitches above 72 live in crop rows 0..22
            high_band_mass.append(int(image[:23, :, 1].sum()))
        # both classes occur: octave-doubled images populate the high band,
        # plain images leave it empty
        doubled = [m for m in high_band_mass if m > 0]
        assert doubled and len(doubled) < len(high_band_mass)

    def test_seeded_determinism(self, tmp_path):
        make_motif_corpus(tmp_path / "a", n_images=3, seed=7)
        make_motif_corpus(tmp_path / "b", n_images=3, seed=7)
        for i in range(3):
            a = load_png(tmp_path / "a" / f"motif_{i:04d}.png")
            b = load_png(tmp_path / "b" / f"motif_{i:04d}.png")
            assert np.array_equal(a, b)
