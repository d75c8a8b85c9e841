"""Piano-roll raster codec: render/decode, chord colors, fold/unfold."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pom.notes import ChordLabel, ChordSpan, ChordTrack, NoteEvent
from pom.roll import (FOLDED_SIZE, HEIGHT, ROLL_WIDTH, RollError,
                      decode_chord_color, decode_roll, encode_chord_color,
                      float_to_roll, fold, load_png, render_roll,
                      roll_to_float, save_png, unfold)

from conftest import random_notes


class TestChordColors:
    def test_exhaustive_identity(self):
        for index in range(729):
            assert decode_chord_color(*encode_chord_color(index)) == index

    def test_zero_is_black(self):
        assert encode_chord_color(0) == (0, 0, 0)

    def test_out_of_range(self):
        with pytest.raises(RollError):
            encode_chord_color(729)
        with pytest.raises(RollError):
            encode_chord_color(-1)

    @given(st.integers(0, 728),
           st.tuples(st.integers(-14, 14), st.integers(-14, 14),
                     st.integers(-14, 14)))
    def test_noise_robust(self, index, noise):
        r, g, b = encode_chord_color(index)
        channels = [min(255, max(0, c + d))
                    for c, d in zip((r, g, b), noise)]
        # clipping at 0/255 can only move a channel toward its true digit
        assert decode_chord_color(*channels) == index


class TestRenderDecode:
    def test_note_pixels(self):
        image = render_roll([NoteEvent(60, 4, 3, 127)], None, 16)
        row = 127 - 60
        assert image.shape == (128, 16, 3)
        assert list(image[row, 4:7, 1]) == [255, 255, 255]
        assert image[row, 4, 0] == 255       # onset marker
        assert image[row, 5, 0] == 0
        assert image[row, 7, 1] == 0

    def test_round_trip_simple(self):
        notes = [NoteEvent(60, 0, 4, 100), NoteEvent(64, 4, 2, 80),
                 NoteEvent(8, 10, 1, 127), NoteEvent(119, 0, 16, 64)]
        decoded, _ = decode_roll(render_roll(notes, None, 16))
        assert decoded == sorted(notes, key=lambda n: (n.onset, n.pitch))

    def test_onset_marker_splits_abutting_notes(self):
        notes = [NoteEvent(72, 0, 4, 100), NoteEvent(72, 4, 4, 100)]
        decoded, _ = decode_roll(render_roll(notes, None, 8))
        assert decoded == notes

    def test_chord_border_round_trip(self):
        chords = ChordTrack([ChordSpan(0, 8, ChordLabel(1)),
                             ChordSpan(8, 16, ChordLabel(13))])
        image = render_roll([], chords, 16)
        assert tuple(image[0, 0]) == encode_chord_color(1)
        assert tuple(image[127, 12]) == encode_chord_color(13)
        _, decoded = decode_roll(image)
        assert decoded.index_pairs() == chords.index_pairs()

    def test_border_pitch_rejected(self):
        for pitch in (7, 120):
            with pytest.raises(RollError):
                render_roll([NoteEvent(pitch, 0, 1, 100)], None, 8)

    def test_note_outside_width_rejected(self):
        with pytest.raises(RollError):
            render_roll([NoteEvent(60, 6, 4, 100)], None, 8)

    def test_overlap_warns(self):
        notes = [NoteEvent(60, 0, 8, 100), NoteEvent(60, 4, 4, 100)]
        with pytest.warns(UserWarning, match="overlapping"):
            render_roll(notes, None, 16)

    def test_dim_pixels_ignored(self):
        image = np.zeros((128, 8, 3), dtype=np.uint8)
        image[60, 2:5, 1] = 127  # just below threshold
        notes, _ = decode_roll(image)
        assert notes == []

    def test_decode_shape_check(self):
        with pytest.raises(RollError):
            decode_roll(np.zeros((64, 8, 3), dtype=np.uint8))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1))
    def test_round_trip_random(self, seed):
        rng = np.random.default_rng(seed)
        notes = random_notes(rng, n=16, width=128)
        decoded, _ = decode_roll(render_roll(notes, None, 128))
        assert decoded == notes


class TestFold:
    def test_shapes(self):
        x = np.zeros((128, 512, 3), dtype=np.uint8)
        assert fold(x).shape == (256, 256, 3)
        assert unfold(fold(x)).shape == (128, 512, 3)

    def test_coordinates(self):
        x = np.arange(128 * 512, dtype=np.int64).reshape(128, 512)
        folded = fold(x)
        assert folded[50, 300 - 256] == x[50, 300 - 256]
        assert folded[178, 211] == x[50, 300]  # right half reversed below

    def test_involution(self, rng):
        x = rng.integers(0, 256, (128, 512, 3)).astype(np.uint8)
        assert np.array_equal(unfold(fold(x)), x)

    def test_shape_checks(self):
        with pytest.raises(RollError):
            fold(np.zeros((128, 256)))
        with pytest.raises(RollError):
            unfold(np.zeros((128, 512)))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1))
    def test_involution_property(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.integers(0, 256, (HEIGHT, ROLL_WIDTH)).astype(np.uint8)
        assert np.array_equal(unfold(fold(x)), x)
        y = rng.integers(0, 256, (FOLDED_SIZE, FOLDED_SIZE)).astype(np.uint8)
        assert np.array_equal(fold(unfold(y)), y)


class TestDomainAndPng:
    def test_float_round_trip(self, rng):
        image = rng.integers(0, 256, (128, 16, 3)).astype(np.uint8)
        assert np.array_equal(float_to_roll(roll_to_float(image)), image)

    def test_float_range(self):
        x = roll_to_float(np.array([[[0, 128, 255]]], dtype=np.uint8))
        assert x.min() == -1.0 and x.max() == 1.0

    def test_float_clips(self):
        assert float_to_roll(np.array([2.0])) == np.array([255], np.uint8)
        assert float_to_roll(np.array([-2.0])) == np.array([0], np.uint8)

    def test_png_round_trip(self, rng, tmp_path):
        image = rng.integers(0, 256, (128, 64, 3)).astype(np.uint8)
        save_png(image, tmp_path / "x.png")
        assert np.array_equal(load_png(tmp_path / "x.png"), image)
