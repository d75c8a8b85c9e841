"""Standard MIDI File parsing, quantization, and serialization."""
import struct

import pytest

from pom.notes import NoteEvent
from pom.smf import SmfError, _quantize_16th, midi_to_notes, notes_to_midi


def build_smf(track_bytes: bytes, ppq: int = 480, fmt: int = 0,
              ntrks: int = 1) -> bytes:
    header = b"MThd" + struct.pack(">IHHH", 6, fmt, ntrks, ppq)
    return header + b"MTrk" + struct.pack(">I", len(track_bytes)) + track_bytes


END = bytes([0x00, 0xFF, 0x2F, 0x00])


class TestQuantize:
    def test_sixteenth_grid_ppq_480(self):
        # 16th = 120 ticks at PPQ 480
        assert _quantize_16th(0, 480) == 0
        assert _quantize_16th(120, 480) == 1
        assert _quantize_16th(59, 480) == 0
        assert _quantize_16th(60, 480) == 1   # half rounds up
        assert _quantize_16th(61, 480) == 1
        assert _quantize_16th(179, 480) == 1
        assert _quantize_16th(180, 480) == 2

    def test_other_ppq(self):
        assert _quantize_16th(24, 96) == 1
        assert _quantize_16th(11, 96) == 0
        assert _quantize_16th(12, 96) == 1


class TestRoundTrip:
    def test_serialize_parse(self):
        notes = [NoteEvent(60, 0, 4, 100), NoteEvent(64, 2, 2, 90),
                 NoteEvent(60, 4, 1, 80)]
        assert midi_to_notes(notes_to_midi(notes)) == notes

    def test_abutting_same_pitch(self):
        # note-off sorts before note-on at the shared tick, so the two
        # notes stay distinct instead of merging
        notes = [NoteEvent(72, 0, 4, 100), NoteEvent(72, 4, 4, 100)]
        assert midi_to_notes(notes_to_midi(notes)) == notes

    def test_empty(self):
        assert midi_to_notes(notes_to_midi([])) == []


class TestParsing:
    def test_running_status(self):
        track = bytes([0x00, 0x90, 60, 100]) \
            + bytes([0x00, 64, 100]) \
            + bytes([0x78, 60, 0]) + bytes([0x00, 64, 0]) + END
        notes = midi_to_notes(build_smf(track))
        assert notes == [NoteEvent(60, 0, 1, 100), NoteEvent(64, 0, 1, 100)]

    def test_note_off_event(self):
        track = bytes([0x00, 0x90, 60, 100, 0x78, 0x80, 60, 64]) + END
        assert midi_to_notes(build_smf(track)) == [NoteEvent(60, 0, 1, 100)]

    def test_format_1_two_tracks(self):
        t1 = bytes([0x00, 0x90, 60, 100, 0x78, 0x80, 60, 0]) + END
        t2 = bytes([0x00, 0x90, 67, 90, 0x78, 0x80, 67, 0]) + END
        data = b"MThd" + struct.pack(">IHHH", 6, 1, 2, 480) \
            + b"MTrk" + struct.pack(">I", len(t1)) + t1 \
            + b"MTrk" + struct.pack(">I", len(t2)) + t2
        assert midi_to_notes(data) == [NoteEvent(60, 0, 1, 100),
                                       NoteEvent(67, 0, 1, 90)]

    def test_meta_and_other_events_skipped(self):
        track = bytes([0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20]) \
            + bytes([0x00, 0xC0, 0x05]) \
            + bytes([0x00, 0xB0, 0x07, 0x64]) \
            + bytes([0x00, 0x90, 60, 100, 0x78, 0x80, 60, 0]) + END
        assert midi_to_notes(build_smf(track)) == [NoteEvent(60, 0, 1, 100)]

    def test_unclosed_note_warns(self):
        track = bytes([0x00, 0x90, 60, 100]) + bytes([0x78]) + END[1:]
        with pytest.warns(UserWarning, match="note-on without note-off"):
            notes = midi_to_notes(build_smf(track))
        assert notes == [NoteEvent(60, 0, 1, 100)]


class TestErrors:
    def test_bad_magic(self):
        with pytest.raises(SmfError, match="MThd"):
            midi_to_notes(b"RIFF" + bytes(20))

    def test_truncated(self):
        good = notes_to_midi([NoteEvent(60, 0, 1, 100)])
        with pytest.raises(SmfError, match="truncated|exceeds"):
            midi_to_notes(good[:20])

    def test_smpte_division(self):
        with pytest.raises(SmfError, match="SMPTE"):
            midi_to_notes(build_smf(END, ppq=0x8000 | 25))

    def test_unsupported_format(self):
        with pytest.raises(SmfError, match="format 2"):
            midi_to_notes(build_smf(END, fmt=2))

    def test_offset_reported(self):
        try:
            midi_to_notes(b"RIFF" + bytes(20))
        except SmfError as exc:
            assert exc.offset == 0
