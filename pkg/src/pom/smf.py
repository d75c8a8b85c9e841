"""Standard MIDI File reader/writer for quantized note lists.

Reads SMF format 0 and 1, collapses the tempo map (times are interpreted
in beats, so tempo events are irrelevant to the tick arithmetic), and
quantizes note boundaries to the nearest 16th.  Written files use PPQ
480 (16th = 120 ticks) at a fixed 120 BPM.

Parsing is strict about container structure and reports the byte offset
of any malformed data.
"""
from __future__ import annotations

import struct
import warnings

from .notes import NoteEvent

PPQ_OUT = 480
TICKS_PER_16TH_OUT = PPQ_OUT // 4   # 120
TEMPO_120_BPM = 500_000             # microseconds per quarter


class SmfError(ValueError):
    """Malformed Standard MIDI File; carries the offending byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class _Reader:
    def __init__(self, data: bytes, pos: int = 0, end: int | None = None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def need(self, n: int, what: str):
        if self.pos + n > self.end:
            raise SmfError(f"truncated while reading {what}", self.pos)

    def bytes(self, n: int, what: str) -> bytes:
        self.need(n, what)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str) -> int:
        return self.bytes(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack(">H", self.bytes(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack(">I", self.bytes(4, what))[0]

    def varlen(self, what: str) -> int:
        value = 0
        for _ in range(4):
            byte = self.u8(what)
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise SmfError(f"variable-length quantity too long in {what}",
                       self.pos)


def _quantize_16th(tick: int, ppq: int) -> int:
    """Nearest 16th-note grid position (half rounds up)."""
    # tick * 4 / ppq rounded to nearest integer, in exact integer arithmetic
    return (tick * 8 + ppq) // (2 * ppq)


def midi_to_notes(data: bytes) -> list[NoteEvent]:
    """Parse SMF bytes into quantized NoteEvents (16th-note ticks)."""
    r = _Reader(data)
    if r.bytes(4, "header chunk id") != b"MThd":
        raise SmfError("not a Standard MIDI File (missing MThd)", 0)
    header_len = r.u32("header length")
    if header_len < 6:
        raise SmfError(f"header length {header_len} < 6", r.pos - 4)
    fmt = r.u16("format")
    ntrks = r.u16("track count")
    division = r.u16("division")
    r.pos += header_len - 6
    if fmt not in (0, 1):
        raise SmfError(f"unsupported SMF format {fmt}", 8)
    if division & 0x8000:
        raise SmfError("SMPTE time division is not supported", 12)
    if division == 0:
        raise SmfError("PPQ of zero", 12)

    raw: list[tuple[int, int, int, int]] = []  # (onset_tick, end_tick, pitch, vel)
    for _ in range(ntrks):
        if r.bytes(4, "track chunk id") != b"MTrk":
            raise SmfError("expected MTrk chunk", r.pos - 4)
        track_len = r.u32("track length")
        tr = _Reader(data, r.pos, r.pos + track_len)
        if tr.end > len(data):
            raise SmfError("track length exceeds file size", r.pos - 4)
        r.pos = tr.end
        raw.extend(_parse_track(tr))

    notes = []
    for onset_tick, end_tick, pitch, vel in raw:
        onset = _quantize_16th(onset_tick, division)
        duration = max(1, _quantize_16th(end_tick, division) - onset)
        notes.append(NoteEvent(pitch, onset, duration, max(1, min(vel, 127))))
    notes.sort(key=lambda n: (n.onset, n.pitch))
    return notes


def _parse_track(tr: _Reader) -> list[tuple[int, int, int, int]]:
    tick = 0
    status = 0
    open_notes: dict[int, list[tuple[int, int]]] = {}  # pitch -> [(onset, vel)]
    finished: list[tuple[int, int, int, int]] = []

    def close(pitch: int, end_tick: int):
        onset, vel = open_notes[pitch].pop(0)
        if not open_notes[pitch]:
            del open_notes[pitch]
        finished.append((onset, max(end_tick, onset), pitch, vel))

    while tr.pos < tr.end:
        tick += tr.varlen("delta time")
        first = tr.u8("event status")
        if first & 0x80:
            status = first
        else:
            if status == 0:
                raise SmfError("running status without prior status byte",
                               tr.pos - 1)
            tr.pos -= 1
        kind = status & 0xF0
        if kind in (0x80, 0x90):
            pitch = tr.u8("note number")
            vel = tr.u8("note velocity")
            if kind == 0x90 and vel > 0:
                open_notes.setdefault(pitch, []).append((tick, vel))
            elif pitch in open_notes:
                close(pitch, tick)
        elif kind in (0xA0, 0xB0, 0xE0):
            tr.bytes(2, "channel event data")
        elif kind in (0xC0, 0xD0):
            tr.bytes(1, "channel event data")
        elif status == 0xFF:
            meta_type = tr.u8("meta type")
            length = tr.varlen("meta length")
            tr.bytes(length, "meta data")
            status = 0
            if meta_type == 0x2F:
                break
        elif status in (0xF0, 0xF7):
            length = tr.varlen("sysex length")
            tr.bytes(length, "sysex data")
            status = 0
        else:
            raise SmfError(f"unhandled status byte 0x{status:02X}", tr.pos - 1)

    for pitch in sorted(open_notes):
        warnings.warn(f"note-on without note-off for pitch {pitch}; "
                      "closed at track end", stacklevel=3)
        while pitch in open_notes:
            close(pitch, tick)
    return finished


def _varlen_bytes(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def notes_to_midi(notes: list[NoteEvent]) -> bytes:
    """Serialize notes to a single-track SMF at 120 BPM, PPQ 480."""
    events: list[tuple[int, int, bytes]] = []  # (tick, order, message)
    for note in notes:
        on_tick = note.onset * TICKS_PER_16TH_OUT
        off_tick = note.end * TICKS_PER_16TH_OUT
        events.append((on_tick, 1, bytes([0x90, note.pitch, note.velocity])))
        events.append((off_tick, 0, bytes([0x80, note.pitch, 0])))
    events.sort(key=lambda e: (e[0], e[1]))

    body = bytearray()
    body += _varlen_bytes(0) + bytes([0xFF, 0x51, 0x03])
    body += TEMPO_120_BPM.to_bytes(3, "big")
    tick = 0
    for ev_tick, _, message in events:
        body += _varlen_bytes(ev_tick - tick)
        body += message
        tick = ev_tick
    body += _varlen_bytes(0) + bytes([0xFF, 0x2F, 0x00])

    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, PPQ_OUT)
    track = b"MTrk" + struct.pack(">I", len(body)) + bytes(body)
    return header + track
