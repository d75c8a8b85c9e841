"""Piano-roll raster codec.

Encodes quantized notes into 128-row RGB images (one column per 16th
note) and decodes them back.  Note bodies are green with brightness
proportional to velocity, onsets carry an additional red marker, and the
top/bottom 8 rows hold a base-9 color encoding of the active chord.
Also provides the fold/unfold transform that turns a 512x128 roll into a
square 256x256 raster (right half reversed and placed below the left
half) and its exact inverse.

All images are numpy uint8 arrays of shape (height, width, 3).
"""
from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np
from PIL import Image

from .notes import (CHORD_INDEX_MAX, PITCH_MAX, PITCH_MIN, ChordLabel,
                    ChordSpan, ChordTrack, NoteEvent)

HEIGHT = 128
BORDER_ROWS = 8          # rows 0-7 and 120-127 are chord-border rows
NOTE_ROW_MIN = 8         # row of pitch 119
NOTE_ROW_MAX = 119       # row of pitch 8
ROLL_WIDTH = 512         # standard window width (32 bars of 16ths)
FOLDED_SIZE = 256

NOTE_THRESHOLD = 128     # G >= this marks a sounding note pixel
ONSET_THRESHOLD = 128    # R >= this marks an onset column

CHORD_COLOR_STEP = 30    # base-9 digits spaced 30 apart per channel


class RollError(ValueError):
    """Raised for invalid codec inputs (bad pitch range, bad shapes)."""


def pitch_to_row(pitch: int) -> int:
    return 127 - pitch


def row_to_pitch(row: int) -> int:
    return 127 - row


def velocity_to_level(velocity: int) -> int:
    return int(round(velocity * 255 / 127))


def level_to_velocity(level: float) -> int:
    return int(np.clip(round(level * 127 / 255), 1, 127))


# ---------------------------------------------------------------------------
# Chord color codec
# ---------------------------------------------------------------------------

def encode_chord_color(index: int) -> tuple[int, int, int]:
    """Map a chord index 0-728 to an RGB triple via base-9 digits * 30."""
    if not 0 <= index <= CHORD_INDEX_MAX:
        raise RollError(f"chord index {index} outside 0-{CHORD_INDEX_MAX}")
    d2, rem = divmod(index, 81)
    d1, d0 = divmod(rem, 9)
    return (CHORD_COLOR_STEP * d2, CHORD_COLOR_STEP * d1, CHORD_COLOR_STEP * d0)


def decode_chord_color(r: float, g: float, b: float) -> int:
    """Inverse of encode_chord_color; snaps each channel to the nearest
    multiple of 30 so it tolerates per-channel perturbation up to +/-14."""
    digits = [int(np.clip(round(c / CHORD_COLOR_STEP), 0, 8)) for c in (r, g, b)]
    return 81 * digits[0] + 9 * digits[1] + digits[2]


# ---------------------------------------------------------------------------
# Render / decode
# ---------------------------------------------------------------------------

def render_roll(notes: list[NoteEvent], chords: ChordTrack | None,
                width: int) -> np.ndarray:
    """Render notes and chord borders into a (128, width, 3) uint8 raster."""
    if width < 1:
        raise RollError("width must be >= 1")
    image = np.zeros((HEIGHT, width, 3), dtype=np.uint8)

    by_pitch: dict[int, list[NoteEvent]] = {}
    for note in notes:
        if not PITCH_MIN <= note.pitch <= PITCH_MAX:
            raise RollError(
                f"pitch {note.pitch} outside renderable range "
                f"{PITCH_MIN}-{PITCH_MAX} (border rows are reserved)")
        if note.onset < 0 or note.end > width:
            raise RollError(
                f"note at tick {note.onset} (duration {note.duration}) "
                f"does not fit in width {width}")
        by_pitch.setdefault(note.pitch, []).append(note)

    for pitch, group in by_pitch.items():
        group.sort(key=lambda n: n.onset)
        row = pitch_to_row(pitch)
        prev_end = -1
        for note in group:
            if note.onset < prev_end:
                warnings.warn(
                    f"overlapping notes at pitch {pitch}, tick {note.onset}: "
                    "later onset splits the earlier run", stacklevel=2)
            prev_end = max(prev_end, note.end)
            level = velocity_to_level(note.velocity)
            image[row, note.onset:note.end, 1] = level
            image[row, note.onset, 0] = level

    if chords is not None:
        for span in chords:
            color = encode_chord_color(span.label.index)
            lo = max(span.start, 0)
            hi = min(span.end, width)
            if hi <= lo:
                continue
            image[:BORDER_ROWS, lo:hi] = color
            image[HEIGHT - BORDER_ROWS:, lo:hi] = color
    return image


def decode_roll(image: np.ndarray) -> tuple[list[NoteEvent], ChordTrack]:
    """Decode a raster back to notes and chord spans.

    Noisy pixels below the half-scale thresholds are ignored; the decoder
    never emits a note with duration 0 or a pitch in the border rows.
    """
    if image.ndim != 3 or image.shape[0] != HEIGHT or image.shape[2] != 3:
        raise RollError(f"expected (128, W, 3) image, got {image.shape}")
    width = image.shape[1]
    notes: list[NoteEvent] = []

    green = image[:, :, 1].astype(np.int64)
    red = image[:, :, 0].astype(np.int64)
    for row in range(NOTE_ROW_MIN, NOTE_ROW_MAX + 1):
        active = green[row] >= NOTE_THRESHOLD
        if not active.any():
            continue
        pitch = row_to_pitch(row)
        # run boundaries of the active mask
        padded = np.concatenate(([False], active, [False]))
        starts = np.flatnonzero(~padded[:-1] & padded[1:])
        ends = np.flatnonzero(padded[:-1] & ~padded[1:])
        onsets = red[row] >= ONSET_THRESHOLD
        for a, b in zip(starts, ends):
            marks = np.flatnonzero(onsets[a:b]) + a
            cuts = [a] + [m for m in marks if m != a] + [b]
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                velocity = level_to_velocity(float(green[row, lo:hi].mean()))
                notes.append(NoteEvent(pitch, int(lo), int(hi - lo), velocity))

    notes.sort(key=lambda n: (n.onset, n.pitch))

    top = image[:BORDER_ROWS].astype(np.float64).mean(axis=0)  # (W, 3)
    indices = np.array([decode_chord_color(*top[c]) for c in range(width)])
    spans: list[ChordSpan] = []
    col = 0
    while col < width:
        run_end = col
        while run_end < width and indices[run_end] == indices[col]:
            run_end += 1
        if indices[col] != 0:
            spans.append(ChordSpan(col, run_end, ChordLabel(int(indices[col]))))
        col = run_end
    return notes, ChordTrack(spans)


# ---------------------------------------------------------------------------
# Fold / unfold
# ---------------------------------------------------------------------------

def fold(image: np.ndarray) -> np.ndarray:
    """Fold a (128, 512, ...) raster into (256, 256, ...): the right half is
    reversed horizontally and placed below the left half."""
    if image.shape[0] != HEIGHT or image.shape[1] != ROLL_WIDTH:
        raise RollError(f"fold expects (128, 512, ...), got {image.shape}")
    top = image[:, :FOLDED_SIZE]
    bottom = image[:, FOLDED_SIZE:][:, ::-1]
    return np.concatenate([top, bottom], axis=0)


def unfold(folded: np.ndarray) -> np.ndarray:
    """Exact inverse of fold."""
    if folded.shape[0] != FOLDED_SIZE or folded.shape[1] != FOLDED_SIZE:
        raise RollError(f"unfold expects (256, 256, ...), got {folded.shape}")
    top = folded[:HEIGHT]
    bottom = folded[HEIGHT:][:, ::-1]
    return np.concatenate([top, bottom], axis=1)


# ---------------------------------------------------------------------------
# Image <-> diffusion domain and PNG I/O
# ---------------------------------------------------------------------------

def roll_to_float(image: np.ndarray) -> np.ndarray:
    """uint8 [0, 255] -> float32 [-1, 1]."""
    return (image.astype(np.float32) / 127.5) - 1.0


def float_to_roll(x: np.ndarray) -> np.ndarray:
    """float [-1, 1] -> uint8 [0, 255], clipping out-of-range values."""
    return np.clip(np.round((x + 1.0) * 127.5), 0, 255).astype(np.uint8)


def save_png(image: np.ndarray, path: str | Path) -> None:
    Image.fromarray(image, mode="RGB" if image.ndim == 3 else "L").save(path)


def load_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))
