"""Training-raster construction from a MIDI corpus.

Per song: collapse tempo to 120 BPM (implicit in the tick-based MIDI
reader), transpose -12..+12 semitones, detect chords with a simple triad
matcher, render one long N_t x 128 image per kept transposition, and
write PNGs plus a manifest.  Also provides random 512-column windowing
for training and a synthetic motif corpus generator for desk-scale runs.
"""
from __future__ import annotations

import json
import logging
import warnings
from pathlib import Path

import numpy as np

from .notes import (PITCH_MAX, PITCH_MIN, ChordLabel, ChordSpan, ChordTrack,
                    NoteEvent, notes_span_ticks)
from .roll import ROLL_WIDTH, load_png, render_roll, save_png
from .smf import midi_to_notes

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
TICKS_PER_BEAT = 4

PITCH_CLASSES = ["C", "C#", "D", "D#", "E", "F",
                 "F#", "G", "G#", "A", "A#", "B"]

# Chord vocabulary: index 0 = no chord, 1-12 = major triads C..B,
# 13-24 = minor triads C..B.  Stored as a JSON sidecar next to datasets.
CHORD_VOCABULARY: dict[int, str] = {0: "N"}
CHORD_VOCABULARY.update({1 + pc: f"{PITCH_CLASSES[pc]}:maj" for pc in range(12)})
CHORD_VOCABULARY.update({13 + pc: f"{PITCH_CLASSES[pc]}:min" for pc in range(12)})

_TRIAD_TEMPLATES: list[tuple[int, np.ndarray]] = []
for _pc in range(12):
    _major = np.zeros(12)
    _major[[_pc, (_pc + 4) % 12, (_pc + 7) % 12]] = 1.0
    _TRIAD_TEMPLATES.append((1 + _pc, _major))
for _pc in range(12):
    _minor = np.zeros(12)
    _minor[[_pc, (_pc + 3) % 12, (_pc + 7) % 12]] = 1.0
    _TRIAD_TEMPLATES.append((13 + _pc, _minor))


def transpose_augment(notes: list[NoteEvent],
                      lo: int = -12, hi: int = 12) -> dict[int, list[NoteEvent]]:
    """All transpositions lo..hi; variants pushing any pitch out of the
    renderable range are dropped with a warning."""
    variants: dict[int, list[NoteEvent]] = {}
    for offset in range(lo, hi + 1):
        shifted = []
        ok = True
        for note in notes:
            pitch = note.pitch + offset
            if not PITCH_MIN <= pitch <= PITCH_MAX:
                ok = False
                break
            shifted.append(note.transposed(offset))
        if ok:
            variants[offset] = shifted
        else:
            warnings.warn(f"transposition {offset:+d} dropped: pitch leaves "
                          f"[{PITCH_MIN}, {PITCH_MAX}]", stacklevel=2)
    return variants


def window_random(image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random 512-column window of an (128, N_t, 3) song raster, padded
    with zeros past the end of the song."""
    n_ticks = image.shape[1]
    start = int(rng.integers(0, max(1, n_ticks - ROLL_WIDTH)))
    window = np.zeros((image.shape[0], ROLL_WIDTH) + image.shape[2:],
                      dtype=image.dtype)
    chunk = image[:, start:start + ROLL_WIDTH]
    window[:, :chunk.shape[1]] = chunk
    return window


def chord_detect(notes: list[NoteEvent]) -> ChordTrack:
    """Beat-level chord labels: per beat (4 ticks), a 12-bin chroma of
    sounding pitches matched against 24 major/minor triad templates by
    cosine similarity; silent beats get no chord; equal neighbors merge."""
    n_ticks = notes_span_ticks(notes)
    n_beats = (n_ticks + TICKS_PER_BEAT - 1) // TICKS_PER_BEAT
    if n_beats == 0:
        return ChordTrack([])

    chroma = np.zeros((n_beats, 12))
    for note in notes:
        for tick in range(note.onset, note.end):
            chroma[tick // TICKS_PER_BEAT, note.pitch % 12] += 1.0

    labels = np.zeros(n_beats, dtype=np.int64)
    for beat in range(n_beats):
        vec = chroma[beat]
        norm = np.linalg.norm(vec)
        if norm == 0:
            continue  # silent beat: no chord
        best_index, best_sim = 0, -1.0
        for index, template in _TRIAD_TEMPLATES:
            sim = float(vec @ template) / (norm * np.linalg.norm(template))
            if sim > best_sim:
                best_index, best_sim = index, sim
        labels[beat] = best_index

    spans: list[ChordSpan] = []
    beat = 0
    while beat < n_beats:
        end = beat
        while end < n_beats and labels[end] == labels[beat]:
            end += 1
        if labels[beat] != 0:
            index = int(labels[beat])
            spans.append(ChordSpan(beat * TICKS_PER_BEAT,
                                   end * TICKS_PER_BEAT,
                                   ChordLabel(index, CHORD_VOCABULARY[index])))
        beat = end
    return ChordTrack(spans)


def build_dataset(midi_dir: str | Path, out_dir: str | Path,
                  transpose_min: int = -12,
                  transpose_max: int = 12) -> dict:
    """Render every .mid file under midi_dir at every kept transposition.

    Writes {song}_{offset:+03d}.png files, the chord vocabulary sidecar,
    and manifest.json; returns the manifest dict.  Unreadable files are
    skipped and listed in the manifest's error section.
    """
    midi_dir = Path(midi_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    errors = []
    for path in sorted(midi_dir.glob("*.mid")):
        try:
            notes = midi_to_notes(path.read_bytes())
        except (ValueError, OSError) as exc:
            errors.append({"file": path.name, "error": str(exc)})
            logger.warning("skipping %s: %s", path.name, exc)
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            variants = transpose_augment(notes, transpose_min, transpose_max)
        for offset, shifted in sorted(variants.items()):
            n_ticks = max(1, notes_span_ticks(shifted))
            chords = chord_detect(shifted)
            image = render_roll(shifted, chords, n_ticks)
            name = f"{path.stem}_{offset:+03d}.png"
            save_png(image, out_dir / name)
            entries.append({"song": path.stem, "transposition": offset,
                            "path": name, "n_ticks": n_ticks})

    manifest = {"version": MANIFEST_VERSION, "entries": entries,
                "errors": errors}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    (out_dir / "chords.json").write_text(
        json.dumps({str(k): v for k, v in CHORD_VOCABULARY.items()}, indent=2))
    return manifest


# ---------------------------------------------------------------------------
# Synthetic motif corpus (desk-scale training data)
# ---------------------------------------------------------------------------

MOTIF_SIZE = 64
MOTIF_ROW_LO = 32        # crop rows 32..95 -> pitches 32..95
MOTIF_PITCH_LO = 40      # motifs stay in this band; the top of the crop
MOTIF_PITCH_HI = 72      # (pitches above 72) holds octave doublings only
MOTIF_DOUBLING = 24      # doubled class: each note copied up two octaves


def make_motif_corpus(out_dir: str | Path, n_images: int = 256,
                      seed: int = 0) -> list[Path]:
    """Generate 64x64 arpeggio/scale rasters via the roll codec.

    Each image is a rendered 64-tick roll cropped to the 64-row band of
    pitches 32..95.  Motifs occupy pitches 40..72.  Half of the images are
    a "doubled" class: the motif is twice as dense (note every 2 ticks
    instead of 4) and every note is copied two octaves up, populating the
    high-pitch top of the crop.  In the other half that band is empty, so
    its expected note mass depends strongly on the visible motif density.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(n_images):
        notes = _random_motif(rng)
        image = render_roll(notes, None, MOTIF_SIZE)
        crop = image[MOTIF_ROW_LO:MOTIF_ROW_LO + MOTIF_SIZE]
        path = out_dir / f"motif_{i:04d}.png"
        save_png(crop, path)
        paths.append(path)
    return paths


def _random_motif(rng: np.random.Generator) -> list[NoteEvent]:
    kind = rng.choice(["scale_up", "scale_down", "arpeggio", "broken"])
    root = int(rng.integers(MOTIF_PITCH_LO, MOTIF_PITCH_LO + 12))
    doubled = bool(rng.integers(0, 2))
    step_ticks = 2 if doubled else 4
    duration = step_ticks
    velocity = int(rng.integers(80, 128))
    if kind in ("scale_up", "scale_down"):
        intervals = [0, 2, 4, 5, 7, 9, 11, 12]
        if kind == "scale_down":
            intervals = intervals[::-1]
    elif kind == "arpeggio":
        intervals = [0, 4, 7, 12, 7, 4, 0, 4]
    else:
        intervals = [0, 7, 4, 12, 7, 16, 12, 19]
    notes = []
    tick = int(rng.integers(0, 4))
    index = 0
    while tick + duration <= MOTIF_SIZE:
        pitch = min(root + intervals[index % len(intervals)], MOTIF_PITCH_HI)
        notes.append(NoteEvent(pitch, tick, duration, velocity))
        if doubled:
            notes.append(NoteEvent(pitch + MOTIF_DOUBLING, tick, duration,
                                   velocity))
        tick += step_ticks
        index += 1
    return notes
