"""Symbolic note and chord types shared across the package.

Time is measured in 16th-note ticks throughout; one tick is one pixel
column in the rendered piano roll.
"""
from __future__ import annotations

from dataclasses import dataclass, field

PITCH_MIN = 8
PITCH_MAX = 119

CHORD_INDEX_MAX = 728  # 9**3 - 1; index 0 is reserved for "no chord"


@dataclass(frozen=True, order=True)
class NoteEvent:
    """A quantized note: pitch, onset tick, duration in ticks, velocity."""

    pitch: int
    onset: int
    duration: int
    velocity: int

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside MIDI range 0-127")
        if self.onset < 0:
            raise ValueError(f"onset {self.onset} must be >= 0")
        if self.duration < 1:
            raise ValueError(f"duration {self.duration} must be >= 1")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity {self.velocity} outside 1-127")

    @property
    def end(self) -> int:
        return self.onset + self.duration

    def transposed(self, semitones: int) -> "NoteEvent":
        return NoteEvent(self.pitch + semitones, self.onset, self.duration,
                         self.velocity)


@dataclass(frozen=True)
class ChordLabel:
    """A chord vocabulary entry; index 0 means "no chord" (black border)."""

    index: int
    name: str | None = None

    def __post_init__(self):
        if not 0 <= self.index <= CHORD_INDEX_MAX:
            raise ValueError(
                f"chord index {self.index} outside 0-{CHORD_INDEX_MAX}")


@dataclass(frozen=True)
class ChordSpan:
    start: int
    end: int
    label: ChordLabel

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError("chord span must have end > start")


@dataclass
class ChordTrack:
    """Ordered, non-overlapping chord spans over the tick axis."""

    spans: list[ChordSpan] = field(default_factory=list)

    def __post_init__(self):
        prev_end = None
        for span in self.spans:
            if prev_end is not None and span.start < prev_end:
                raise ValueError("chord spans overlap or are unsorted")
            prev_end = span.end

    def __iter__(self):
        return iter(self.spans)

    def __len__(self):
        return len(self.spans)

    def index_pairs(self) -> list[tuple[int, int, int]]:
        """(start, end, index) triples, ignoring names; useful for equality."""
        return [(s.start, s.end, s.label.index) for s in self.spans]


def notes_span_ticks(notes: list[NoteEvent]) -> int:
    """Total tick extent of a note list (last end), 0 when empty."""
    return max((n.end for n in notes), default=0)
