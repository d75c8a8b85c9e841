import numpy as np
import pytest

from pom.notes import NoteEvent


def random_notes(rng: np.random.Generator, n: int = 12, width: int = 512,
                 velocity_lo: int = 64) -> list[NoteEvent]:
    """Non-overlapping random notes that render/decode losslessly.

    One note per (pitch, slot) cell with a one-tick gap so runs never
    merge; velocities start at 64 because dimmer greens fall below the
    half-scale decode threshold.
    """
    notes = []
    used = set()
    while len(notes) < n:
        pitch = int(rng.integers(8, 120))
        slot = int(rng.integers(0, width // 8))
        if (pitch, slot) in used:
            continue
        used.add((pitch, slot))
        onset = slot * 8
        duration = int(rng.integers(1, 8))  # leave a gap inside the slot
        velocity = int(rng.integers(velocity_lo, 128))
        notes.append(NoteEvent(pitch, onset, duration, velocity))
    notes.sort(key=lambda x: (x.onset, x.pitch))
    return notes


@pytest.fixture
def rng():
    return np.random.default_rng(0)
