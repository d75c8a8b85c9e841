"""Objective evaluation of generated note populations.

Diversity: pitch standard deviation and duration inter-quartile range.
Similarity to a reference corpus: overlapped histogram area for pitches
and durations, and KL divergence between Gaussian kernel density
estimates (Silverman bandwidth) of the two populations.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .roll import decode_roll, load_png
from .smf import midi_to_notes

logger = logging.getLogger(__name__)

PITCH_BINS = 128          # integer pitches 0..127
DURATION_BIN_MAX = 128    # durations 1..128 ticks; longer clamps into the last bin
KDE_GRID_POINTS = 512
KDE_FLOOR = 1e-10


class MetricsError(ValueError):
    """Empty or degenerate sample populations."""


@dataclass
class NoteStats:
    pitches: list[int]
    durations: list[int]

    @classmethod
    def from_notes(cls, notes) -> "NoteStats":
        return cls([n.pitch for n in notes], [n.duration for n in notes])

    def extend(self, other: "NoteStats") -> None:
        self.pitches.extend(other.pitches)
        self.durations.extend(other.durations)


@dataclass
class MetricsReport:
    sigma_p: float
    iqr_d: float
    d_p: float
    d_d: float
    dkl_p: float
    dkl_d: float
    n_gen: int
    n_ref: int

    def to_dict(self) -> dict:
        return asdict(self)


def pitch_std(stats: NoteStats) -> float:
    """Population standard deviation of pitches."""
    if not stats.pitches:
        raise MetricsError("no pitches to evaluate")
    return float(np.std(stats.pitches))


def duration_iqr(stats: NoteStats) -> float:
    """Q75 - Q25 of durations with linear-interpolation quantiles."""
    if len(stats.durations) < 2:
        raise MetricsError("need at least 2 durations for an IQR")
    q25, q75 = np.quantile(stats.durations, [0.25, 0.75])
    return float(q75 - q25)


def _histogram(samples, kind: str) -> np.ndarray:
    values = np.asarray(samples)
    if kind == "pitch":
        counts = np.bincount(np.clip(values, 0, PITCH_BINS - 1),
                             minlength=PITCH_BINS)
    else:
        counts = np.bincount(np.clip(values, 1, DURATION_BIN_MAX) - 1,
                             minlength=DURATION_BIN_MAX)
    return counts / counts.sum()


def hist_overlap(p_samples, q_samples, binning: str = "pitch") -> float:
    """Overlapped area sum(min(p_i, q_i)) over shared integer bins;
    binning is "pitch" (0-127) or "duration" (1-128, clamped)."""
    if len(p_samples) == 0 or len(q_samples) == 0:
        raise MetricsError("hist_overlap needs nonempty samples")
    if binning not in ("pitch", "duration"):
        raise MetricsError(f"unknown binning '{binning}'")
    p = _histogram(p_samples, binning)
    q = _histogram(q_samples, binning)
    return float(np.minimum(p, q).sum())


def _silverman_bandwidth(values: np.ndarray) -> float:
    std = float(np.std(values))
    q25, q75 = np.quantile(values, [0.25, 0.75])
    iqr = float(q75 - q25)
    spread = min(std, iqr / 1.34)
    if spread == 0:
        spread = max(std, iqr / 1.34)  # integer data often has IQR 0
    if spread == 0:
        raise MetricsError("degenerate sample set (all values identical)")
    return 0.9 * spread * len(values) ** (-1 / 5)


def kde_kl(p_samples, q_samples) -> float:
    """KL(p || q) between Gaussian KDEs of the two sample sets, evaluated
    on a 512-point grid over the padded union support, with densities
    floored at 1e-10 and renormalized; trapezoidal integration."""
    p = np.asarray(p_samples, dtype=np.float64)
    q = np.asarray(q_samples, dtype=np.float64)
    if len(np.unique(p)) < 2 or len(np.unique(q)) < 2:
        raise MetricsError("kde_kl needs >= 2 distinct values on each side")
    bw_p = _silverman_bandwidth(p)
    bw_q = _silverman_bandwidth(q)
    pad = 3 * max(bw_p, bw_q)
    lo = min(p.min(), q.min()) - pad
    hi = max(p.max(), q.max()) + pad
    grid = np.linspace(lo, hi, KDE_GRID_POINTS)

    def density(values: np.ndarray, bw: float) -> np.ndarray:
        z = (grid[:, None] - values[None, :]) / bw
        dens = np.exp(-0.5 * z * z).sum(axis=1) / (len(values) * bw
                                                   * np.sqrt(2 * np.pi))
        dens = np.maximum(dens, KDE_FLOOR)
        return dens / np.trapezoid(dens, grid)

    dens_p = density(p, bw_p)
    dens_q = density(q, bw_q)
    return float(np.trapezoid(dens_p * np.log(dens_p / dens_q), grid))


def _collect_dir(directory: Path) -> tuple[NoteStats, list[str]]:
    stats = NoteStats([], [])
    skipped = []
    files = sorted(directory.iterdir())
    for path in files:
        try:
            if path.suffix.lower() == ".png":
                notes, _ = decode_roll(load_png(path))
            elif path.suffix.lower() in (".mid", ".midi"):
                notes = midi_to_notes(path.read_bytes())
            else:
                continue
        except (ValueError, OSError) as exc:
            skipped.append(path.name)
            logger.warning("skipping %s: %s", path.name, exc)
            continue
        stats.extend(NoteStats.from_notes(notes))
    return stats, skipped


def evaluate_dirs(gen_dir: str | Path, ref_dir: str | Path) -> MetricsReport:
    """Pool notes from PNG rolls / MIDI files per directory and compute
    every report column; undecodable files are skipped with a warning."""
    gen_dir, ref_dir = Path(gen_dir), Path(ref_dir)
    for d in (gen_dir, ref_dir):
        if not d.is_dir():
            raise MetricsError(f"not a directory: {d}")
    gen, gen_skipped = _collect_dir(gen_dir)
    ref, ref_skipped = _collect_dir(ref_dir)
    if not gen.pitches:
        raise MetricsError(f"no decodable notes in {gen_dir}")
    if not ref.pitches:
        raise MetricsError(f"no decodable notes in {ref_dir}")
    return MetricsReport(
        sigma_p=pitch_std(gen),
        iqr_d=duration_iqr(gen),
        d_p=hist_overlap(gen.pitches, ref.pitches, "pitch"),
        d_d=hist_overlap(gen.durations, ref.durations, "duration"),
        dkl_p=kde_kl(gen.pitches, ref.pitches),
        dkl_d=kde_kl(gen.durations, ref.durations),
        n_gen=len(gen.pitches),
        n_ref=len(ref.pitches),
    )


def report_to_json(report: MetricsReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
