"""Mask construction, job orchestration, and mask-fill ranking.

Masks are edited and scored in unfolded 512x128 roll coordinates; the
fold to the square diffusion domain happens here.  Generated samples are
ranked by the mask-fill score: the sum over generate-region pixels of
the green channel normalized to [0, 1].
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diffusion import (Denoiser, SamplerError, inpaint_sample,
                        karras_schedule)
from .notes import ChordTrack, NoteEvent
from .roll import (BORDER_ROWS, HEIGHT, NOTE_ROW_MAX, NOTE_ROW_MIN,
                   ROLL_WIDTH, decode_roll, float_to_roll, fold,
                   pitch_to_row, roll_to_float, unfold)

logger = logging.getLogger(__name__)

PRESETS = ("melody", "accompaniment", "continuation", "custom-rect")
MELODY_SPLIT_PITCH = 60  # middle C: melody above (inclusive), accompaniment below


class EngineError(ValueError):
    """Invalid mask specs, shape conflicts, or fully failed jobs."""


@dataclass
class MaskSpec:
    """Exactly one of raster, polygons, or preset.

    raster: grayscale array, >= 128 means generate.
    polygons: vertex lists in (tick, pitch) coordinates, >= 3 vertices.
    preset: melody | accompaniment | continuation | custom-rect; the
    custom-rect preset takes rect = (tick_lo, tick_hi, pitch_lo, pitch_hi).
    """

    raster: np.ndarray | None = None
    polygons: list[list[tuple[float, float]]] | None = None
    preset: str | None = None
    rect: tuple[int, int, int, int] | None = None

    def __post_init__(self):
        given = sum(x is not None
                    for x in (self.raster, self.polygons, self.preset))
        if given != 1:
            raise EngineError("mask spec needs exactly one of raster, "
                              "polygons, or preset")
        if self.preset is not None and self.preset not in PRESETS:
            raise EngineError(f"unknown preset '{self.preset}'; "
                              f"choose from {PRESETS}")
        if self.preset == "custom-rect" and self.rect is None:
            raise EngineError("custom-rect preset requires rect")
        if self.polygons is not None:
            for poly in self.polygons:
                if len(poly) < 3:
                    raise EngineError("polygons need at least 3 vertices")


def rasterize_mask(spec: MaskSpec,
                   dims: tuple[int, int] = (HEIGHT, ROLL_WIDTH)
                   ) -> np.ndarray:
    """Binary (H, W) mask, 1 = generate; border rows are always 0."""
    height, width = dims
    mask = np.zeros((height, width), dtype=np.uint8)

    if spec.raster is not None:
        raster = np.asarray(spec.raster)
        if raster.shape != (height, width):
            raise EngineError(f"mask raster shape {raster.shape} does not "
                              f"match roll dims {(height, width)}")
        mask = (raster >= 128).astype(np.uint8)
    elif spec.polygons is not None:
        for poly in spec.polygons:
            mask |= _fill_polygon(poly, height, width)
    elif spec.preset == "melody":
        mask[NOTE_ROW_MIN:pitch_to_row(MELODY_SPLIT_PITCH) + 1] = 1
    elif spec.preset == "accompaniment":
        mask[pitch_to_row(MELODY_SPLIT_PITCH) + 1:NOTE_ROW_MAX + 1] = 1
    elif spec.preset == "continuation":
        mask[NOTE_ROW_MIN:NOTE_ROW_MAX + 1, width // 2:] = 1
    elif spec.preset == "custom-rect":
        # half-open ranges: ticks [tick_lo, tick_hi), pitches [pitch_lo, pitch_hi)
        tick_lo, tick_hi, pitch_lo, pitch_hi = spec.rect
        mask[pitch_to_row(pitch_hi - 1):pitch_to_row(pitch_lo) + 1,
             tick_lo:tick_hi] = 1

    mask[:BORDER_ROWS] = 0
    mask[height - BORDER_ROWS:] = 0
    return mask


def _fill_polygon(poly, height: int, width: int) -> np.ndarray:
    """Scanline fill with the nonzero winding rule, sampled at pixel
    centers; vertices are (tick, pitch) pairs.

    Cells are half-open on both axes: a polygon spanning ticks [a, b) and
    pitches [p, q) covers exactly those columns and pitch rows.
    """
    points = np.array([(float(t), 128.0 - float(p)) for t, p in poly])
    x, y = points[:, 0], points[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if area == 0:
        raise EngineError("degenerate polygon with zero area")

    py, px = np.mgrid[0:height, 0:width].astype(np.float64)
    px += 0.5
    py += 0.5
    winding = np.zeros((height, width), dtype=np.int64)
    for (x1, y1), (x2, y2) in zip(points, np.roll(points, -1, axis=0)):
        cross = (x2 - x1) * (py - y1) - (px - x1) * (y2 - y1)
        upward = (y1 <= py) & (y2 > py) & (cross > 0)
        downward = (y2 <= py) & (y1 > py) & (cross < 0)
        winding += upward.astype(np.int64) - downward.astype(np.int64)
    return (winding != 0).astype(np.uint8)


def score_fill(image: np.ndarray, mask: np.ndarray) -> float:
    """Sum of green-channel intensity (0-1 scale) over generate pixels."""
    if image.shape[:2] != mask.shape:
        raise EngineError(f"image shape {image.shape[:2]} does not match "
                          f"mask shape {mask.shape}")
    return float((image[:, :, 1].astype(np.float64) / 255.0)[mask == 1].sum())


@dataclass
class GenerationJob:
    mask: MaskSpec
    roll_id: str = ""
    steps: int = 50
    repaints: int = 1
    n_samples: int = 1
    top_k: int = 1
    eta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.steps < 2:
            raise EngineError(f"steps must be >= 2, got {self.steps}")
        if self.repaints < 1:
            raise EngineError(f"repaints must be >= 1, got {self.repaints}")
        if not 1 <= self.top_k <= self.n_samples:
            raise EngineError(f"need 1 <= top_k <= n_samples, got "
                              f"top_k={self.top_k}, n_samples={self.n_samples}")
        if self.eta < 0:
            raise EngineError(f"eta must be >= 0, got {self.eta}")


@dataclass
class RankedResult:
    image: np.ndarray          # unfolded (128, 512, 3) uint8
    notes: list[NoteEvent]
    chords: ChordTrack
    score: float
    rank: int
    seed_offset: int


@dataclass
class JobOutcome:
    results: list[RankedResult]
    sample_scores: list[tuple[int, float]]   # (seed offset, score), all samples
    failures: list[tuple[int, str]] = field(default_factory=list)


def run_job(job: GenerationJob, reference: np.ndarray, denoiser: Denoiser,
            parallel: int = 1,
            progress: Callable[[int, int], None] | None = None
            ) -> JobOutcome:
    """Generate n_samples inpaintings of the reference roll, score each by
    mask fill on the unfolded image, and keep the top_k.

    Sample k uses seed job.seed + k, so jobs are reproducible and sweeps
    are resumable.  Failed samples are excluded and reported; the job
    fails only if every sample fails.
    """
    if reference.shape != (HEIGHT, ROLL_WIDTH, 3):
        raise EngineError(f"reference roll must be (128, 512, 3), got "
                          f"{reference.shape}")
    mask = rasterize_mask(job.mask)
    x_ref = fold(roll_to_float(reference))
    mask_folded = fold(mask).astype(np.float32)
    schedule = karras_schedule(job.steps)

    done = 0

    def one_sample(k: int):
        nonlocal done
        sample = inpaint_sample(denoiser, x_ref, mask_folded, schedule,
                                repaints=job.repaints, eta=job.eta,
                                seed=job.seed + k)
        image = float_to_roll(unfold(sample))
        score = score_fill(image, mask)
        notes, chords = decode_roll(image)
        done += 1
        if progress:
            progress(done, job.n_samples)
        return RankedResult(image, notes, chords, score, -1, k)

    candidates: list[RankedResult] = []
    failures: list[tuple[int, str]] = []
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            futures = {k: pool.submit(one_sample, k)
                       for k in range(job.n_samples)}
        for k, future in futures.items():
            try:
                candidates.append(future.result())
            except SamplerError as exc:
                failures.append((k, str(exc)))
                logger.warning("sample %d failed: %s", k, exc)
    else:
        for k in range(job.n_samples):
            try:
                candidates.append(one_sample(k))
            except SamplerError as exc:
                failures.append((k, str(exc)))
                logger.warning("sample %d failed: %s", k, exc)

    if not candidates:
        raise EngineError(f"all {job.n_samples} samples failed: "
                          f"{failures[:3]}...")
    candidates.sort(key=lambda r: (-r.score, r.seed_offset))
    results = candidates[:job.top_k]
    for rank, result in enumerate(results):
        result.rank = rank
    return JobOutcome(results=results,
                      sample_scores=[(c.seed_offset, c.score)
                                     for c in candidates],
                      failures=failures)
