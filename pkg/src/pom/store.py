"""On-disk persistence for rolls, jobs, and results.

Layout under the data directory:
    rolls/{id}/source.{mid|png}, roll.png, meta.json
    jobs/{id}/manifest.json, mask.png, results/{rank}.png, {rank}.mid

Roll ids are content hashes of the uploaded bytes, so uploads are
idempotent.  Every write goes through a temp file plus atomic rename;
each job writes only under its own directory.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
import uuid
from pathlib import Path

import numpy as np

from .roll import HEIGHT, ROLL_WIDTH, load_png, render_roll, save_png
from .dataset import chord_detect
from .notes import notes_span_ticks
from .smf import midi_to_notes


class StoreError(ValueError):
    """Undecodable uploads or missing records."""


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_json(path: Path, obj) -> None:
    _atomic_write(path, (json.dumps(obj, indent=2) + "\n").encode())


class Store:
    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        self.rolls_dir = self.root / "rolls"
        self.jobs_dir = self.root / "jobs"
        self.rolls_dir.mkdir(parents=True, exist_ok=True)
        self.jobs_dir.mkdir(parents=True, exist_ok=True)

    # -- rolls ------------------------------------------------------------

    def put_roll(self, data: bytes, kind: str) -> tuple[dict, bool]:
        """Persist an uploaded MIDI or PNG roll; returns (meta, created).

        Idempotent: identical bytes map to the same content-hash id.
        """
        roll_id = hashlib.sha256(data).hexdigest()
        roll_dir = self.rolls_dir / roll_id
        meta_path = roll_dir / "meta.json"
        if meta_path.exists():
            return json.loads(meta_path.read_text()), False

        if kind == "midi":
            notes = midi_to_notes(data)
            width = max(ROLL_WIDTH, notes_span_ticks(notes))
            image = render_roll(notes, chord_detect(notes), width)
            source_name = "source.mid"
        elif kind == "png":
            from io import BytesIO

            from PIL import Image, UnidentifiedImageError
            try:
                with Image.open(BytesIO(data)) as im:
                    image = np.asarray(im.convert("RGB"))
            except UnidentifiedImageError as exc:
                raise StoreError(f"undecodable PNG: {exc}") from exc
            if image.shape[0] != HEIGHT:
                raise StoreError(f"roll PNG must be 128 rows tall, got "
                                 f"{image.shape[0]}")
            width = image.shape[1]
            source_name = "source.png"
        else:
            raise StoreError(f"unknown roll kind '{kind}'")

        roll_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(roll_dir / source_name, data)
        save_png(image, roll_dir / "roll.png")
        meta = {"id": roll_id, "kind": kind, "width": int(width),
                "created_at": time.time()}
        _atomic_write_json(meta_path, meta)
        return meta, True

    def get_roll_meta(self, roll_id: str) -> dict:
        meta_path = self.rolls_dir / roll_id / "meta.json"
        if not meta_path.exists():
            raise StoreError(f"unknown roll id {roll_id}")
        return json.loads(meta_path.read_text())

    def get_roll_image(self, roll_id: str) -> np.ndarray:
        self.get_roll_meta(roll_id)
        return load_png(self.rolls_dir / roll_id / "roll.png")

    def get_roll_reference(self, roll_id: str) -> np.ndarray:
        """First 512 columns of the roll, zero-padded; the job reference."""
        image = self.get_roll_image(roll_id)
        ref = np.zeros((HEIGHT, ROLL_WIDTH, 3), dtype=np.uint8)
        chunk = image[:, :ROLL_WIDTH]
        ref[:, :chunk.shape[1]] = chunk
        return ref

    def roll_png_path(self, roll_id: str) -> Path:
        self.get_roll_meta(roll_id)
        return self.rolls_dir / roll_id / "roll.png"

    # -- jobs -------------------------------------------------------------

    def new_job(self, manifest: dict) -> str:
        job_id = uuid.uuid4().hex[:16]
        manifest = dict(manifest, id=job_id, status="queued",
                        progress={"completed": 0, "total": manifest["n_samples"]},
                        error=None, created_at=time.time(),
                        started_at=None, finished_at=None,
                        sample_scores=[])
        _atomic_write_json(self.job_dir(job_id) / "manifest.json", manifest)
        return job_id

    def job_dir(self, job_id: str) -> Path:
        return self.jobs_dir / job_id

    def get_manifest(self, job_id: str) -> dict:
        path = self.job_dir(job_id) / "manifest.json"
        if not path.exists():
            raise StoreError(f"unknown job id {job_id}")
        return json.loads(path.read_text())

    def update_manifest(self, job_id: str, **changes) -> dict:
        manifest = self.get_manifest(job_id)
        manifest.update(changes)
        _atomic_write_json(self.job_dir(job_id) / "manifest.json", manifest)
        return manifest

    def save_mask_png(self, job_id: str, mask: np.ndarray) -> None:
        save_png((mask * 255).astype(np.uint8),
                 self.job_dir(job_id) / "mask.png")

    def results_dir(self, job_id: str) -> Path:
        return self.job_dir(job_id) / "results"

    def list_jobs(self) -> list[dict]:
        manifests = []
        for path in sorted(self.jobs_dir.glob("*/manifest.json")):
            manifests.append(json.loads(path.read_text()))
        return manifests

    def requeue_interrupted(self) -> list[str]:
        """Crash recovery: any job left in "running" goes back to "queued"."""
        requeued = []
        for manifest in self.list_jobs():
            if manifest["status"] == "running":
                self.update_manifest(manifest["id"], status="queued",
                                     started_at=None,
                                     progress={"completed": 0,
                                               "total": manifest["n_samples"]})
                requeued.append(manifest["id"])
        return requeued
