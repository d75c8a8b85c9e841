"""HTTP job service exposing rolls, masks, jobs, and results.

Requests are handled concurrently; generation jobs run on a bounded
worker pool consuming a queue, with status and progress persisted to
disk after every sample so a restart can requeue interrupted jobs.
"""
from __future__ import annotations

import base64
import binascii
import logging
import os
import queue
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from io import BytesIO
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import FileResponse

from . import __version__
from .denoisers import AnalyticGaussianDenoiser
from .engine import EngineError, GenerationJob, MaskSpec, rasterize_mask, run_job
from .hourglass import ToyDenoiser
from .notes import ChordTrack
from .roll import HEIGHT, ROLL_WIDTH, save_png, unfold
from .smf import notes_to_midi
from .store import Store, StoreError
from .training import load_model

logger = logging.getLogger(__name__)

MAX_UPLOAD_DEFAULT = 8 * 1024 * 1024
GAUSSIAN_CHECKPOINT = "gaussian"   # built-in oracle denoiser, no file needed


@dataclass
class ServiceConfig:
    data_dir: str = "data"
    port: int = 8765
    workers: int = 0                 # 0 = CPU core count
    sample_parallelism: int = 1
    max_upload_bytes: int = MAX_UPLOAD_DEFAULT
    default_checkpoint: str = GAUSSIAN_CHECKPOINT
    allowed_origins: list[str] = field(default_factory=lambda: ["*"])

    @classmethod
    def from_toml(cls, path: str | Path) -> "ServiceConfig":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as f:
            raw = tomllib.load(f)
        known = {f_.name for f_ in cls.__dataclass_fields__.values()}
        unknown = set(raw) - {f_ for f_ in known}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def with_env_overrides(self, env) -> "ServiceConfig":
        cfg = ServiceConfig(**vars(self))
        if env.get("POM_DATA_DIR"):
            cfg.data_dir = env["POM_DATA_DIR"]
        if env.get("POM_PORT"):
            cfg.port = int(env["POM_PORT"])
        if env.get("POM_WORKERS"):
            cfg.workers = int(env["POM_WORKERS"])
        return cfg


class _DenoiserCache:
    """Checkpoints are loaded once and shared read-only across samples."""

    def __init__(self):
        self._cache = {}
        self._lock = threading.Lock()

    def get(self, checkpoint: str):
        with self._lock:
            if checkpoint not in self._cache:
                if checkpoint == GAUSSIAN_CHECKPOINT:
                    self._cache[checkpoint] = AnalyticGaussianDenoiser(
                        mean=-1.0, variance=0.25)
                else:
                    self._cache[checkpoint] = ToyDenoiser(
                        load_model(checkpoint))
            return self._cache[checkpoint]


class JobWorkers:
    def __init__(self, store: Store, config: ServiceConfig):
        self.store = store
        self.config = config
        self.queue: queue.Queue[str | None] = queue.Queue()
        self.denoisers = _DenoiserCache()
        self.n_workers = max(1, config.workers or (os.cpu_count() or 1))
        self.threads: list[threading.Thread] = []
        self._stop = threading.Event()

    def start(self):
        for job_id in self.store.requeue_interrupted():
            logger.info("requeued interrupted job %s", job_id)
        for manifest in self.store.list_jobs():
            if manifest["status"] == "queued":
                self.queue.put(manifest["id"])
        for i in range(self.n_workers):
            t = threading.Thread(target=self._loop, name=f"pom-worker-{i}",
                                 daemon=True)
            t.start()
            self.threads.append(t)

    def stop(self):
        self._stop.set()
        for _ in self.threads:
            self.queue.put(None)

    def submit(self, job_id: str):
        self.queue.put(job_id)

    def _loop(self):
        while not self._stop.is_set():
            job_id = self.queue.get()
            if job_id is None:
                return
            try:
                self._run(job_id)
            except Exception as exc:  # persist failures, keep the worker alive
                logger.exception("job %s failed", job_id)
                try:
                    self.store.update_manifest(job_id, status="failed",
                                               error=str(exc),
                                               finished_at=time.time())
                except StoreError:
                    pass

    def _run(self, job_id: str):
        manifest = self.store.get_manifest(job_id)
        if manifest["status"] != "queued":
            return
        self.store.update_manifest(job_id, status="running",
                                   started_at=time.time())
        job = _job_from_manifest(manifest, self.store)
        reference = self.store.get_roll_reference(manifest["roll_id"])
        denoiser = self.denoisers.get(manifest["checkpoint"])

        def progress(completed: int, total: int):
            self.store.update_manifest(
                job_id, progress={"completed": completed, "total": total})

        outcome = run_job(job, reference, denoiser,
                          parallel=self.config.sample_parallelism,
                          progress=progress)
        results_dir = self.store.results_dir(job_id)
        results_dir.mkdir(parents=True, exist_ok=True)
        listing = []
        for result in outcome.results:
            save_png(result.image, results_dir / f"{result.rank}.png")
            (results_dir / f"{result.rank}.mid").write_bytes(
                notes_to_midi(result.notes))
            listing.append({"rank": result.rank, "score": result.score,
                            "seed_offset": result.seed_offset})
        self.store.update_manifest(
            job_id, status="done", finished_at=time.time(),
            results=listing,
            sample_scores=[{"seed_offset": k, "score": s}
                           for k, s in outcome.sample_scores],
            failures=[{"seed_offset": k, "error": e}
                      for k, e in outcome.failures])


def _mask_spec_from_json(mask: dict) -> MaskSpec:
    try:
        if "png_base64" in mask:
            from PIL import Image, UnidentifiedImageError
            try:
                raw = base64.b64decode(mask["png_base64"], validate=True)
                with Image.open(BytesIO(raw)) as im:
                    raster = np.asarray(im.convert("L"))
            except (binascii.Error, UnidentifiedImageError, OSError) as exc:
                raise EngineError(f"mask.png_base64 undecodable: {exc}")
            if raster.shape == (256, 256):
                raster = unfold(raster)
            if raster.shape != (HEIGHT, ROLL_WIDTH):
                raise EngineError(
                    f"mask PNG must be 512x128 or 256x256, got "
                    f"{raster.shape[1]}x{raster.shape[0]}")
            return MaskSpec(raster=raster)
        if "polygons" in mask:
            polys = [[(float(t), float(p)) for t, p in poly]
                     for poly in mask["polygons"]]
            return MaskSpec(polygons=polys)
        if "preset" in mask:
            rect = tuple(mask["rect"]) if "rect" in mask else None
            return MaskSpec(preset=mask["preset"], rect=rect)
    except (TypeError, ValueError) as exc:
        raise EngineError(f"mask: {exc}")
    raise EngineError("mask must contain png_base64, polygons, or preset")


def _job_from_manifest(manifest: dict, store: Store) -> GenerationJob:
    mask = manifest["mask"]
    if mask.get("kind") == "raster":
        from .roll import load_png
        raster = load_png(store.job_dir(manifest["id"]) / "mask.png")[:, :, 0]
        spec = MaskSpec(raster=raster)
    elif mask.get("kind") == "polygons":
        spec = MaskSpec(polygons=[[tuple(v) for v in poly]
                                  for poly in mask["polygons"]])
    else:
        spec = MaskSpec(preset=mask["preset"],
                        rect=tuple(mask["rect"]) if mask.get("rect") else None)
    return GenerationJob(mask=spec, roll_id=manifest["roll_id"],
                         steps=manifest["steps"],
                         repaints=manifest["repaints"],
                         n_samples=manifest["n_samples"],
                         top_k=manifest["top_k"], eta=manifest["eta"],
                         seed=manifest["seed"])


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    store = Store(config.data_dir)
    workers = JobWorkers(store, config)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        workers.start()
        yield
        workers.stop()

    app = FastAPI(title="pom", version=__version__, lifespan=lifespan)
    app.state.store = store
    app.state.workers = workers

    from fastapi.middleware.cors import CORSMiddleware
    app.add_middleware(CORSMiddleware, allow_origins=config.allowed_origins,
                       allow_methods=["*"], allow_headers=["*"])

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "version": __version__,
                "workers": workers.n_workers}

    @app.post("/v1/rolls")
    async def upload_roll(request: Request, response: Response):
        data = await request.body()
        if len(data) > config.max_upload_bytes:
            raise HTTPException(413, f"upload exceeds "
                                     f"{config.max_upload_bytes} bytes")
        content_type = request.headers.get("content-type", "")
        if "midi" in content_type or data[:4] == b"MThd":
            kind = "midi"
        elif "png" in content_type or data[:8] == b"\x89PNG\r\n\x1a\n":
            kind = "png"
        else:
            raise HTTPException(400, "content-type must identify MIDI or "
                                     "PNG (or bytes must carry the magic)")
        try:
            meta, created = store.put_roll(data, kind)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        response.status_code = 201 if created else 200
        return {"id": meta["id"], "width": meta["width"]}

    @app.get("/v1/rolls/{roll_id}/image")
    def roll_image(roll_id: str):
        try:
            path = store.roll_png_path(roll_id)
        except StoreError as exc:
            raise HTTPException(404, str(exc))
        return FileResponse(path, media_type="image/png")

    @app.post("/v1/jobs", status_code=202)
    async def submit_job(request: Request):
        body = await request.json()
        errors = {}
        roll_id = body.get("roll_id")
        if not roll_id:
            errors["roll_id"] = "required"
        params = {"steps": 50, "repaints": 1, "n_samples": 1, "top_k": 1,
                  "eta": 1.0, "seed": 0}
        for key, default in list(params.items()):
            value = body.get(key, default)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                errors[key] = "must be a number"
            else:
                params[key] = type(default)(value)
        mask_json = body.get("mask")
        spec = None
        if not isinstance(mask_json, dict):
            errors["mask"] = "required object"
        else:
            try:
                spec = _mask_spec_from_json(mask_json)
            except EngineError as exc:
                errors["mask"] = str(exc)
        if errors:
            raise HTTPException(422, errors)

        try:
            store.get_roll_meta(roll_id)
        except StoreError as exc:
            raise HTTPException(404, str(exc))

        try:
            job = GenerationJob(mask=spec, roll_id=roll_id, **params)
        except EngineError as exc:
            raise HTTPException(422, {"parameters": str(exc)})

        checkpoint = body.get("checkpoint") or config.default_checkpoint
        if checkpoint != GAUSSIAN_CHECKPOINT:
            try:
                workers.denoisers.get(checkpoint)
            except (OSError, ValueError) as exc:
                raise HTTPException(422, {"checkpoint": str(exc)})

        if spec.raster is not None:
            mask_record = {"kind": "raster"}
        elif spec.polygons is not None:
            mask_record = {"kind": "polygons", "polygons": spec.polygons}
        else:
            mask_record = {"kind": "preset", "preset": spec.preset,
                           "rect": list(spec.rect) if spec.rect else None}
        job_id = store.new_job({
            "roll_id": roll_id, "mask": mask_record, "checkpoint": checkpoint,
            **params})
        if spec.raster is not None:
            store.save_mask_png(job_id, rasterize_mask(spec))
        workers.submit(job_id)
        return {"job_id": job_id}

    @app.get("/v1/jobs/{job_id}")
    def job_status(job_id: str):
        try:
            return store.get_manifest(job_id)
        except StoreError as exc:
            raise HTTPException(404, str(exc))

    @app.get("/v1/jobs/{job_id}/results")
    def job_results(job_id: str):
        try:
            manifest = store.get_manifest(job_id)
        except StoreError as exc:
            raise HTTPException(404, str(exc))
        if manifest["status"] != "done":
            raise HTTPException(409, f"job is {manifest['status']}, "
                                     "results not available")
        return [{"rank": r["rank"], "score": r["score"],
                 "seed_offset": r["seed_offset"],
                 "png_url": f"/v1/results/{job_id}/{r['rank']}.png",
                 "midi_url": f"/v1/results/{job_id}/{r['rank']}.mid"}
                for r in manifest["results"]]

    @app.get("/v1/results/{job_id}/{filename}")
    def result_file(job_id: str, filename: str):
        if not (filename.endswith(".png") or filename.endswith(".mid")):
            raise HTTPException(404, "unknown result file type")
        path = store.results_dir(job_id) / filename
        if "/" in filename or not path.exists():
            raise HTTPException(404, f"no result {filename} for job {job_id}")
        media = "image/png" if filename.endswith(".png") else "audio/midi"
        return FileResponse(path, media_type=media)

    return app


def serve(config: ServiceConfig):
    import uvicorn
    uvicorn.run(create_app(config), host="0.0.0.0", port=config.port)
