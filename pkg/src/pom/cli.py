"""Batch command-line entry points for every pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime/model
error.  Human summaries go to stdout, diagnostics to stderr; report
emitting commands accept --json for machine output.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .dataset import build_dataset
from .denoisers import AnalyticGaussianDenoiser
from .diffusion import SamplerError, karras_schedule, sample_dpmpp_2m_sde
from .engine import EngineError, GenerationJob, MaskSpec, PRESETS, run_job
from .hourglass import ToyDenoiser, ToyHourglassConfig
from .metrics import MetricsError, evaluate_dirs
from .notes import notes_span_ticks
from .roll import (HEIGHT, ROLL_WIDTH, RollError, decode_roll, float_to_roll,
                   load_png, render_roll, save_png, unfold)
from .smf import SmfError, midi_to_notes, notes_to_midi
from .training import TrainingError, load_model, train_toy

GAUSSIAN = "gaussian"
MOTIF_ROW_LO = 32  # where sub-128-row model outputs sit in a full roll


class DataError(click.ClickException):
    """Unreadable or malformed input data (exit 2)."""

    exit_code = 2


@click.group()
def cli():
    """Piano-roll diffusion inpainting pipeline."""


@cli.command()
@click.option("--in", "in_dir", required=True,
              type=click.Path(path_type=Path), help="Directory of .mid files.")
@click.option("--out", "out_dir", required=True,
              type=click.Path(path_type=Path), help="Dataset output directory.")
@click.option("--transpose-min", default=-12, show_default=True)
@click.option("--transpose-max", default=12, show_default=True)
def prepare(in_dir: Path, out_dir: Path, transpose_min: int,
            transpose_max: int):
    """Render a MIDI corpus to training rasters plus a manifest."""
    if transpose_min > transpose_max:
        raise click.UsageError("--transpose-min must be <= --transpose-max")
    if not in_dir.is_dir():
        raise DataError(f"input directory {in_dir} does not exist")
    manifest = build_dataset(in_dir, out_dir, transpose_min, transpose_max)
    if not manifest["entries"]:
        raise DataError(f"no renderable MIDI files in {in_dir} "
                        f"({len(manifest['errors'])} unreadable)")
    click.echo(f"wrote {len(manifest['entries'])} PNGs to {out_dir} "
               f"({len(manifest['errors'])} files skipped)")


@cli.command()
@click.option("--data", "data_dir", required=True,
              type=click.Path(path_type=Path))
@click.option("--out", "out_path", required=True,
              type=click.Path(path_type=Path))
@click.option("--steps", default=2000, show_default=True)
@click.option("--batch", default=8, show_default=True)
@click.option("--lr", default=3e-4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--size", default=64, show_default=True)
def train(data_dir: Path, out_path: Path, steps: int, batch: int, lr: float,
          seed: int, size: int):
    """Train the toy hourglass denoiser; writes checkpoint and loss CSV."""
    if steps < 1:
        raise click.UsageError("--steps must be >= 1")
    if batch < 1:
        raise click.UsageError("--batch must be >= 1")
    if not data_dir.is_dir() or not any(data_dir.glob("*.png")):
        raise DataError(f"no training PNGs under {data_dir}")
    config = ToyHourglassConfig(size=size)
    csv_path = out_path.with_suffix(out_path.suffix + ".loss.csv")
    _, trace = train_toy(config, data_dir, steps=steps, batch=batch, lr=lr,
                         seed=seed, out_path=out_path, csv_path=csv_path)
    click.echo(f"trained {steps} steps; final loss {trace[-1][1]:.4f}; "
               f"checkpoint {out_path}, loss trace {csv_path}")


def _load_reference(path: Path) -> np.ndarray:
    if path.suffix.lower() in (".mid", ".midi"):
        notes = midi_to_notes(path.read_bytes())
        from .dataset import chord_detect
        width = max(ROLL_WIDTH, notes_span_ticks(notes))
        image = render_roll(notes, chord_detect(notes), width)
    else:
        image = load_png(path)
        if image.shape[0] != HEIGHT:
            raise DataError(f"{path}: roll PNG must be 128 rows tall, got "
                            f"{image.shape[0]}")
    ref = np.zeros((HEIGHT, ROLL_WIDTH, 3), dtype=np.uint8)
    chunk = image[:, :ROLL_WIDTH]
    ref[:, :chunk.shape[1]] = chunk
    return ref


def _parse_mask(mask_arg: str) -> MaskSpec:
    if mask_arg.startswith("preset:"):
        name = mask_arg.split(":", 1)[1]
        if name not in PRESETS:
            raise click.UsageError(f"unknown preset '{name}'; "
                                   f"choose from {PRESETS}")
        return MaskSpec(preset=name)
    path = Path(mask_arg)
    if not path.exists():
        raise DataError(f"mask file {path} does not exist")
    raster = load_png(path)[:, :, 0]
    if raster.shape == (256, 256):
        raster = unfold(raster)
    if raster.shape != (HEIGHT, ROLL_WIDTH):
        raise DataError(f"mask must be 512x128 or 256x256, got "
                        f"{raster.shape[1]}x{raster.shape[0]}")
    return MaskSpec(raster=raster)


def _load_denoiser(ckpt: str):
    if ckpt == GAUSSIAN:
        return AnalyticGaussianDenoiser(mean=-1.0, variance=0.25), 256
    path = Path(ckpt)
    if not path.exists():
        raise DataError(f"checkpoint {path} does not exist")
    model = load_model(path)
    return ToyDenoiser(model), model.config.size


@cli.command()
@click.option("--roll", "roll_path", required=True,
              type=click.Path(path_type=Path), help="Reference .mid or .png.")
@click.option("--mask", "mask_arg", required=True,
              help="Mask PNG path or preset:NAME.")
@click.option("--ckpt", default=GAUSSIAN, show_default=True,
              help="Checkpoint path, or 'gaussian' for the analytic oracle.")
@click.option("--steps", default=50, show_default=True)
@click.option("--repaints", default=1, show_default=True)
@click.option("--n", "n_samples", default=1, show_default=True)
@click.option("--top", "top_k", default=1, show_default=True)
@click.option("--eta", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", default="inpaint_out", show_default=True,
              type=click.Path(path_type=Path))
@click.option("--parallel", default=1, show_default=True)
def inpaint(roll_path: Path, mask_arg: str, ckpt: str, steps: int,
            repaints: int, n_samples: int, top_k: int, eta: float, seed: int,
            out_dir: Path, parallel: int):
    """Masked inpainting of a reference roll with ranked outputs."""
    if not roll_path.exists():
        raise DataError(f"roll file {roll_path} does not exist")
    reference = _load_reference(roll_path)
    spec = _parse_mask(mask_arg)
    denoiser, size = _load_denoiser(ckpt)
    if size != 256:
        raise DataError(f"checkpoint is configured for {size}x{size} images; "
                        "roll inpainting needs a 256x256 model or 'gaussian'")
    job = GenerationJob(mask=spec, steps=steps, repaints=repaints,
                        n_samples=n_samples, top_k=top_k, eta=eta, seed=seed)
    outcome = run_job(job, reference, denoiser, parallel=parallel)
    out_dir.mkdir(parents=True, exist_ok=True)
    for result in outcome.results:
        save_png(result.image, out_dir / f"{result.rank}.png")
        (out_dir / f"{result.rank}.mid").write_bytes(
            notes_to_midi(result.notes))
    scores = {"results": [{"rank": r.rank, "score": r.score,
                           "seed_offset": r.seed_offset}
                          for r in outcome.results],
              "sample_scores": [{"seed_offset": k, "score": s}
                                for k, s in outcome.sample_scores],
              "failures": [{"seed_offset": k, "error": e}
                           for k, e in outcome.failures]}
    (out_dir / "scores.json").write_text(json.dumps(scores, indent=2) + "\n")
    click.echo(f"wrote {len(outcome.results)} ranked results to {out_dir} "
               f"(best score {outcome.results[0].score:.2f})")


@cli.command()
@click.option("--ckpt", default=GAUSSIAN, show_default=True)
@click.option("--n", "n_samples", default=1, show_default=True)
@click.option("--steps", default=50, show_default=True)
@click.option("--eta", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", default="sample_out", show_default=True,
              type=click.Path(path_type=Path))
def sample(ckpt: str, n_samples: int, steps: int, eta: float, seed: int,
           out_dir: Path):
    """Unconditional generation: PNG and decoded MIDI per sample."""
    if n_samples < 1:
        raise click.UsageError("--n must be >= 1")
    denoiser, size = _load_denoiser(ckpt)
    schedule = karras_schedule(steps)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k in range(n_samples):
        rng = np.random.default_rng(seed + k)
        x_init = (schedule.sigma_max
                  * rng.standard_normal((size, size, 3)).astype(np.float32))
        x = sample_dpmpp_2m_sde(denoiser, x_init, schedule, eta=eta, rng=rng)
        image = float_to_roll(x)
        if size == 256:
            full = unfold(image)
        else:
            # sub-roll models generate a pitch-band crop; embed it at the
            # motif band so the result decodes as a valid roll
            full = np.zeros((HEIGHT, size, 3), dtype=np.uint8)
            full[MOTIF_ROW_LO:MOTIF_ROW_LO + size] = image
        save_png(full, out_dir / f"sample_{k}.png")
        notes, _ = decode_roll(full)
        (out_dir / f"sample_{k}.mid").write_bytes(notes_to_midi(notes))
    click.echo(f"wrote {n_samples} samples to {out_dir}")


@cli.command("eval")
@click.option("--gen", "gen_dir", required=True,
              type=click.Path(path_type=Path))
@click.option("--ref", "ref_dir", required=True,
              type=click.Path(path_type=Path))
@click.option("--json", "json_path", default=None,
              type=click.Path(path_type=Path))
def eval_cmd(gen_dir: Path, ref_dir: Path, json_path: Path | None):
    """Objective metrics of a generated corpus against a reference."""
    for d in (gen_dir, ref_dir):
        if not d.is_dir():
            raise DataError(f"not a directory: {d}")
    report = evaluate_dirs(gen_dir, ref_dir)
    payload = report.to_dict()
    if json_path:
        Path(json_path).write_text(json.dumps(payload, indent=2) + "\n")
    for key, value in payload.items():
        click.echo(f"{key}: {value:.6g}" if isinstance(value, float)
                   else f"{key}: {value}")


@cli.command()
@click.option("--config", "config_path", default=None,
              type=click.Path(path_type=Path))
def serve(config_path: Path | None):
    """Run the HTTP job service."""
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib

    from .service import ServiceConfig, serve as run_server
    if config_path is not None:
        if not config_path.exists():
            raise click.UsageError(f"config file {config_path} does not exist")
        try:
            config = ServiceConfig.from_toml(config_path)
        except (tomllib.TOMLDecodeError, ValueError, TypeError) as exc:
            raise click.UsageError(f"bad config {config_path}: {exc}")
    else:
        config = ServiceConfig()
    import os
    config = config.with_env_overrides(os.environ)
    run_server(config)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 1
    except DataError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except (RollError, SmfError, EngineError, MetricsError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (SamplerError, TrainingError, RuntimeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except click.Abort:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
