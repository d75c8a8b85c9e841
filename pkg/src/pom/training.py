"""EDM training loop for the toy hourglass denoiser.

Minimizes E[ lambda(sigma) * ||D(x + sigma * eps; sigma) - x||^2 ] with
lambda(sigma) = (sigma^2 + sigma_data^2) / (sigma * sigma_data)^2 and
log-normal sigma sampling (mean -1.2, std 1.2 in ln sigma), using Adam.
Seeded and reproducible on a single device; emits a step,loss,sigma_mean
CSV trace and periodic checkpoints.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch

from .checkpoint import load_checkpoint, save_checkpoint
from .hourglass import HourglassDenoiser, ToyHourglassConfig
from .roll import ROLL_WIDTH, fold, load_png, roll_to_float
from .dataset import window_random

logger = logging.getLogger(__name__)

SIGMA_LOG_MEAN = -1.2
SIGMA_LOG_STD = 1.2


class TrainingError(RuntimeError):
    """Empty dataset or non-finite loss."""


def load_training_images(dataset_dir: str | Path, size: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Load every PNG under dataset_dir as a (N, size, size, 3) float array
    in [-1, 1].

    Images already at the configured size are used directly; 128-row song
    rasters are given one random 512-column window and folded (requires
    size 256).
    """
    paths = sorted(Path(dataset_dir).glob("*.png"))
    images = []
    for path in paths:
        image = load_png(path)
        if image.shape[0] == size and image.shape[1] == size:
            images.append(roll_to_float(image))
        elif image.shape[0] == 128:
            if size != 256:
                raise TrainingError(
                    f"{path.name}: 128-row song rasters fold to 256x256 but "
                    f"the model is configured for {size}x{size}")
            windowed = window_random(image, rng) if image.shape[1] != ROLL_WIDTH \
                else image
            images.append(roll_to_float(fold(windowed)))
        else:
            raise TrainingError(
                f"{path.name}: image shape {image.shape[:2]} matches neither "
                f"the model size {size} nor a 128-row song raster")
    if not images:
        raise TrainingError(f"no PNG images found under {dataset_dir}")
    return np.stack(images)


def edm_loss(model: HourglassDenoiser, x: torch.Tensor,
             sigma: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    sd = model.config.sigma_data
    noisy = x + sigma.reshape(-1, 1, 1, 1) * eps
    denoised = model.denoise(noisy, sigma)
    weight = ((sigma ** 2 + sd ** 2) / (sigma * sd) ** 2).reshape(-1, 1, 1, 1)
    return (weight * (denoised - x) ** 2).mean()


def train_toy(config: ToyHourglassConfig, dataset_dir: str | Path,
              steps: int, batch: int = 8, lr: float = 3e-4, seed: int = 0,
              out_path: str | Path | None = None,
              csv_path: str | Path | None = None,
              save_every: int = 0) -> tuple[HourglassDenoiser, list[tuple]]:
    """Train on a raster directory; returns (model, loss trace).

    The trace is a list of (step, loss, sigma_mean) rows, also written to
    csv_path when given.  A checkpoint is written to out_path at the end
    (and every save_every steps when > 0).
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    data = load_training_images(dataset_dir, config.size, rng)

    model = HourglassDenoiser(config)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    gen = torch.Generator().manual_seed(seed)

    trace: list[tuple[int, float, float]] = []
    data_t = torch.from_numpy(data)
    for step in range(1, steps + 1):
        idx = torch.randint(0, len(data), (batch,), generator=gen)
        x = data_t[idx]
        sigma = torch.exp(SIGMA_LOG_MEAN
                          + SIGMA_LOG_STD * torch.randn(batch, generator=gen))
        eps = torch.randn(x.shape, generator=gen)
        loss = edm_loss(model, x, sigma, eps)
        if not torch.isfinite(loss):
            raise TrainingError(f"non-finite loss at step {step}")
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        trace.append((step, float(loss.detach()), float(sigma.mean())))
        if save_every and out_path and step % save_every == 0:
            save_checkpoint(_state_arrays(model), out_path,
                            config.to_dict(), step)
        if step % 200 == 0:
            logger.info("step %d loss %.4f", step, trace[-1][1])

    if out_path:
        save_checkpoint(_state_arrays(model), out_path, config.to_dict(),
                        steps)
    if csv_path:
        lines = ["step,loss,sigma_mean"]
        lines += [f"{s},{l:.8g},{sm:.8g}" for s, l, sm in trace]
        Path(csv_path).write_text("\n".join(lines) + "\n")
    return model, trace


def _state_arrays(model: HourglassDenoiser) -> dict[str, np.ndarray]:
    return {name: tensor.detach().cpu().numpy()
            for name, tensor in model.state_dict().items()}


def load_model(path: str | Path,
               expect_config: ToyHourglassConfig | None = None
               ) -> HourglassDenoiser:
    """Rebuild an HourglassDenoiser from a checkpoint file."""
    expected = expect_config.to_dict() if expect_config else None
    params, header = load_checkpoint(path, expected)
    config = ToyHourglassConfig.from_dict(header["config"])
    model = HourglassDenoiser(config)
    state = {name: torch.from_numpy(arr) for name, arr in params.items()}
    model.load_state_dict(state)
    return model.eval()


def gradient_check(model: HourglassDenoiser, n_entries: int = 6,
                   seed: int = 0) -> float:
    """Compare backpropagated gradients against central finite differences
    on a random slice of parameters; returns the max relative error.

    Runs in float64 so the comparison isolates the analytic gradient from
    float32 roundoff.
    """
    torch.manual_seed(seed)
    model64 = HourglassDenoiser(model.config).double()
    model64.load_state_dict({k: v.double()
                             for k, v in model.state_dict().items()})
    size = model.config.size
    gen = torch.Generator().manual_seed(seed)
    x = torch.rand((2, size, size, 3), generator=gen,
                   dtype=torch.float64) * 2 - 1
    sigma = torch.tensor([0.3, 1.1], dtype=torch.float64)
    eps = torch.randn(x.shape, generator=gen, dtype=torch.float64)

    loss = edm_loss(model64, x, sigma, eps)
    loss.backward()

    rng = np.random.default_rng(seed)
    named = [(n, p) for n, p in model64.named_parameters()
             if p.requires_grad and p.grad is not None]
    worst = 0.0
    for _ in range(n_entries):
        name, param = named[rng.integers(len(named))]
        flat_index = int(rng.integers(param.numel()))
        grad = float(param.grad.view(-1)[flat_index])
        step = 1e-4 * max(1.0, abs(float(param.data.view(-1)[flat_index])))
        with torch.no_grad():
            flat = param.data.view(-1)
            orig = float(flat[flat_index])
            flat[flat_index] = orig + step
            loss_hi = float(edm_loss(model64, x, sigma, eps))
            flat[flat_index] = orig - step
            loss_lo = float(edm_loss(model64, x, sigma, eps))
            flat[flat_index] = orig
        fd = (loss_hi - loss_lo) / (2 * step)
        denom = max(abs(grad), abs(fd), 1e-8)
        worst = max(worst, abs(grad - fd) / denom)
    return worst
