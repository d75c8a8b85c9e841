"""Desk-scale hourglass transformer denoiser with EDM preconditioning.

Structure: patchify -> transformer blocks and 2x2 token merges down two
levels -> global-attention bottleneck -> token splits back up with
learnable skip interpolation -> unpatchify.  Attention uses axial rotary
position embeddings, so the network is resolution-agnostic and
equivariant under cyclic translation by whole coarse-level cells.

The raw network F is wrapped as
    D(x, sigma) = c_skip * x + c_out * F(c_in * x, c_noise)
with the EDM scalings; the output projection is zero-initialized so the
model starts exactly at the identity-shrinkage denoiser c_skip * x.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F_t


@dataclass
class ToyHourglassConfig:
    size: int = 64
    patch: int = 2
    widths: tuple[int, ...] = (32, 64, 128)   # per level; last = bottleneck
    depths: tuple[int, ...] = (1, 1, 2)
    heads: int = 4
    cond_width: int = 64
    sigma_data: float = 0.5

    def __post_init__(self):
        self.widths = tuple(self.widths)
        self.depths = tuple(self.depths)
        levels = len(self.widths)
        if len(self.depths) != levels:
            raise ValueError("widths and depths must have equal length")
        unit = self.patch * 2 ** (levels - 1)
        if self.size % unit != 0:
            raise ValueError(f"size {self.size} not divisible by "
                             f"patch * 2^(levels-1) = {unit}")
        for w in self.widths:
            if w % self.heads or (w // self.heads) % 4:
                raise ValueError("head dim must be a multiple of 4 for "
                                 "axial rotary embeddings")

    @property
    def levels(self) -> int:
        return len(self.widths)

    def to_dict(self) -> dict:
        return {"size": self.size, "patch": self.patch,
                "widths": list(self.widths), "depths": list(self.depths),
                "heads": self.heads, "cond_width": self.cond_width,
                "sigma_data": self.sigma_data}

    @classmethod
    def from_dict(cls, d: dict) -> "ToyHourglassConfig":
        return cls(size=d["size"], patch=d["patch"],
                   widths=tuple(d["widths"]), depths=tuple(d["depths"]),
                   heads=d["heads"], cond_width=d["cond_width"],
                   sigma_data=d["sigma_data"])


def _rms_norm(x: torch.Tensor) -> torch.Tensor:
    return x * torch.rsqrt(x.pow(2).mean(-1, keepdim=True) + 1e-6)


def _axial_rope(h: int, w: int, head_dim: int, device, dtype):
    """cos/sin tables for axial rotary embeddings over an h x w grid.

    The first half of each head rotates with the row index, the second
    half with the column index; returns (cos, sin) of shape
    (h*w, head_dim // 2).
    """
    quarter = head_dim // 4
    freqs = 10000.0 ** (-torch.arange(quarter, device=device,
                                      dtype=dtype) / quarter)
    rows = torch.arange(h, device=device, dtype=dtype)
    cols = torch.arange(w, device=device, dtype=dtype)
    row_angles = rows[:, None] * freqs  # (h, quarter)
    col_angles = cols[:, None] * freqs  # (w, quarter)
    angles = torch.cat([
        row_angles[:, None, :].expand(h, w, quarter),
        col_angles[None, :, :].expand(h, w, quarter),
    ], dim=-1).reshape(h * w, head_dim // 2)
    return angles.cos(), angles.sin()


def _apply_rope(x: torch.Tensor, cos: torch.Tensor,
                sin: torch.Tensor) -> torch.Tensor:
    # x: (B, heads, N, head_dim); rotate pairs (even, odd)
    x1, x2 = x[..., 0::2], x[..., 1::2]
    return torch.stack([x1 * cos - x2 * sin,
                        x1 * sin + x2 * cos], dim=-1).flatten(-2)


class _Block(nn.Module):
    """Pre-norm attention + MLP block with zero-initialized adaptive
    shift/scale/gate modulation from the noise conditioning vector."""

    def __init__(self, width: int, heads: int, cond_width: int):
        super().__init__()
        self.heads = heads
        self.head_dim = width // heads
        self.qkv = nn.Linear(width, 3 * width, bias=False)
        self.attn_out = nn.Linear(width, width, bias=False)
        self.mlp_in = nn.Linear(width, 2 * width)
        self.mlp_out = nn.Linear(2 * width, width)
        self.modulation = nn.Linear(cond_width, 6 * width)
        nn.init.zeros_(self.modulation.weight)
        nn.init.zeros_(self.modulation.bias)

    def forward(self, x: torch.Tensor, cond: torch.Tensor,
                rope: tuple[torch.Tensor, torch.Tensor]) -> torch.Tensor:
        # x: (B, N, width); cond: (B, cond_width)
        b, n, width = x.shape
        mods = self.modulation(cond)[:, None, :].chunk(6, dim=-1)
        shift_a, scale_a, gate_a, shift_m, scale_m, gate_m = mods

        h = _rms_norm(x) * (1 + scale_a) + shift_a
        qkv = self.qkv(h).reshape(b, n, 3, self.heads, self.head_dim)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)
        cos, sin = rope
        q = _apply_rope(q, cos, sin)
        k = _apply_rope(k, cos, sin)
        attn = F_t.scaled_dot_product_attention(q, k, v)
        attn = attn.transpose(1, 2).reshape(b, n, width)
        x = x + gate_a * self.attn_out(attn)

        h = _rms_norm(x) * (1 + scale_m) + shift_m
        x = x + gate_m * self.mlp_out(F_t.gelu(self.mlp_in(h)))
        return x


class _Merge(nn.Module):
    """2x2 space-to-depth token merge with a linear projection."""

    def __init__(self, w_in: int, w_out: int):
        super().__init__()
        self.proj = nn.Linear(4 * w_in, w_out)

    def forward(self, x: torch.Tensor, h: int, w: int) -> torch.Tensor:
        b = x.shape[0]
        x = x.reshape(b, h // 2, 2, w // 2, 2, -1)
        x = x.permute(0, 1, 3, 2, 4, 5).reshape(b, (h // 2) * (w // 2), -1)
        return self.proj(x)


class _Split(nn.Module):
    """Inverse of _Merge: linear projection then depth-to-space."""

    def __init__(self, w_in: int, w_out: int):
        super().__init__()
        self.proj = nn.Linear(w_in, 4 * w_out)

    def forward(self, x: torch.Tensor, h: int, w: int) -> torch.Tensor:
        # (h, w) is the coarse grid of x
        b = x.shape[0]
        x = self.proj(x).reshape(b, h, w, 2, 2, -1)
        x = x.permute(0, 1, 3, 2, 4, 5).reshape(b, (2 * h) * (2 * w), -1)
        return x


class HourglassDenoiser(nn.Module):
    """Raw hourglass network plus the EDM denoiser wrapping."""

    def __init__(self, config: ToyHourglassConfig):
        super().__init__()
        self.config = config
        cw = config.cond_width
        self.cond_freqs = nn.Parameter(
            torch.randn(cw // 2) * 2 * math.pi, requires_grad=False)
        self.cond_mlp = nn.Sequential(
            nn.Linear(cw, cw), nn.GELU(), nn.Linear(cw, cw))

        widths, depths = config.widths, config.depths
        self.patch_in = nn.Linear(3 * config.patch ** 2, widths[0])
        self.down_blocks = nn.ModuleList()
        self.merges = nn.ModuleList()
        for level in range(config.levels - 1):
            self.down_blocks.append(nn.ModuleList(
                _Block(widths[level], config.heads, cw)
                for _ in range(depths[level])))
            self.merges.append(_Merge(widths[level], widths[level + 1]))
        self.mid_blocks = nn.ModuleList(
            _Block(widths[-1], config.heads, cw)
            for _ in range(depths[-1]))
        self.splits = nn.ModuleList()
        self.up_blocks = nn.ModuleList()
        self.skip_weights = nn.ParameterList()
        for level in reversed(range(config.levels - 1)):
            self.splits.append(_Split(widths[level + 1], widths[level]))
            self.up_blocks.append(nn.ModuleList(
                _Block(widths[level], config.heads, cw)
                for _ in range(depths[level])))
            self.skip_weights.append(nn.Parameter(torch.tensor(0.5)))
        self.patch_out = nn.Linear(widths[0], 3 * config.patch ** 2)
        nn.init.zeros_(self.patch_out.weight)
        nn.init.zeros_(self.patch_out.bias)

    def _condition(self, c_noise: torch.Tensor) -> torch.Tensor:
        angles = c_noise[:, None] * self.cond_freqs[None, :]
        feats = torch.cat([angles.cos(), angles.sin()], dim=-1)
        return self.cond_mlp(feats)

    def forward_raw(self, x: torch.Tensor,
                    c_noise: torch.Tensor) -> torch.Tensor:
        """F(x, c_noise) for x of shape (B, H, W, 3); H, W divisible by
        patch * 2^(levels-1)."""
        cfg = self.config
        b, height, width, _ = x.shape
        p = cfg.patch
        cond = self._condition(c_noise)

        h, w = height // p, width // p
        x = x.reshape(b, h, p, w, p, 3).permute(0, 1, 3, 2, 4, 5)
        x = x.reshape(b, h * w, 3 * p * p)
        x = self.patch_in(x)

        skips = []
        grids = []
        for blocks, merge in zip(self.down_blocks, self.merges):
            rope = _axial_rope(h, w, cfg.widths[len(grids)] // cfg.heads,
                               x.device, x.dtype)
            for block in blocks:
                x = block(x, cond, rope)
            skips.append(x)
            grids.append((h, w))
            x = merge(x, h, w)
            h, w = h // 2, w // 2

        rope = _axial_rope(h, w, cfg.widths[-1] // cfg.heads,
                           x.device, x.dtype)
        for block in self.mid_blocks:
            x = block(x, cond, rope)

        for split, blocks, alpha in zip(self.splits, self.up_blocks,
                                        self.skip_weights):
            x = split(x, h, w)
            h, w = h * 2, w * 2
            skip = skips.pop()
            x = (1 - alpha) * skip + alpha * x
            level = len(skips)
            rope = _axial_rope(h, w, cfg.widths[level] // cfg.heads,
                               x.device, x.dtype)
            for block in blocks:
                x = block(x, cond, rope)

        x = self.patch_out(x)
        x = x.reshape(b, height // p, width // p, p, p, 3)
        x = x.permute(0, 1, 3, 2, 4, 5).reshape(b, height, width, 3)
        return x

    def denoise(self, x: torch.Tensor, sigma: torch.Tensor) -> torch.Tensor:
        """EDM-preconditioned denoiser for (B, H, W, 3) inputs and a
        per-sample sigma vector."""
        sd = self.config.sigma_data
        sigma = sigma.reshape(-1, 1, 1, 1)
        c_skip = sd ** 2 / (sigma ** 2 + sd ** 2)
        c_out = sigma * sd / torch.sqrt(sigma ** 2 + sd ** 2)
        c_in = 1.0 / torch.sqrt(sigma ** 2 + sd ** 2)
        c_noise = torch.log(sigma.reshape(-1)) / 4.0
        return c_skip * x + c_out * self.forward_raw(c_in * x, c_noise)


def toy_forward(model: HourglassDenoiser, x: np.ndarray,
                sigma: float) -> np.ndarray:
    """Numpy-facing denoiser evaluation: (H, W, 3) or (B, H, W, 3) in the
    [-1, 1] domain."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    squeeze = x.ndim == 3
    arr = np.asarray(x, dtype=np.float32)
    if squeeze:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise ValueError(f"expected (B, H, W, 3) input, got {x.shape}")
    with torch.no_grad():
        out = model.denoise(torch.from_numpy(arr),
                            torch.full((arr.shape[0],), float(sigma)))
    out = out.numpy()
    return out[0] if squeeze else out


class ToyDenoiser:
    """Adapter giving an HourglassDenoiser the D(x, sigma) callable
    contract used by the samplers."""

    def __init__(self, model: HourglassDenoiser):
        self.model = model.eval()

    def __call__(self, x: np.ndarray, sigma: float) -> np.ndarray:
        return toy_forward(self.model, x, sigma).astype(x.dtype, copy=False)
