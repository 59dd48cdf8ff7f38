"""Diffusion-loss context for the adapter: schedule, latents, toy denoiser.

Matches the standard forward process z_t = sqrt(abar_t) z0 + sqrt(1-abar_t) e
with a linear beta schedule, plus the conditioning-side plumbing: log-sigma
corruption of the condition image, pseudo-video construction (condition frame
followed by zeros), and channel concatenation of the two latent stacks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adapter import (AdapterParams, FeatureMatrix, mca_backward, mca_forward)

# Condition-image noise level: sigma = exp(n), n ~ Normal(LOG_SIGMA_MEAN, SD^2).
LOG_SIGMA_MEAN = -3.0
LOG_SIGMA_SD = 0.5


@dataclass
class NoiseSchedule:
    betas: np.ndarray
    alpha_bars: np.ndarray

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=np.float64)
        self.alpha_bars = np.asarray(self.alpha_bars, dtype=np.float64)
        if not np.all((self.betas > 0) & (self.betas < 1)):
            raise ValueError("betas must lie in (0, 1)")
        if not (np.all(self.alpha_bars > 0) and np.all(self.alpha_bars <= 1)):
            raise ValueError("alpha_bars must lie in (0, 1]")
        if not np.all(np.diff(self.alpha_bars) < 0):
            raise ValueError("alpha_bars must be strictly decreasing")

    @property
    def steps(self) -> int:
        return self.betas.size

    @classmethod
    def linear(cls, steps: int = 1000, beta_start: float = 1e-4,
               beta_end: float = 0.02) -> "NoiseSchedule":
        betas = np.linspace(beta_start, beta_end, steps)
        return cls(betas=betas, alpha_bars=np.cumprod(1.0 - betas))


@dataclass
class LatentVideo:
    values: np.ndarray  # (frames, channels, height, width)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 4:
            raise ValueError(f"expected (F, C, H, W), got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("latent contains non-finite values")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.values.shape  # type: ignore[return-value]


def corrupt_condition_image(image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Add Gaussian noise at a log-normal level: sigma = exp(N(-3.0, 0.5^2))."""
    image = np.asarray(image, dtype=np.float64)
    sigma = float(np.exp(rng.normal(LOG_SIGMA_MEAN, LOG_SIGMA_SD)))
    return image + sigma * rng.standard_normal(image.shape)


def build_pseudo_video(first_frame: np.ndarray, frames: int) -> LatentVideo:
    """Frame 0 is the (corrupted) condition frame; the rest are zeros."""
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    first = np.asarray(first_frame, dtype=np.float64)
    if first.ndim != 3:
        raise ValueError(f"first frame must be (C, H, W), got {first.shape}")
    values = np.zeros((frames, *first.shape), dtype=np.float64)
    values[0] = first
    return LatentVideo(values=values)


def encode_patch_average(video: LatentVideo, factor: int = 2) -> LatentVideo:
    """Stub spatial encoder: non-overlapping patch averaging."""
    f, c, h, w = video.shape
    h2, w2 = h // factor, w // factor
    v = video.values[:, :, : h2 * factor, : w2 * factor]
    return LatentVideo(values=v.reshape(f, c, h2, factor, w2, factor).mean(axis=(3, 5)))


def concat_latents(z_cond: LatentVideo, z: LatentVideo) -> LatentVideo:
    """Channel concatenation [condition || video]; all other dims must match."""
    fc, cc, hc, wc = z_cond.shape
    f, c, h, w = z.shape
    if (fc, hc, wc) != (f, h, w) or cc != c:
        raise ValueError(f"latent shapes differ: {z_cond.shape} vs {z.shape}")
    return LatentVideo(values=np.concatenate([z_cond.values, z.values], axis=1))


def q_sample(z0: np.ndarray, t: int, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Closed-form forward diffusion at 1-based step t."""
    if not 1 <= t <= sched.steps:
        raise ValueError(f"t={t} outside 1..{sched.steps}")
    z0 = np.asarray(z0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if z0.shape != eps.shape:
        raise ValueError(f"z0 shape {z0.shape} != eps shape {eps.shape}")
    abar = sched.alpha_bars[t - 1]
    return np.sqrt(abar) * z0 + np.sqrt(1.0 - abar) * eps


@dataclass
class ToyDenoiser:
    """Linear probe: eps_hat = a * z_t + b * mean(conditioning features)."""

    a: float = 0.0
    b: float = 0.0

    def predict(self, z_t: np.ndarray, t: int, f_c: FeatureMatrix) -> np.ndarray:
        return self.a * z_t + self.b * float(f_c.values.mean())

    def loss_and_grads(self, z_t: np.ndarray, eps: np.ndarray,
                       f_c: FeatureMatrix) -> tuple[float, float, float, np.ndarray]:
        """MSE vs true noise, with gradients for (a, b) and for f_c."""
        m = float(f_c.values.mean())
        pred = self.a * z_t + self.b * m
        diff = pred - eps
        n = diff.size
        loss = float((diff ** 2).mean())
        d_pred = 2.0 * diff / n
        d_a = float((d_pred * z_t).sum())
        d_b = float(d_pred.sum() * m)
        d_fc = np.full(f_c.values.shape, d_pred.sum() * self.b / f_c.values.size)
        return loss, d_a, d_b, d_fc


def diffusion_loss(z0: np.ndarray, t: int, f_c: FeatureMatrix,
                   denoiser, rng: np.random.Generator,
                   sched: NoiseSchedule) -> float:
    """Noise-prediction MSE for one sampled corruption of z0."""
    eps = rng.standard_normal(np.asarray(z0).shape)
    z_t = q_sample(z0, t, eps, sched)
    pred = denoiser.predict(z_t, t, f_c) if hasattr(denoiser, "predict") \
        else denoiser(z_t, t, f_c)
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != eps.shape:
        raise ValueError(f"denoiser output shape {pred.shape} != {eps.shape}")
    return float(((eps - pred) ** 2).mean())


def train_toy_denoiser(
    z0: np.ndarray,
    t: int,
    f_i: FeatureMatrix,
    f_a: FeatureMatrix,
    f_t: FeatureMatrix,
    params: AdapterParams,
    sched: NoiseSchedule,
    rng: np.random.Generator,
    steps: int = 200,
    lr: float = 0.05,
) -> tuple[float, float, ToyDenoiser]:
    """Plain gradient descent of the toy denoiser on one fixed batch.

    The conditioning features flow through the adapter, so its projection
    layers receive gradient too. Returns (initial loss, final loss, denoiser).
    """
    eps = rng.standard_normal(np.asarray(z0).shape)
    z_t = q_sample(z0, t, eps, sched)
    den = ToyDenoiser()
    first = last = None
    for _ in range(steps):
        f_c = mca_forward(f_i, f_a, f_t, params)
        loss, d_a, d_b, d_fc = den.loss_and_grads(z_t, eps, f_c)
        grads = mca_backward(f_i, f_a, f_t, params, d_fc)
        if first is None:
            first = loss
        last = loss
        den.a -= lr * d_a
        den.b -= lr * d_b
        params.z_m.w -= lr * grads.params.z_m.w
        params.z_m.b -= lr * grads.params.z_m.b
        params.z_t.w -= lr * grads.params.z_t.w
        params.z_t.b -= lr * grads.params.z_t.b
    return float(first), float(last), den
