"""Reconstruction quality metrics: NMSE, PSNR, SSIM.

Complex inputs are reduced to magnitude images before comparison; real
inputs are used as given. The reference image defines the dynamic range.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import uniform_filter

SSIM_WINDOW = 7
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    ssim: float
    psnr: float
    nmse: float

    def to_dict(self) -> dict:
        return asdict(self)


def _as_real(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return np.abs(a).astype(np.float64)
    return a.astype(np.float64)


def _check_pair(xhat, x):
    xhat, x = _as_real(xhat), _as_real(x)
    if xhat.shape != x.shape:
        raise ValueError(f"shape mismatch: {xhat.shape} vs {x.shape}")
    return xhat, x


def nmse(xhat, x) -> float:
    """Normalized mean squared error ||xhat - x||^2 / ||x||^2."""
    xhat, x = _check_pair(xhat, x)
    denom = float(np.sum(x**2))
    if denom == 0.0:
        raise ValueError("reference image is all-zero; NMSE undefined")
    return float(np.sum((xhat - x) ** 2) / denom)


def psnr(xhat, x) -> float:
    """Peak SNR in dB, 10*log10(max(|x|)^2 / MSE); +inf for identical inputs."""
    xhat, x = _check_pair(xhat, x)
    mse = float(np.mean((xhat - x) ** 2))
    if mse == 0.0:
        return math.inf
    peak = float(np.max(np.abs(x)))
    return 10.0 * math.log10(peak**2 / mse)


def ssim(xhat, x) -> float:
    """Mean local SSIM with a 7x7 uniform window.

    Stabilizers k1=0.01, k2=0.03; the dynamic range is taken from the
    reference (max(|x|) - min(|x|)). The mean is over windows fully inside
    the image.
    """
    xhat, x = _check_pair(xhat, x)
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    drange = float(np.max(np.abs(x)) - np.min(np.abs(x)))
    if drange == 0.0:
        raise ValueError("reference has zero dynamic range; SSIM undefined")

    c1 = (SSIM_K1 * drange) ** 2
    c2 = (SSIM_K2 * drange) ** 2

    def mean(a):
        return uniform_filter(a, size=SSIM_WINDOW)

    mu1, mu2 = mean(xhat), mean(x)
    s11 = mean(xhat * xhat) - mu1 * mu1
    s22 = mean(x * x) - mu2 * mu2
    s12 = mean(xhat * x) - mu1 * mu2

    num = (2 * mu1 * mu2 + c1) * (2 * s12 + c2)
    den = (mu1**2 + mu2**2 + c1) * (s11 + s22 + c2)
    smap = num / den

    pad = SSIM_WINDOW // 2
    return float(smap[pad:-pad, pad:-pad].mean())


def evaluate(xhat, x) -> MetricReport:
    """All three metrics in one report."""
    return MetricReport(ssim=ssim(xhat, x), psnr=psnr(xhat, x), nmse=nmse(xhat, x))
