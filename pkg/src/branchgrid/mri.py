"""Multi-coil MRI data model and acquisition operators.

Arrays are laid out [C, H, W] with the phase-encode axis along H. The
2-D FFT is orthonormal with the zero frequency at the array center, so
the forward operator is unitary on a full mask and the adjoint is exact
under the standard complex inner product. All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .masks import SamplingMask
from .validation import check_coil_maps, check_complex_image, check_kspace


def fft2c(x: np.ndarray) -> np.ndarray:
    """Centered orthonormal 2-D FFT over the last two axes."""
    return np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(x, axes=(-2, -1)), norm="ortho"),
        axes=(-2, -1),
    )


def ifft2c(y: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2c`."""
    return np.fft.fftshift(
        np.fft.ifft2(np.fft.ifftshift(y, axes=(-2, -1)), norm="ortho"),
        axes=(-2, -1),
    )


@dataclass(frozen=True)
class AcquisitionModel:
    """Coil sensitivities plus a sampling mask: the operator mask * F * S."""

    sens: np.ndarray
    mask: SamplingMask

    def __post_init__(self):
        sens = check_coil_maps(self.sens)
        object.__setattr__(self, "sens", sens)
        if self.mask.height != sens.shape[1]:
            raise ValueError(
                f"mask height {self.mask.height} does not match maps H={sens.shape[1]}"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.sens.shape

    def line_mask(self) -> np.ndarray:
        """Mask broadcastable against [C, H, W] k-space."""
        return self.mask.lines.astype(np.float64)[None, :, None]


def forward(x: np.ndarray, model: AcquisitionModel) -> np.ndarray:
    """Undersampled multi-coil acquisition: mask * FFT2(S_c * x) per coil."""
    x = check_complex_image(x)
    if x.shape != model.sens.shape[1:]:
        raise ValueError(f"image shape {x.shape} does not match maps {model.sens.shape}")
    return model.line_mask() * fft2c(model.sens * x[None])


def adjoint(y: np.ndarray, model: AcquisitionModel) -> np.ndarray:
    """Exact adjoint of :func:`forward`: sum_c conj(S_c) * IFFT2(mask * y_c)."""
    y = check_kspace(y, model.sens)
    return np.sum(np.conj(model.sens) * ifft2c(model.line_mask() * y), axis=0)


def sense_combine(y: np.ndarray, sens: np.ndarray) -> np.ndarray:
    """Coil-combined image sum_c conj(S_c) * IFFT2(y_c).

    Equals :func:`adjoint` with an all-ones mask; on fully sampled data
    with normalized maps this inverts :func:`forward` exactly.
    """
    sens = check_coil_maps(sens)
    y = check_kspace(y, sens)
    return np.sum(np.conj(sens) * ifft2c(y), axis=0)


def make_phantom(h: int, w: int, seed: int = 0) -> np.ndarray:
    """Deterministic piecewise-smooth complex phantom.

    Overlapping ellipses with distinct intensities under a smooth phase
    ramp; the maximum magnitude is normalized to 1. Same seed, same output.
    """
    if h < 16 or w < 16:
        raise ValueError(f"phantom must be at least 16x16, got {h}x{w}")
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(-1, 1, h), np.linspace(-1, 1, w), indexing="ij")

    mag = np.zeros((h, w), dtype=np.float64)
    # Background ellipse plus a handful of overlapping internal ones.
    mag[(xx / 0.9) ** 2 + (yy / 0.9) ** 2 <= 1.0] = 0.5
    for _ in range(6):
        cx, cy = rng.uniform(-0.5, 0.5, size=2)
        ax, ay = rng.uniform(0.12, 0.45, size=2)
        angle = rng.uniform(0.0, np.pi)
        u = (xx - cx) * np.cos(angle) + (yy - cy) * np.sin(angle)
        v = -(xx - cx) * np.sin(angle) + (yy - cy) * np.cos(angle)
        inside = (u / ax) ** 2 + (v / ay) ** 2 <= 1.0
        mag[inside] += rng.uniform(-0.35, 0.6)
    mag = np.clip(mag, 0.0, None)

    gx, gy, gq = rng.uniform(-1.0, 1.0, size=3)
    phase = np.pi * (gx * xx + gy * yy + 0.5 * gq * xx * yy)
    img = mag * np.exp(1j * phase)

    peak = np.abs(img).max()
    if peak > 0:
        img = img / peak
    return img.astype(np.complex128)


def make_coil_maps(c: int, h: int, w: int, seed: int = 0) -> np.ndarray:
    """Smooth complex Gaussian coil profiles, pixelwise normalized.

    Coils sit at distinct border positions; profiles have full support so
    no pixel has zero total sensitivity. sum_c |S_c|^2 == 1 at every pixel.
    """
    if c < 1:
        raise ValueError(f"need at least one coil, got {c}")
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(-1, 1, h), np.linspace(-1, 1, w), indexing="ij")

    maps = np.empty((c, h, w), dtype=np.complex128)
    angles = 2.0 * np.pi * np.arange(c) / c + rng.uniform(0.0, 2.0 * np.pi)
    for i in range(c):
        cx = 1.1 * np.cos(angles[i])
        cy = 1.1 * np.sin(angles[i])
        sigma = rng.uniform(0.8, 1.2)
        mag = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma**2))
        px, py = rng.uniform(-0.5, 0.5, size=2)
        maps[i] = mag * np.exp(1j * np.pi * (px * xx + py * yy))

    norm = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    return maps / norm[None]
