"""Input validation helpers shared by the estimator and operator APIs."""

from __future__ import annotations

import numpy as np

MIN_IMAGE_DIM = 4


def check_complex_image(x, name: str = "x") -> np.ndarray:
    """Validate a 2-D complex image and return it as complex128."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {x.shape}")
    h, w = x.shape
    if h < MIN_IMAGE_DIM or w < MIN_IMAGE_DIM:
        raise ValueError(f"{name} must be at least {MIN_IMAGE_DIM}x{MIN_IMAGE_DIM}, got {x.shape}")
    x = x.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(x.view(np.float64))):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def check_coil_maps(sens, name: str = "sens", normalized: bool = True,
                    tol: float = 1e-6) -> np.ndarray:
    """Validate [C, H, W] coil sensitivity maps.

    With ``normalized=True`` the per-pixel sum of squared magnitudes must
    equal 1 within ``tol``. Pixels with zero total sensitivity are also
    accepted: transformed maps are zero-padded outside the field of view
    (generated maps have full support).
    """
    sens = np.asarray(sens)
    if sens.ndim != 3:
        raise ValueError(f"{name} must have shape [C, H, W], got {sens.shape}")
    if sens.shape[0] < 1:
        raise ValueError(f"{name} needs at least one coil")
    sens = sens.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(sens.view(np.float64))):
        raise ValueError(f"{name} contains non-finite entries")
    if normalized:
        power = np.sum(np.abs(sens) ** 2, axis=0)
        ok = (np.abs(power - 1.0) <= tol) | (power <= tol)
        if not np.all(ok):
            worst = float(np.max(np.abs(power[~ok] - 1.0)))
            raise ValueError(
                f"{name} is not pixelwise normalized (max |power-1| = {worst:.3g})"
            )
    return sens


def check_kspace(y, sens: np.ndarray | None = None, name: str = "y") -> np.ndarray:
    """Validate [C, H, W] k-space data, optionally against coil maps."""
    y = np.asarray(y)
    if y.ndim != 3:
        raise ValueError(f"{name} must have shape [C, H, W], got {y.shape}")
    y = y.astype(np.complex128, copy=False)
    if sens is not None and y.shape != sens.shape:
        raise ValueError(f"{name} shape {y.shape} does not match coil maps {sens.shape}")
    return y


def check_features(features, d: int | None = None, name: str = "features") -> np.ndarray:
    """Validate an [N, d] real feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValueError(f"{name} must be a non-empty [N, d] matrix, got {features.shape}")
    if d is not None and features.shape[1] != d:
        raise ValueError(f"{name} has dim {features.shape[1]}, expected {d}")
    return features


def check_word_frequency(wf, n_codes: int | None = None, name: str = "wf") -> np.ndarray:
    """Validate a normalized token-frequency histogram."""
    wf = np.asarray(wf, dtype=np.float64)
    if wf.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {wf.shape}")
    if n_codes is not None and wf.shape[0] != n_codes:
        raise ValueError(f"{name} has length {wf.shape[0]}, expected {n_codes}")
    if np.any(wf < 0):
        raise ValueError(f"{name} has negative entries")
    if abs(float(wf.sum()) - 1.0) > 1e-6:
        raise ValueError(f"{name} does not sum to 1 (sum = {float(wf.sum()):.9f})")
    return wf


def check_probability(p: float, name: str) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {p}")
    return p
