"""Dual-domain augmentation: joint image/coil-map geometric transforms
with k-space regeneration, plus k-space thermal noise and inter-shot
rigid-motion phase errors.

Geometric transforms are applied identically to the image and every
coil map so the forward model stays consistent; interpolating
transforms re-normalize the maps pixelwise afterwards. All randomness
flows through explicit seeds.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import affine_transform, gaussian_filter, map_coordinates

from .masks import SamplingMask
from .mri import AcquisitionModel, forward
from .validation import check_coil_maps, check_complex_image, check_kspace, check_probability

SIGMA_LIGHT_FRACTION = 0.02
SIGMA_HEAVY_FRACTION = 0.08

MAP_RENORM_THRESHOLD = 1e-6


# ---------------------------------------------------------------------------
# transform descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlipH:
    """Horizontal flip (frequency-encode axis)."""


@dataclass(frozen=True)
class FlipV:
    """Vertical flip (phase-encode axis)."""


@dataclass(frozen=True)
class ShiftInt:
    """Periodic integer-pixel shift by (dy, dx)."""

    dy: int
    dx: int

    def __post_init__(self):
        if self.dy != int(self.dy) or self.dx != int(self.dx):
            raise ValueError("shift offsets must be integers")


@dataclass(frozen=True)
class Rot90:
    """Rotation by n * 90 degrees, n in {1, 2, 3}."""

    n: int

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"rot90 step must be 1, 2 or 3, got {self.n}")


@dataclass(frozen=True)
class RotArbitrary:
    """Rotation by theta radians about the image center, |theta| <= pi."""

    theta: float

    def __post_init__(self):
        if not np.isfinite(self.theta) or abs(self.theta) > np.pi:
            raise ValueError(f"|theta| must be <= pi, got {self.theta}")


@dataclass(frozen=True)
class Scale:
    """Anisotropic scaling about the image center, factors in [0.7, 1.4]."""

    sy: float
    sx: float

    def __post_init__(self):
        for name, s in (("sy", self.sy), ("sx", self.sx)):
            if not 0.7 <= s <= 1.4:
                raise ValueError(f"{name} must be in [0.7, 1.4], got {s}")


@dataclass(frozen=True)
class Elastic:
    """Smooth random displacement field.

    ``alpha`` is the peak displacement in pixels (signed; negating it
    negates the field, which approximately inverts the warp), ``sigma``
    the Gaussian smoothing width of the field, ``seed`` fixes the field.
    """

    alpha: float
    sigma: float
    seed: int

    def __post_init__(self):
        if not abs(self.alpha) <= 10:
            raise ValueError(f"|alpha| must be <= 10, got {self.alpha}")
        if not self.sigma >= 2:
            raise ValueError(f"sigma must be >= 2, got {self.sigma}")


GeoTransform = FlipH | FlipV | ShiftInt | Rot90 | RotArbitrary | Scale | Elastic

INTEGER_TRANSFORMS = (FlipH, FlipV, ShiftInt, Rot90)


@dataclass(frozen=True)
class NoiseSpec:
    """Complex thermal noise of std ``sigma`` (per-component var sigma^2/2).

    When ``sigma`` is None it is resolved at application time from
    ``level``: 2% (light) or 8% (heavy) of the k-space infinity norm.
    """

    sigma: float | None = None
    level: str = "light"

    def __post_init__(self):
        if self.sigma is not None and self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.level not in ("light", "heavy"):
            raise ValueError(f"level must be 'light' or 'heavy', got {self.level!r}")

    def resolve_sigma(self, y: np.ndarray) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        frac = SIGMA_LIGHT_FRACTION if self.level == "light" else SIGMA_HEAVY_FRACTION
        return frac * float(np.abs(y).max())


@dataclass(frozen=True)
class MotionSpec:
    """Inter-shot phase errors applied to odd/even phase-encode lines."""

    phi_odd: float
    phi_even: float

    def __post_init__(self):
        if not (np.isfinite(self.phi_odd) and np.isfinite(self.phi_even)):
            raise ValueError("motion phases must be finite")


# ---------------------------------------------------------------------------
# image-domain transforms
# ---------------------------------------------------------------------------

def _warp_real(a: np.ndarray, warp) -> np.ndarray:
    return warp(a.real) + 1j * warp(a.imag)


def _affine_warp(matrix: np.ndarray, shape: tuple[int, int]):
    center = (np.asarray(shape, dtype=np.float64) - 1.0) / 2.0
    offset = center - matrix @ center

    def warp(a):
        return affine_transform(a, matrix, offset=offset, order=1,
                                mode="constant", cval=0.0)

    return warp


def elastic_field(shape: tuple[int, int], alpha: float, sigma: float,
                  seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis displacement fields, smoothed and scaled to peak |alpha|."""
    rng = np.random.default_rng(seed)
    fields = []
    for _ in range(2):
        f = gaussian_filter(rng.uniform(-1.0, 1.0, size=shape), sigma, mode="reflect")
        peak = np.abs(f).max()
        fields.append(alpha * f / peak if peak > 0 else f)
    return fields[0], fields[1]


def _elastic_warp(t: Elastic, shape: tuple[int, int]):
    dy, dx = elastic_field(shape, t.alpha, t.sigma, t.seed)
    rows, cols = np.meshgrid(np.arange(shape[0], dtype=np.float64),
                             np.arange(shape[1], dtype=np.float64), indexing="ij")
    coords = np.stack([rows + dy, cols + dx])

    def warp(a):
        return map_coordinates(a, coords, order=1, mode="constant", cval=0.0)

    return warp


def _renormalize_maps(sens: np.ndarray) -> np.ndarray:
    norm = np.sqrt(np.sum(np.abs(sens) ** 2, axis=0))
    safe = norm > MAP_RENORM_THRESHOLD
    out = np.where(safe[None], sens / np.where(safe, norm, 1.0)[None], 0.0 + 0.0j)
    return out


def apply_geo(x: np.ndarray, sens: np.ndarray,
              t: GeoTransform) -> tuple[np.ndarray, np.ndarray]:
    """Apply one geometric transform jointly to an image and its coil maps.

    Integer transforms (flips, 90-degree rotations, periodic shifts) are
    exact and leave the map normalization untouched; interpolating ones
    use bilinear interpolation on real/imag parts with zero padding and
    re-normalize the maps pixelwise afterwards.
    """
    x = check_complex_image(x)
    sens = check_coil_maps(sens, normalized=False)
    if sens.shape[1:] != x.shape:
        raise ValueError(f"maps {sens.shape} do not match image {x.shape}")

    if isinstance(t, FlipH):
        return np.flip(x, axis=-1).copy(), np.flip(sens, axis=-1).copy()
    if isinstance(t, FlipV):
        return np.flip(x, axis=-2).copy(), np.flip(sens, axis=-2).copy()
    if isinstance(t, ShiftInt):
        shift = (int(t.dy), int(t.dx))
        return (np.roll(x, shift, axis=(-2, -1)),
                np.roll(sens, shift, axis=(-2, -1)))
    if isinstance(t, Rot90):
        return (np.rot90(x, t.n, axes=(-2, -1)).copy(),
                np.rot90(sens, t.n, axes=(-2, -1)).copy())

    if isinstance(t, RotArbitrary):
        c, s = np.cos(t.theta), np.sin(t.theta)
        warp = _affine_warp(np.array([[c, -s], [s, c]]), x.shape)
    elif isinstance(t, Scale):
        warp = _affine_warp(np.diag([1.0 / t.sy, 1.0 / t.sx]), x.shape)
    elif isinstance(t, Elastic):
        warp = _elastic_warp(t, x.shape)
    else:
        raise ValueError(f"unknown transform {t!r}")

    x_aug = _warp_real(x, warp)
    sens_aug = np.stack([_warp_real(sens[c], warp) for c in range(sens.shape[0])])
    return x_aug, _renormalize_maps(sens_aug)


def regenerate_kspace(x_aug: np.ndarray, sens_aug: np.ndarray,
                      mask: SamplingMask) -> np.ndarray:
    """Re-run the forward model on augmented image and maps."""
    return forward(x_aug, AcquisitionModel(sens_aug, mask))


# ---------------------------------------------------------------------------
# k-space augmentations
# ---------------------------------------------------------------------------

def _match_magnitudes(out: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Nudge ``out`` by ulps so np.hypot(re, im) equals ``target`` bitwise.

    Unit-modulus modulation preserves magnitudes exactly in real
    arithmetic; float rounding breaks that on roughly half the entries,
    so the invariant is restored here. Perturbations stay within a few
    ulps of the rotated values.
    """
    for _ in range(3):
        cur = np.hypot(out.real, out.imag)
        bad = (cur != target) & (target > 0)
        if not bad.any():
            return out
        out[bad] *= target[bad] / cur[bad]

    flat = out.reshape(-1)
    tgt = target.reshape(-1)
    idx = np.flatnonzero((np.hypot(flat.real, flat.imag) != tgt) & (tgt > 0))
    if idx.size == 0:
        return out
    a0, b0, t0 = flat.real[idx], flat.imag[idx], tgt[idx]

    radius = 4
    ladder_a, ladder_b = {0: a0}, {0: b0}
    for k in range(1, radius + 1):
        ladder_a[k] = np.nextafter(ladder_a[k - 1], np.inf)
        ladder_a[-k] = np.nextafter(ladder_a[-(k - 1)], -np.inf)
        ladder_b[k] = np.nextafter(ladder_b[k - 1], np.inf)
        ladder_b[-k] = np.nextafter(ladder_b[-(k - 1)], -np.inf)

    a, b = a0.copy(), b0.copy()
    open_ = np.ones(idx.size, dtype=bool)
    offsets = sorted(itertools.product(range(-radius, radius + 1), repeat=2),
                     key=lambda o: (abs(o[0]) + abs(o[1]), o))
    for da, db in offsets:
        if da == 0 and db == 0:
            continue
        if not open_.any():
            break
        hit = open_ & (np.hypot(ladder_a[da], ladder_b[db]) == t0)
        if hit.any():
            a = np.where(hit, ladder_a[da], a)
            b = np.where(hit, ladder_b[db], b)
            open_ &= ~hit
    flat[idx] = a + 1j * b
    return out


def apply_motion(y: np.ndarray, spec: MotionSpec) -> np.ndarray:
    """Multiply every odd/even phase-encode line by its shot phase error.

    The modulation has unit modulus, so line magnitudes are preserved
    exactly: np.hypot(out.real, out.imag) equals the input magnitudes
    bitwise. Applied identically to all coils.
    """
    y = check_kspace(y)
    h = y.shape[1]
    k = np.arange(h)
    psi = np.where(k % 2 == 1,
                   np.exp(1j * spec.phi_odd),
                   np.exp(1j * spec.phi_even))
    out = y * psi[None, :, None]
    return _match_magnitudes(out, np.hypot(y.real, y.imag))


def add_thermal_noise(y: np.ndarray, spec: NoiseSpec, seed: int) -> np.ndarray:
    """Add i.i.d. complex Gaussian noise to every k-space entry.

    Real and imaginary parts each get variance sigma^2/2. Afterwards the
    volume is rescaled by 1/max(1, ||y_noise||_inf / ||y||_inf) so the
    peak never grows (same relative SNR change per scan); sigma=0 returns
    the input unchanged.
    """
    y = check_kspace(y)
    sigma = spec.resolve_sigma(y)
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0:
        return y.copy()
    rng = np.random.default_rng(seed)
    scale = sigma / np.sqrt(2.0)
    noise = rng.normal(0.0, scale, y.shape) + 1j * rng.normal(0.0, scale, y.shape)
    y_noise = y + noise
    peak0 = float(np.abs(y).max())
    peak1 = float(np.abs(y_noise).max())
    if peak0 > 0.0 and peak1 > peak0:
        y_noise *= peak0 / peak1
    return y_noise


# ---------------------------------------------------------------------------
# policy sampling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AugPolicy:
    """Per-augmentation firing probabilities and parameter ranges."""

    flip_h: float = 0.0
    flip_v: float = 0.0
    shift_p: float = 0.0
    shift_max: int = 4
    rot90_p: float = 0.0
    rot_p: float = 0.0
    rot_max_deg: float = 30.0
    scale_p: float = 0.0
    scale_min: float = 0.85
    scale_max: float = 1.15
    elastic_p: float = 0.0
    elastic_alpha: float = 3.0
    elastic_sigma: float = 4.0
    noise_p: float = 0.0
    noise_level: str = "light"
    motion_p: float = 0.0

    def __post_init__(self):
        for name in ("flip_h", "flip_v", "shift_p", "rot90_p", "rot_p",
                     "scale_p", "elastic_p", "noise_p", "motion_p"):
            check_probability(getattr(self, name), name)
        if self.noise_level not in ("light", "heavy"):
            raise ValueError(f"noise_level must be 'light' or 'heavy'")
        if not 0.0 < np.deg2rad(self.rot_max_deg) <= np.pi:
            raise ValueError("rot_max_deg must be in (0, 180]")
        if not (0.7 <= self.scale_min <= self.scale_max <= 1.4):
            raise ValueError("scale range must satisfy 0.7 <= min <= max <= 1.4")

    @classmethod
    def from_dict(cls, d: dict) -> "AugPolicy":
        def group(key, *fields):
            g = d.get(key)
            if g is None:
                return {}
            if isinstance(g, (int, float)):
                return {fields[0]: g}
            return {f: g[src] for f, src in fields if src in g}

        kw = {}
        kw.update(group("flip_h", "flip_h"))
        kw.update(group("flip_v", "flip_v"))
        kw.update(group("shift", ("shift_p", "p"), ("shift_max", "max")))
        kw.update(group("rot90", "rot90_p"))
        kw.update(group("rot", ("rot_p", "p"), ("rot_max_deg", "max_deg")))
        kw.update(group("scale", ("scale_p", "p"), ("scale_min", "min"),
                        ("scale_max", "max")))
        kw.update(group("elastic", ("elastic_p", "p"), ("elastic_alpha", "alpha"),
                        ("elastic_sigma", "sigma")))
        kw.update(group("noise", ("noise_p", "p"), ("noise_level", "level")))
        kw.update(group("motion", ("motion_p", "p")))
        return cls(**kw)

    @classmethod
    def from_json(cls, path) -> "AugPolicy":
        return cls.from_dict(json.loads(Path(path).read_text()))


def sample_augmentation(policy: AugPolicy, seed: int) -> list:
    """Sample which augmentations fire for one training example.

    Image-domain descriptors come first in a fixed canonical order,
    followed by k-space descriptors. Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    picked: list = []

    if rng.random() < policy.flip_h:
        picked.append(FlipH())
    if rng.random() < policy.flip_v:
        picked.append(FlipV())
    if rng.random() < policy.shift_p:
        dy, dx = rng.integers(-policy.shift_max, policy.shift_max + 1, size=2)
        picked.append(ShiftInt(int(dy), int(dx)))
    if rng.random() < policy.rot90_p:
        picked.append(Rot90(int(rng.integers(1, 4))))
    if rng.random() < policy.rot_p:
        bound = np.deg2rad(policy.rot_max_deg)
        picked.append(RotArbitrary(float(rng.uniform(-bound, bound))))
    if rng.random() < policy.scale_p:
        sy, sx = rng.uniform(policy.scale_min, policy.scale_max, size=2)
        picked.append(Scale(float(sy), float(sx)))
    if rng.random() < policy.elastic_p:
        picked.append(Elastic(policy.elastic_alpha, policy.elastic_sigma,
                              int(rng.integers(2**31))))
    if rng.random() < policy.noise_p:
        picked.append(NoiseSpec(level=policy.noise_level))
    if rng.random() < policy.motion_p:
        phi_odd = float(np.pi - rng.uniform(0.0, 2.0 * np.pi))
        phi_even = float(np.pi - rng.uniform(0.0, 2.0 * np.pi))
        picked.append(MotionSpec(phi_odd, phi_even))
    return picked


def augment_sample(x: np.ndarray, sens: np.ndarray, descriptors: list,
                   noise_seed: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run one augmentation pipeline on a fully sampled example.

    Applies the image-domain descriptors jointly to (x, sens), regenerates
    full k-space, then applies the k-space descriptors. Returns the
    augmented image, maps and k-space.
    """
    for t in descriptors:
        if isinstance(t, (NoiseSpec, MotionSpec)):
            continue
        x, sens = apply_geo(x, sens, t)
    y = regenerate_kspace(x, sens, SamplingMask.full(x.shape[0]))
    for t in descriptors:
        if isinstance(t, NoiseSpec):
            y = add_thermal_noise(y, t, noise_seed)
        elif isinstance(t, MotionSpec):
            y = apply_motion(y, t)
    return x, sens, y
