"""Cartesian phase-encode undersampling masks.

A mask is a binary vector over phase-encode line indices 0..H-1 with a
fully sampled autocalibration (ACS) block at the center of k-space,
replicated across the frequency-encode axis at acquisition time.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))

DEFAULT_ACS = 20
STANDARD_ACCELERATIONS = (4, 8, 10, 12, 16, 20, 24)


class MaskFamily(str, Enum):
    UNIFORM = "uniform"
    KT_GAUSSIAN = "kt_gaussian"
    KT_RADIAL = "kt_radial"
    FULL = "full"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SamplingMask:
    """Binary phase-encode line mask with acquisition metadata."""

    lines: np.ndarray
    acceleration: int = 1
    family: MaskFamily = MaskFamily.CUSTOM
    acs_count: int = 0

    def __post_init__(self):
        lines = np.asarray(self.lines, dtype=np.uint8)
        if lines.ndim != 1:
            raise ValueError(f"mask lines must be 1-D, got shape {lines.shape}")
        if not np.all((lines == 0) | (lines == 1)):
            raise ValueError("mask lines must be binary")
        object.__setattr__(self, "lines", lines)

    @property
    def height(self) -> int:
        return int(self.lines.shape[0])

    @property
    def n_sampled(self) -> int:
        return int(self.lines.sum())

    @property
    def is_full(self) -> bool:
        return bool(np.all(self.lines == 1))

    @classmethod
    def full(cls, h: int) -> "SamplingMask":
        return cls(np.ones(h, dtype=np.uint8), acceleration=1,
                   family=MaskFamily.FULL, acs_count=h)

    @classmethod
    def from_lines(cls, lines) -> "SamplingMask":
        """Wrap a raw line vector loaded from disk; metadata is inferred."""
        lines = np.asarray(lines)
        lines = (lines != 0).astype(np.uint8)
        n = int(lines.sum())
        if n == 0:
            raise ValueError("mask samples no lines")
        accel = max(1, round(lines.shape[0] / n))
        fam = MaskFamily.FULL if n == lines.shape[0] else MaskFamily.CUSTOM
        return cls(lines, acceleration=accel, family=fam, acs_count=0)


def acs_block(h: int, acs: int) -> np.ndarray:
    """Indices of the ``acs`` center-most phase-encode lines."""
    start = h // 2 - acs // 2
    return np.arange(start, start + acs)


def _gaussian_line_weights(h: int) -> np.ndarray:
    k = np.arange(h, dtype=np.float64)
    sigma = h / 6.0
    return np.exp(-((k - h / 2.0) ** 2) / (2.0 * sigma**2))


def _uniform_fill(h: int, acs_idx: np.ndarray, budget: int, rng) -> np.ndarray:
    candidates = np.setdiff1d(np.arange(h), acs_idx)
    step = candidates.size / budget
    offset = rng.uniform(0.0, step)
    picks = np.floor(offset + step * np.arange(budget)).astype(int)
    return candidates[picks]

def _gaussian_fill(candidates: np.ndarray, budget: int, h: int, rng) -> np.ndarray:
    w = _gaussian_line_weights(h)[candidates]
    p = w / w.sum()
    return rng.choice(candidates, size=budget, replace=False, p=p)


def _radial_lines(h: int, n_spokes: int, rng) -> np.ndarray:
    # Pseudo-radial: each golden-angle spoke contributes the phase-encode
    # line at its projection onto the routed axis.
    theta0 = rng.uniform(0.0, 2.0 * np.pi)
    theta = theta0 + GOLDEN_ANGLE * np.arange(n_spokes)
    k = h // 2 + np.round(((h - 1) / 2.0) * np.cos(theta)).astype(int)
    return np.clip(k, 0, h - 1)


def make_mask(family: MaskFamily | str, h: int, acceleration: int,
              acs: int = DEFAULT_ACS, seed: int = 0) -> SamplingMask:
    """Generate an undersampling mask.

    The number of sampled lines is ``round(h / acceleration)`` clamped to at
    least ``acs``; the ACS block centered at ``h/2`` is always included.

    Parameters
    ----------
    family : one of ``uniform``, ``kt_gaussian``, ``kt_radial``
        Uniform spaces the non-ACS lines equally from a seeded offset.
        kt-Gaussian draws them without replacement with center-weighted
        Gaussian probability (width h/6). kt-Radial projects golden-angle
        pseudo-radial spokes onto the phase-encode axis, deduplicates and
        tops up Gaussian-style.
    h : number of phase-encode lines.
    acceleration : nominal acceleration factor, integer >= 2.
    acs : number of autocalibration lines, must be < h.
    seed : RNG seed; identical arguments and seed give identical masks.
    """
    family = MaskFamily(family)
    if family in (MaskFamily.FULL, MaskFamily.CUSTOM):
        raise ValueError(f"cannot generate mask of family {family.value!r}")
    if acceleration <= 1:
        raise ValueError(f"acceleration must be an integer >= 2, got {acceleration}")
    if acs <= 0 or acs >= h:
        raise ValueError(f"acs must satisfy 0 < acs < h, got acs={acs}, h={h}")

    rng = np.random.default_rng(seed)
    acs_idx = acs_block(h, acs)
    n_lines = max(round(h / acceleration), acs)

    lines = np.zeros(h, dtype=np.uint8)
    lines[acs_idx] = 1
    budget = n_lines - acs

    if budget > 0:
        if family is MaskFamily.UNIFORM:
            lines[_uniform_fill(h, acs_idx, budget, rng)] = 1
        elif family is MaskFamily.KT_GAUSSIAN:
            candidates = np.flatnonzero(lines == 0)
            lines[_gaussian_fill(candidates, budget, h, rng)] = 1
        else:  # KT_RADIAL
            taken = 0
            for k in _radial_lines(h, n_lines, rng):
                if taken == budget:
                    break
                if lines[k] == 0:
                    lines[k] = 1
                    taken += 1
            if taken < budget:
                candidates = np.flatnonzero(lines == 0)
                lines[_gaussian_fill(candidates, budget - taken, h, rng)] = 1

    mask = SamplingMask(lines, acceleration=acceleration, family=family, acs_count=acs)
    assert mask.n_sampled == n_lines
    return mask
