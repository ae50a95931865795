"""Unrolled branch-grid reconstruction.

A grid of ``n_cascade`` x ``n_branch`` closed-form expert denoisers is
unrolled around a gradient data-consistency step. All experts within a
cascade share one codebook; the token-frequency histogram produced by a
cascade routes the next one through a per-cascade ``BranchNav``. Exactly
one branch runs per cascade.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import nmse as _nmse
from .mri import AcquisitionModel, adjoint, forward, sense_combine
from .routing import BranchNav
from .vq import VqCodebook, extract_features, prompt_fuse, word_frequency

DEFAULT_ETA = 0.5


# ---------------------------------------------------------------------------
# experts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianSmooth:
    """Blend with a binomial blur: (1-strength) * x + strength * blur(x)."""

    strength: float
    radius: int = 1

    def __post_init__(self):
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError(f"strength must be in [0, 1], got {self.strength}")
        if self.radius < 0 or self.radius != int(self.radius):
            raise ValueError(f"radius must be a non-negative int, got {self.radius}")


@dataclass(frozen=True)
class SoftThreshold:
    """Complex magnitude soft-thresholding; phase is preserved."""

    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")


ExpertSpec = GaussianSmooth | SoftThreshold


def _binomial_kernel(radius: int) -> np.ndarray:
    k = np.array([1.0])
    for _ in range(2 * radius):
        k = np.convolve(k, [1.0, 1.0])
    return k / k.sum()


def _blur(a: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    from scipy.ndimage import convolve1d

    out = convolve1d(a, kernel, axis=0, mode="wrap")
    return convolve1d(out, kernel, axis=1, mode="wrap")


def apply_expert(x: np.ndarray, spec: ExpertSpec) -> np.ndarray:
    """Run one closed-form denoiser; both kinds are non-expansive."""
    if isinstance(spec, GaussianSmooth):
        if spec.strength == 0.0:
            return x.copy()
        kernel = _binomial_kernel(spec.radius)
        blurred = _blur(x.real, kernel) + 1j * _blur(x.imag, kernel)
        return (1.0 - spec.strength) * x + spec.strength * blurred
    if isinstance(spec, SoftThreshold):
        if spec.tau == 0.0:
            return x.copy()
        mag = np.abs(x)
        scale = np.maximum(mag - spec.tau, 0.0) / np.maximum(mag, 1e-12)
        return x * scale
    raise ValueError(f"unknown expert spec {spec!r}")


def expert_from_dict(d: dict) -> ExpertSpec:
    kind = d.get("kind")
    if kind == "gaussian_smooth":
        return GaussianSmooth(strength=float(d["strength"]),
                              radius=int(d.get("radius", 1)))
    if kind == "soft_threshold":
        return SoftThreshold(tau=float(d["tau"]))
    raise ValueError(f"unknown expert kind {kind!r}")


def expert_to_dict(spec: ExpertSpec) -> dict:
    if isinstance(spec, GaussianSmooth):
        return {"kind": "gaussian_smooth", "strength": spec.strength,
                "radius": spec.radius}
    return {"kind": "soft_threshold", "tau": spec.tau}


# ---------------------------------------------------------------------------
# data consistency
# ---------------------------------------------------------------------------

def dc_step(x: np.ndarray, y: np.ndarray, model: AcquisitionModel,
            eta: float) -> np.ndarray:
    """Gradient step on the data term: x - eta * A^H (A x - y)."""
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    if eta == 0.0:
        return x.copy()
    return x - eta * adjoint(forward(x, model) - y, model)


# ---------------------------------------------------------------------------
# the grid
# ---------------------------------------------------------------------------

@dataclass
class BranchGrid:
    """Expert grid plus per-cascade shared codebooks and routers.

    ``experts[t][b]`` is the expert at cascade t, branch b. Every branch
    of cascade t quantizes through ``codebooks[t]`` (shared object), and
    ``navs[t]`` routes entry into cascade t.
    """

    experts: list[list[ExpertSpec]]
    codebooks: list[VqCodebook]
    navs: list[BranchNav]
    eta: float = DEFAULT_ETA
    alpha: float = 0.1
    patch: int = 2

    def __post_init__(self):
        if not self.experts or not self.experts[0]:
            raise ValueError("experts grid must be non-empty")
        width = len(self.experts[0])
        if any(len(row) != width for row in self.experts):
            raise ValueError("experts grid must be rectangular")
        if len(self.codebooks) != len(self.experts):
            raise ValueError("need one codebook per cascade")
        if len(self.navs) != len(self.experts):
            raise ValueError("need one router per cascade")
        if any(nav.n_branch != width for nav in self.navs):
            raise ValueError("router width must equal n_branch")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.patch < 1:
            raise ValueError(f"patch must be >= 1, got {self.patch}")

    @property
    def n_cascade(self) -> int:
        return len(self.experts)

    @property
    def n_branch(self) -> int:
        return len(self.experts[0])

    @classmethod
    def build(cls, n_cascade: int, n_branch: int, expert: ExpertSpec,
              codebooks: list[VqCodebook], eta: float = DEFAULT_ETA,
              alpha: float = 0.1, patch: int = 2, n_buffer: int = 512,
              nav_seed: int = 0) -> "BranchGrid":
        """Uniform grid with one expert spec replicated over all cells."""
        experts = [[expert for _ in range(n_branch)] for _ in range(n_cascade)]
        navs = [BranchNav(n_branch, n_buffer=n_buffer,
                          random_state=nav_seed + t) for t in range(n_cascade)]
        return cls(experts=experts, codebooks=codebooks, navs=navs,
                   eta=eta, alpha=alpha, patch=patch)


@dataclass
class CascadeRecord:
    cascade: int
    branch: int
    residual: float
    nmse: float | None
    word_frequency: np.ndarray

    def to_dict(self) -> dict:
        return {
            "cascade": self.cascade,
            "branch": self.branch,
            "residual": self.residual,
            "nmse": self.nmse,
            "word_frequency": self.word_frequency.tolist(),
        }


@dataclass
class ReconTrace:
    """Per-cascade routing and convergence log for one reconstruction."""

    zero_fill_residual: float
    zero_fill_nmse: float | None
    records: list[CascadeRecord] = field(default_factory=list)

    @property
    def branch_path(self) -> list[int]:
        return [r.branch for r in self.records]

    @property
    def residuals(self) -> list[float]:
        return [r.residual for r in self.records]

    def to_dict(self) -> dict:
        return {
            "zero_fill_residual": self.zero_fill_residual,
            "zero_fill_nmse": self.zero_fill_nmse,
            "branch_path": self.branch_path,
            "cascades": [r.to_dict() for r in self.records],
        }


def run_cascade(x: np.ndarray, y: np.ndarray, model: AcquisitionModel,
                grid: BranchGrid, cascade_idx: int,
                branch_idx: int) -> tuple[np.ndarray, np.ndarray]:
    """One grid cell: dc step, expert, shared quantization, prompt fusion.

    Returns the cell output and the token-frequency histogram that routes
    the next cascade.
    """
    if not 0 <= cascade_idx < grid.n_cascade:
        raise IndexError(f"cascade {cascade_idx} out of range")
    if not 0 <= branch_idx < grid.n_branch:
        raise IndexError(f"branch {branch_idx} out of range")
    x = dc_step(x, y, model, grid.eta)
    x = apply_expert(x, grid.experts[cascade_idx][branch_idx])
    features = extract_features(x, grid.patch)
    cb = grid.codebooks[cascade_idx]
    indices, quantized = cb.quantize(features)
    x_out = prompt_fuse(x, quantized, grid.patch, grid.alpha)
    wf = word_frequency(indices, cb.n_codes, features.shape[0])
    return x_out, wf


def initial_word_frequency(y: np.ndarray, model: AcquisitionModel,
                           grid: BranchGrid) -> np.ndarray:
    """Token frequency of the zero-filled image under cascade 0's codebook."""
    x0 = sense_combine(y, model.sens)
    features = extract_features(x0, grid.patch)
    indices = grid.codebooks[0].predict(features)
    return word_frequency(indices, grid.codebooks[0].n_codes, features.shape[0])


def _residual(x, y, model) -> float:
    return float(np.linalg.norm(forward(x, model) - y))


def reconstruct(y: np.ndarray, model: AcquisitionModel, grid: BranchGrid,
                wf0: np.ndarray | None = None, x_true: np.ndarray | None = None,
                observe: bool = True) -> tuple[np.ndarray, ReconTrace]:
    """Run the full unrolled grid on undersampled k-space.

    Starts from the zero-filled combination; each cascade is entered
    through its router using the previous cascade's token frequency
    (``wf0`` for the first cascade, computed from the zero-filled image
    when not supplied). Exactly one branch executes per cascade. With
    ``observe`` the routers also buffer the frequencies, which is a no-op
    until their epoch counters pass 1.
    """
    x = sense_combine(y, model.sens)
    wf = wf0 if wf0 is not None else initial_word_frequency(y, model, grid)

    def ref_nmse(img):
        return _nmse(img, x_true) if x_true is not None else None

    trace = ReconTrace(zero_fill_residual=_residual(x, y, model),
                       zero_fill_nmse=ref_nmse(x))
    for t in range(grid.n_cascade):
        nav = grid.navs[t]
        if observe:
            nav.observe(wf)
        branch = nav.route(wf)
        x, wf = run_cascade(x, y, model, grid, t, branch)
        trace.records.append(CascadeRecord(
            cascade=t, branch=branch, residual=_residual(x, y, model),
            nmse=ref_nmse(x), word_frequency=wf,
        ))
    return x, trace


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------

def _experts_from_config(cfg, n_cascade: int, n_branch: int) -> list[list[ExpertSpec]]:
    if isinstance(cfg, dict):
        spec = expert_from_dict(cfg)
        return [[spec for _ in range(n_branch)] for _ in range(n_cascade)]
    experts = [[expert_from_dict(cell) for cell in row] for row in cfg]
    if len(experts) != n_cascade or any(len(r) != n_branch for r in experts):
        raise ValueError("experts table does not match n_cascade x n_branch")
    return experts


def grid_from_config(cfg: dict, base_dir: str | Path = ".") -> BranchGrid:
    """Build a grid from a JSON-style dict; codebooks are loaded from
    per-cascade CTNS paths (one shared path is re-read per cascade)."""
    base = Path(base_dir)
    n_cascade = int(cfg["n_cascade"])
    n_branch = int(cfg["n_branch"])
    experts = _experts_from_config(cfg["experts"], n_cascade, n_branch)

    paths = cfg["codebooks"]
    if isinstance(paths, str):
        paths = [paths] * n_cascade
    if len(paths) != n_cascade:
        raise ValueError(f"need {n_cascade} codebook paths, got {len(paths)}")
    codebooks = [VqCodebook.load(base / p) for p in paths]

    nav_cfg = cfg.get("nav", {})
    navs = [BranchNav(n_branch,
                      n_buffer=int(nav_cfg.get("n_buffer", 512)),
                      balance_ratio=float(nav_cfg.get("balance_ratio", 3.0)),
                      random_state=int(nav_cfg.get("seed", 0)) + t)
            for t in range(n_cascade)]

    return BranchGrid(experts=experts, codebooks=codebooks, navs=navs,
                      eta=float(cfg.get("eta", DEFAULT_ETA)),
                      alpha=float(cfg.get("alpha", 0.1)),
                      patch=int(cfg.get("patch", 2)))


def load_grid(path: str | Path) -> BranchGrid:
    path = Path(path)
    return grid_from_config(json.loads(path.read_text()), base_dir=path.parent)
