"""Balance-aware sparse expert router.

``BranchNav`` buffers token-frequency vectors, fits a spherical k-means
cluster kernel under cosine similarity, and routes each sample to one
branch: the least-used branch while the kernel is missing or the
routing counts are imbalanced beyond the ratio threshold, the most
similar cluster center otherwise.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from . import ctns
from .validation import check_word_frequency

logger = logging.getLogger(__name__)


def _normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot normalize all-zero rows")
    return x / norms


def _seed_centers(xn: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    # k-means++ on unit vectors; squared Euclidean 2(1 - cos) is monotone
    # in cosine distance, so the seeding matches the metric.
    n = xn.shape[0]
    centers = np.empty((k, xn.shape[1]))
    centers[0] = xn[rng.integers(n)]
    d2 = np.maximum(2.0 - 2.0 * (xn @ centers[0]), 0.0)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            j = int(rng.integers(n))
        else:
            j = int(rng.choice(n, p=d2 / total))
        centers[i] = xn[j]
        d2 = np.minimum(d2, np.maximum(2.0 - 2.0 * (xn @ centers[i]), 0.0))
    return centers


def spherical_kmeans(x, k: int, random_state: int = 0,
                     max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cosine-similarity k-means on L2-normalized rows.

    Centers are re-normalized every iteration; assignment ties go to the
    smallest center index; empty clusters are re-seeded to the point
    farthest (lowest max-cosine) from the occupied centers. Stops when
    assignments stabilize or after ``max_iter`` iterations.

    Returns (centers [k, d], labels [n]).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < k:
        raise ValueError(f"need at least k={k} rows, got array of shape {x.shape}")
    xn = _normalize_rows(x)
    rng = np.random.default_rng(random_state)

    centers = _seed_centers(xn, k, rng)
    labels = np.argmax(xn @ centers.T, axis=1)

    for _ in range(max_iter):
        new_centers = np.empty_like(centers)
        empty = []
        for c in range(k):
            members = xn[labels == c]
            if members.shape[0] == 0:
                empty.append(c)
                continue
            mean = members.mean(axis=0)
            norm = np.linalg.norm(mean)
            new_centers[c] = mean / norm if norm > 0 else centers[c]
        used: list[int] = []
        for c in empty:
            occupied = [i for i in range(k) if i not in empty or i in used]
            sims = xn @ new_centers[occupied].T if occupied else np.zeros((xn.shape[0], 1))
            new_centers[c] = xn[int(np.argmin(sims.max(axis=1)))]
            used.append(c)

        centers = new_centers
        new_labels = np.argmax(xn @ centers.T, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centers, labels


class BranchNav(BaseEstimator):
    """Stateful router over ``n_branch`` experts.

    Buffering starts in epoch 2; once the buffer holds ``n_buffer``
    vectors the cluster kernel is fitted and frozen. ``route`` picks the
    least-used branch whenever the kernel is missing or
    max(counts)/min(counts) exceeds ``balance_ratio`` (a zero minimum
    with nonzero maximum counts as infinite imbalance), and the nearest
    center by cosine similarity otherwise. Exactly one branch per call.
    """

    def __init__(self, n_branch: int, n_buffer: int = 512,
                 balance_ratio: float = 3.0, random_state: int = 0,
                 max_iter: int = 100):
        self.n_branch = n_branch
        self.n_buffer = n_buffer
        self.balance_ratio = balance_ratio
        self.random_state = random_state
        self.max_iter = max_iter
        self.reset()

    def reset(self) -> "BranchNav":
        if self.n_branch < 1:
            raise ValueError(f"n_branch must be >= 1, got {self.n_branch}")
        if self.n_buffer < self.n_branch:
            raise ValueError(
                f"n_buffer={self.n_buffer} smaller than n_branch={self.n_branch}"
            )
        self.buffer_: list[np.ndarray] = []
        self.centers_: np.ndarray | None = None
        self.routing_counts_ = np.zeros(self.n_branch, dtype=np.int64)
        self.epoch_ = 1
        return self

    @property
    def buffering_enabled(self) -> bool:
        return self.epoch_ >= 2

    def advance_epoch(self) -> "BranchNav":
        self.epoch_ += 1
        return self

    def observe(self, wf) -> "BranchNav":
        """Buffer one token-frequency vector; no-op during epoch 1 and
        once the kernel exists. A full buffer triggers kernel fitting."""
        wf = check_word_frequency(wf)
        if not self.buffering_enabled or self.centers_ is not None:
            return self
        if len(self.buffer_) < self.n_buffer:
            self.buffer_.append(wf.copy())
        if len(self.buffer_) >= self.n_buffer:
            self.init_kernel()
        return self

    def init_kernel(self) -> "BranchNav":
        """Fit the cluster kernel from the buffered vectors and clear them."""
        if len(self.buffer_) < self.n_branch:
            raise ValueError(
                f"need at least {self.n_branch} buffered vectors, "
                f"have {len(self.buffer_)}"
            )
        x = np.stack(self.buffer_)
        self.centers_, _ = spherical_kmeans(x, self.n_branch,
                                            random_state=self.random_state,
                                            max_iter=self.max_iter)
        self.buffer_.clear()
        return self

    def _imbalanced(self) -> bool:
        mx = int(self.routing_counts_.max())
        mn = int(self.routing_counts_.min())
        if mx == 0:
            return False
        if mn == 0:
            return True
        return mx / mn > self.balance_ratio

    def route(self, wf) -> int:
        """Route one sample; increments the chosen branch's count."""
        wf = check_word_frequency(wf)
        if self.centers_ is None:
            choice = int(np.argmin(self.routing_counts_))
        else:
            sims = self.centers_ @ (wf / np.linalg.norm(wf))
            kernel_choice = int(np.argmax(sims))
            if self._imbalanced():
                choice = int(np.argmin(self.routing_counts_))
                if choice != kernel_choice:
                    logger.debug(
                        "balance override: kernel chose %d, routing to "
                        "least-used %d (counts %s)",
                        kernel_choice, choice, self.routing_counts_.tolist(),
                    )
            else:
                choice = kernel_choice
        self.routing_counts_[choice] += 1
        return choice

    # -- batch (offline) surface -------------------------------------------

    def fit(self, x, y=None) -> "BranchNav":
        """Fit the cluster kernel directly from a matrix of vectors."""
        x = np.asarray(x, dtype=np.float64)
        self.centers_, _ = spherical_kmeans(x, self.n_branch,
                                            random_state=self.random_state,
                                            max_iter=self.max_iter)
        return self

    def predict(self, x) -> np.ndarray:
        """Pure kernel assignments for a batch; counts are not touched."""
        if self.centers_ is None:
            raise ValueError("kernel not initialized; call fit or init_kernel")
        x = np.asarray(x, dtype=np.float64)
        return np.argmax(_normalize_rows(x) @ self.centers_.T, axis=1)

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        """JSON snapshot (counts, epoch, buffer size) plus a CTNS tensor
        for the centers when initialized. The buffer is not persisted."""
        path = Path(path)
        state = {
            "n_branch": self.n_branch,
            "n_buffer": self.n_buffer,
            "balance_ratio": self.balance_ratio,
            "random_state": self.random_state,
            "max_iter": self.max_iter,
            "routing_counts": self.routing_counts_.tolist(),
            "epoch": self.epoch_,
            "has_centers": self.centers_ is not None,
        }
        path.write_text(json.dumps(state, sort_keys=True))
        if self.centers_ is not None:
            ctns.write(str(path) + ".ctns", self.centers_.astype(np.float32))

    @classmethod
    def load(cls, path) -> "BranchNav":
        path = Path(path)
        state = json.loads(path.read_text())
        nav = cls(n_branch=state["n_branch"], n_buffer=state["n_buffer"],
                  balance_ratio=state["balance_ratio"],
                  random_state=state["random_state"], max_iter=state["max_iter"])
        nav.routing_counts_ = np.asarray(state["routing_counts"], dtype=np.int64)
        nav.epoch_ = state["epoch"]
        if state["has_centers"]:
            nav.centers_ = ctns.read(str(path) + ".ctns").astype(np.float64)
        return nav
