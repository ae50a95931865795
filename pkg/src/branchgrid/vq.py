"""Vector-quantization codebook with EMA updates and prompt fusion.

``VqCodebook`` follows the scikit-learn estimator protocol: ``fit``
seeds the codewords with k-means++ over a feature batch, ``predict``
returns nearest-codeword indices, ``transform`` the quantized features.
Online codebook adaptation goes through ``ema_update``. The module
functions handle the token-frequency histogram and the residual fusion
of quantized patches back into an image.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import ctns
from .validation import check_complex_image, check_features

COUNT_EPSILON = 1e-5
REVIVAL_THRESHOLD = 1e-3

_CHUNK_ELEMENTS = 1 << 22


def kmeanspp_seed(features: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ center selection (squared Euclidean)."""
    n = features.shape[0]
    centers = np.empty((k, features.shape[1]), dtype=np.float64)
    centers[0] = features[rng.integers(n)]
    d2 = np.sum((features - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            j = int(rng.integers(n))
        else:
            j = int(rng.choice(n, p=d2 / total))
        centers[i] = features[j]
        d2 = np.minimum(d2, np.sum((features - centers[i]) ** 2, axis=1))
    return centers


class VqCodebook(TransformerMixin, BaseEstimator):
    """Nearest-neighbor vector quantizer with EMA codebook updates.

    Parameters
    ----------
    n_codes : codebook size K.
    decay : EMA decay in [0, 1); 0 makes one update replace the
        accumulators with the batch statistics.
    random_state : seed for k-means++ initialization and dead-code
        revival draws.

    Attributes
    ----------
    codewords_ : [K, d] float64 codeword matrix.
    ema_counts_, ema_sums_ : EMA accumulators driving the codewords.
    """

    def __init__(self, n_codes: int = 1024, decay: float = 0.99,
                 random_state: int = 0):
        self.n_codes = n_codes
        self.decay = decay
        self.random_state = random_state

    def _validate_params(self):
        if self.n_codes < 2:
            raise ValueError(f"n_codes must be >= 2, got {self.n_codes}")
        if not 0.0 <= self.decay < 1.0:
            raise ValueError(f"decay must be in [0, 1), got {self.decay}")

    def fit(self, features, y=None) -> "VqCodebook":
        """Seed the codewords with k-means++ over a feature batch."""
        self._validate_params()
        features = check_features(features)
        if features.shape[0] < self.n_codes:
            raise ValueError(
                f"need at least n_codes={self.n_codes} features to seed, "
                f"got {features.shape[0]}"
            )
        self._rng = np.random.default_rng(self.random_state)
        self.d_ = features.shape[1]
        self.codewords_ = kmeanspp_seed(features, self.n_codes, self._rng)
        self.ema_counts_ = np.zeros(self.n_codes)
        self.ema_sums_ = np.zeros((self.n_codes, self.d_))
        return self

    def _distances(self, features: np.ndarray) -> np.ndarray:
        # Plain squared differences, chunked over rows; matches a
        # brute-force distance scan bit for bit.
        n = features.shape[0]
        out = np.empty((n, self.n_codes))
        chunk = max(1, _CHUNK_ELEMENTS // (self.n_codes * self.d_))
        for start in range(0, n, chunk):
            block = features[start:start + chunk]
            out[start:start + chunk] = np.sum(
                (block[:, None, :] - self.codewords_[None]) ** 2, axis=-1
            )
        return out

    def quantize(self, features) -> tuple[np.ndarray, np.ndarray]:
        """Nearest codeword per row; ties go to the smallest index.

        Returns (indices, quantized rows).
        """
        check_is_fitted(self, "codewords_")
        features = check_features(features, self.d_)
        indices = np.argmin(self._distances(features), axis=1)
        return indices, self.codewords_[indices]

    def predict(self, features) -> np.ndarray:
        return self.quantize(features)[0]

    def transform(self, features) -> np.ndarray:
        return self.quantize(features)[1]

    def ema_update(self, features, indices=None) -> "VqCodebook":
        """One EMA step of the codebook on an assigned feature batch.

        Codes whose count falls below the revival threshold are re-seeded
        to a random feature from the batch.
        """
        check_is_fitted(self, "codewords_")
        features = check_features(features, self.d_)
        if indices is None:
            indices = self.predict(features)
        else:
            indices = np.asarray(indices)
            if indices.shape[0] != features.shape[0]:
                raise ValueError(
                    f"{indices.shape[0]} indices for {features.shape[0]} features"
                )

        n_k = np.bincount(indices, minlength=self.n_codes).astype(np.float64)
        sums = np.zeros_like(self.ema_sums_)
        np.add.at(sums, indices, features)

        self.ema_counts_ = self.decay * self.ema_counts_ + (1.0 - self.decay) * n_k
        self.ema_sums_ = self.decay * self.ema_sums_ + (1.0 - self.decay) * sums
        self.codewords_ = self.ema_sums_ / np.maximum(self.ema_counts_, COUNT_EPSILON)[:, None]

        dead = self.ema_counts_ < REVIVAL_THRESHOLD
        if dead.any():
            picks = self._rng.integers(0, features.shape[0], size=int(dead.sum()))
            self.codewords_[dead] = features[picks]
            # Accumulators restart as one fresh observation of the feature,
            # keeping the sums/counts ratio exactly on the new codeword.
            mass = max(1.0 - self.decay, REVIVAL_THRESHOLD)
            self.ema_counts_[dead] = mass
            self.ema_sums_[dead] = mass * self.codewords_[dead]
        return self

    # -- persistence ------------------------------------------------------

    def save(self, path) -> None:
        """Write codewords as a [K, d] float32 CTNS tensor plus a JSON sidecar."""
        check_is_fitted(self, "codewords_")
        path = Path(path)
        ctns.write(path, self.codewords_.astype(np.float32))
        sidecar = {
            "decay": self.decay,
            "ema_counts": self.ema_counts_.tolist(),
            "K": int(self.n_codes),
            "d": int(self.d_),
        }
        Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True))

    @classmethod
    def load(cls, path) -> "VqCodebook":
        path = Path(path)
        codewords = ctns.read(path).astype(np.float64)
        meta = json.loads(Path(str(path) + ".json").read_text())
        cb = cls(n_codes=meta["K"], decay=meta["decay"])
        cb._rng = np.random.default_rng(cb.random_state)
        cb.d_ = meta["d"]
        if codewords.shape != (meta["K"], meta["d"]):
            raise ValueError(
                f"codeword tensor {codewords.shape} does not match sidecar "
                f"({meta['K']}, {meta['d']})"
            )
        cb.codewords_ = codewords
        cb.ema_counts_ = np.asarray(meta["ema_counts"], dtype=np.float64)
        # The sidecar stores counts only; rebuild the sums at the current
        # fixed point so further EMA updates remain consistent.
        cb.ema_sums_ = cb.codewords_ * np.maximum(cb.ema_counts_, COUNT_EPSILON)[:, None]
        return cb


@dataclass(frozen=True)
class VqLossReport:
    """Three-term quantization diagnostic.

    Without autograd the stop-gradient is the identity on values, so the
    codebook and commitment terms are numerically equal; they are kept
    separate because their weights differ.
    """

    codebook_loss: float
    commitment_loss: float
    alignment_loss: float
    beta: float
    gamma: float

    @property
    def total(self) -> float:
        return (self.codebook_loss + self.beta * self.commitment_loss
                + self.gamma * self.alignment_loss)


def vq_loss(features, cb: VqCodebook, beta: float = 0.25,
            gamma: float = 0.0) -> VqLossReport:
    """Mean squared feature/codeword gap reported as the three VQ terms."""
    if beta < 0 or gamma < 0:
        raise ValueError(f"beta and gamma must be >= 0, got {beta}, {gamma}")
    features = check_features(features)
    _, quantized = cb.quantize(features)
    gap = float(np.mean(np.sum((features - quantized) ** 2, axis=1)))
    return VqLossReport(gap, gap, gap, float(beta), float(gamma))


def word_frequency(indices, n_codes: int, n_pix: int) -> np.ndarray:
    """Normalized histogram of codeword assignments (sums to 1)."""
    indices = np.asarray(indices)
    if indices.ndim != 1 or indices.size < 1:
        raise ValueError("indices must be a non-empty 1-D array")
    if n_pix != indices.size:
        raise ValueError(f"n_pix={n_pix} but {indices.size} indices given")
    if np.any(indices < 0) or np.any(indices >= n_codes):
        raise ValueError(f"indices must lie in [0, {n_codes})")
    return np.bincount(indices, minlength=n_codes) / float(n_pix)


def _tile(a: np.ndarray, patch: int) -> np.ndarray:
    h, w = a.shape
    return (a.reshape(h // patch, patch, w // patch, patch)
             .swapaxes(1, 2)
             .reshape(-1, patch * patch))


def _untile(rows: np.ndarray, shape: tuple[int, int], patch: int) -> np.ndarray:
    h, w = shape
    return (rows.reshape(h // patch, w // patch, patch, patch)
                .swapaxes(1, 2)
                .reshape(h, w))


def extract_features(x, patch: int) -> np.ndarray:
    """Flatten non-overlapping patch x patch tiles into feature rows.

    Each row holds the tile's real parts followed by its imaginary
    parts, so d = 2 * patch**2 and N = (H/patch) * (W/patch).
    """
    x = check_complex_image(x)
    h, w = x.shape
    if patch < 1 or h % patch or w % patch:
        raise ValueError(f"patch {patch} must divide image dims {x.shape}")
    return np.concatenate([_tile(x.real, patch), _tile(x.imag, patch)], axis=1)


def prompt_fuse(x, quantized, patch: int, alpha: float) -> np.ndarray:
    """Fold quantized rows back into an image and blend residually.

    Returns x + alpha * (x_q - x); alpha=0 is the identity.
    """
    x = check_complex_image(x)
    if alpha == 0.0:
        return x.copy()
    h, w = x.shape
    d = 2 * patch * patch
    n = (h // patch) * (w // patch)
    quantized = np.asarray(quantized, dtype=np.float64)
    if quantized.shape != (n, d):
        raise ValueError(
            f"quantized rows {quantized.shape} do not match geometry ({n}, {d})"
        )
    half = patch * patch
    x_q = (_untile(quantized[:, :half], x.shape, patch)
           + 1j * _untile(quantized[:, half:], x.shape, patch))
    return x + alpha * (x_q - x)
