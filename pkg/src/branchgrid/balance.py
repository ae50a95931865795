"""Adaptive sample balancing over category groupings.

Each sample's draw weight is a product over categories of
``1 + ((N/n_r) / c_r(g) - 1) * 0.8`` where N is the corpus size, n_r the
number of groups under category r and c_r(g) the size of the sample's
group. Groups at average size get multiplier 1; minority groups are
drawn more often.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

DAMPING = 0.8
MULTIPLIER_FLOOR = 0.05


@dataclass(frozen=True)
class SampleRecord:
    id: str
    attributes: dict

    def group(self, category: str) -> str:
        try:
            return self.attributes[category]
        except KeyError:
            raise ValueError(
                f"sample {self.id!r} is missing category {category!r}"
            ) from None


def group_sizes(records: list[SampleRecord], category: str) -> Counter:
    return Counter(r.group(category) for r in records)


def update_weights(records: list[SampleRecord], categories: list[str],
                   base: dict | None = None) -> dict:
    """Multiplicative weight update, applied once per category.

    Weights start at 1 (or at ``base`` for compounding across epochs).
    Multipliers are clamped to at least 0.05; clamping is logged.
    """
    if not records:
        raise ValueError("no records to weight")
    n = len(records)
    weights = {r.id: 1.0 if base is None else float(base[r.id]) for r in records}

    for category in categories:
        sizes = group_sizes(records, category)
        n_groups = len(sizes)
        if n_groups == 0:
            raise ValueError(f"category {category!r} has no groups")
        target = n / n_groups
        for r in records:
            mult = 1.0 + (target / sizes[r.group(category)] - 1.0) * DAMPING
            if mult < MULTIPLIER_FLOOR:
                logger.warning(
                    "clamping multiplier %.4f to %.2f for sample %s "
                    "(category %s)", mult, MULTIPLIER_FLOOR, r.id, category,
                )
                mult = MULTIPLIER_FLOOR
            weights[r.id] *= mult
    return weights


def draws_from_weights(weights: dict, seed: int = 0) -> dict:
    """Stochastic rounding: floor(weight) + Bernoulli(frac(weight))."""
    rng = np.random.default_rng(seed)
    draws = {}
    for sample_id, w in weights.items():
        if w <= 0:
            raise ValueError(f"weight for {sample_id!r} must be positive, got {w}")
        base = math.floor(w)
        draws[sample_id] = base + int(rng.random() < (w - base))
    return draws


def read_manifest(path) -> list[SampleRecord]:
    """JSON-lines manifest; every non-``id`` key is a category attribute."""
    records = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        row = json.loads(line)
        if "id" not in row:
            raise ValueError(f"manifest line {line_no} has no 'id' field")
        sample_id = str(row.pop("id"))
        records.append(SampleRecord(id=sample_id,
                                    attributes={k: str(v) for k, v in row.items()}))
    return records
