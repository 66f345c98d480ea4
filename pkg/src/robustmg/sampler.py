"""Generative-model sampling and empirical kernel estimation.

Every ``(h, s, a)`` cell owns an independent Philox stream keyed on
``(seed, flat cell index)``; draw ``k`` of a cell always consumes the same
counter block, so a dataset does not depend on the order or the process in
which cells are generated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .core import RobustMarkovGame, parse_json
from .errors import GameFormatError, ShapeMismatch

RNG_NAME = "numpy.random.Philox(key=(seed, cell))"


@dataclass(frozen=True, eq=False)
class SampleDataset:
    counts: np.ndarray   # (H, S, A, S) int64
    per_cell: int
    seed: int

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.ndim != 4 or np.any(c < 0):
            raise ShapeMismatch("counts must be a non-negative (H, S, A, S) tensor")
        if np.any(c.sum(axis=-1) != self.per_cell):
            raise ShapeMismatch(f"every cell must hold exactly {self.per_cell} samples")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total_samples(self) -> int:
        return int(self.counts.sum())


def cell_stream(seed: int, cell: int) -> np.random.Generator:
    key = np.array([seed, cell], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _categorical_counts(row: np.ndarray, n: int, gen: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(row)
    last = int(np.flatnonzero(row > 0)[-1])
    cdf[last:] = 1.0
    picks = np.searchsorted(cdf, gen.random(n), side="right")
    return np.bincount(picks, minlength=row.shape[0])


def draw(game: RobustMarkovGame, N: int, seed: int) -> SampleDataset:
    """``N`` next-state samples from every nominal kernel row."""
    N = int(N)
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    P = game.kernel
    rows = P.reshape(-1, P.shape[-1])
    counts = np.empty(rows.shape, dtype=np.int64)
    for cell, row in enumerate(rows):
        counts[cell] = _categorical_counts(row, N, cell_stream(seed, cell))
    return SampleDataset(counts.reshape(P.shape), N, seed)


def empirical_game(game: RobustMarkovGame, data: SampleDataset) -> RobustMarkovGame:
    if data.counts.shape != game.kernel.shape:
        raise ShapeMismatch(f"dataset shape {data.counts.shape} != kernel shape {game.kernel.shape}")
    return game.with_kernel(data.counts / data.per_cell)


def dataset_to_dict(data: SampleDataset) -> dict:
    return {
        "tool_version": __version__,
        "rng": RNG_NAME,
        "seed": data.seed,
        "per_cell": data.per_cell,
        "counts": data.counts.tolist(),
    }


def dataset_from_dict(d: dict) -> SampleDataset:
    try:
        return SampleDataset(np.asarray(d["counts"], dtype=np.int64), int(d["per_cell"]), int(d["seed"]))
    except KeyError as exc:
        raise GameFormatError(f"dataset file is missing field {exc}") from exc


def save_dataset(data: SampleDataset, path) -> None:
    Path(path).write_text(json.dumps(dataset_to_dict(data)) + "\n")


def load_dataset(path) -> SampleDataset:
    path = Path(path)
    return dataset_from_dict(parse_json(path.read_text(), str(path)))
