"""Block-diagonal density matrices.

A density matrix on a space that splits into mutually incoherent subspaces is
stored as one dense square block per subspace.  The blocks are flattened
(row-major, concatenated in label order) into a single complex vector for the
integrators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

from .linalg import hermiticity_defect


@dataclass(frozen=True)
class BlockLayout:
    """Ordered block labels and their dimensions."""

    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.dims):
            raise ValueError("labels and dims differ in length")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate block labels")
        if any(d < 1 for d in self.dims):
            raise ValueError("block dimensions must be >= 1")

    @property
    def size(self) -> int:
        return sum(d * d for d in self.dims)

    @property
    def n_states(self) -> int:
        return sum(self.dims)

    def slices(self) -> dict[str, slice]:
        out = {}
        start = 0
        for label, d in zip(self.labels, self.dims):
            out[label] = slice(start, start + d * d)
            start += d * d
        return out

    def dim(self, label: str) -> int:
        return self.dims[self.labels.index(label)]

    def trace_weights(self) -> np.ndarray:
        """Vector w with w . vec(rho) = total trace."""
        w = np.zeros(self.size)
        for sl, d in zip(self.slices().values(), self.dims):
            w[sl] = np.eye(d).ravel()
        return w

    def population_weights(self, labels: Iterable[str]) -> np.ndarray:
        w = np.zeros(self.size)
        sls = self.slices()
        for label in labels:
            d = self.dim(label)
            w[sls[label]] = np.eye(d).ravel()
        return w


class BlockDensityMatrix(Mapping[str, np.ndarray]):
    """Ordered mapping label -> square complex block.

    Instances are treated as immutable; ``with_block`` returns a copy.
    """

    def __init__(self, layout: BlockLayout, blocks: Mapping[str, np.ndarray] | None = None):
        self.layout = layout
        self._blocks: dict[str, np.ndarray] = {}
        blocks = blocks or {}
        unknown = set(blocks) - set(layout.labels)
        if unknown:
            raise KeyError(f"unknown block labels {sorted(unknown)}")
        for label, d in zip(layout.labels, layout.dims):
            if label in blocks:
                b = np.array(blocks[label], dtype=complex).reshape(d, d)
            else:
                b = np.zeros((d, d), dtype=complex)
            b.setflags(write=False)
            self._blocks[label] = b

    @classmethod
    def zeros(cls, layout: BlockLayout) -> "BlockDensityMatrix":
        return cls(layout)

    @classmethod
    def from_vector(cls, layout: BlockLayout, vec: np.ndarray) -> "BlockDensityMatrix":
        vec = np.asarray(vec)
        if vec.shape != (layout.size,):
            raise ValueError(f"vector has shape {vec.shape}, layout needs ({layout.size},)")
        sls = layout.slices()
        return cls(layout, {lab: vec[sls[lab]] for lab in layout.labels})

    def to_vector(self) -> np.ndarray:
        return np.concatenate([b.ravel() for b in self._blocks.values()])

    def __getitem__(self, label: str) -> np.ndarray:
        return self._blocks[label]

    def __iter__(self) -> Iterator[str]:
        return iter(self._blocks)

    def __len__(self) -> int:
        return len(self._blocks)

    def with_block(self, label: str, block) -> "BlockDensityMatrix":
        blocks = dict(self._blocks)
        blocks[label] = block
        return BlockDensityMatrix(self.layout, blocks)

    def population(self, label: str) -> float:
        return float(np.trace(self._blocks[label]).real)

    def populations(self) -> dict[str, float]:
        return {lab: self.population(lab) for lab in self._blocks}

    def trace(self) -> complex:
        return complex(sum(np.trace(b) for b in self._blocks.values()))

    def hermiticity_defect(self) -> float:
        return max(hermiticity_defect(b) for b in self._blocks.values())

    def min_eigenvalue(self) -> float:
        return min(
            float(np.linalg.eigvalsh(0.5 * (b + b.conj().T))[0]) for b in self._blocks.values()
        )

    def __repr__(self) -> str:
        pops = ", ".join(f"{k}={v:.6g}" for k, v in self.populations().items())
        return f"BlockDensityMatrix({pops})"
