"""Communication classes of colours and the canonical block ordering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .model import UrnModel


@dataclass(frozen=True)
class ClassDecomposition:
    """Partition of colours into communication classes.

    Classes are numbered in the canonical order: type-1 classes first, then
    type-2, then type-3 (topologically sorted).  The *matrix* block order is
    different: type 1, then type 3, then type 2, which makes the permuted
    generating matrix block lower triangular.

    Attributes
    ----------
    classes : tuple of tuple of int
        Colour indices (0-based, sorted) of each class.
    types : tuple of int
        Type label 1, 2 or 3 per class.
    leads_to : ndarray of bool, shape (d, d)
        ``leads_to[i, j]`` iff class ``i`` leads to class ``j`` (reflexive).
    ordering : ndarray of int
        Colour permutation realizing the block order.
    """

    classes: tuple[tuple[int, ...], ...]
    types: tuple[int, ...]
    leads_to: np.ndarray
    ordering: np.ndarray
    block_order: tuple[int, ...]

    @property
    def d(self) -> int:
        return len(self.classes)

    @property
    def a(self) -> int:
        return self.types.count(1)

    @property
    def b(self) -> int:
        return self.types.count(3)

    @property
    def c(self) -> int:
        return self.types.count(2)

    def dominant(self, i: int) -> bool:
        return self.types[i] in (1, 2)

    def class_of(self, colour: int) -> int:
        for i, cls in enumerate(self.classes):
            if colour in cls:
                return i
        raise IndexError(colour)

    def block_label(self, i: int) -> str:
        """``T``/``P``/``Q`` label of class ``i``, numbered within its type."""
        kind = self.types[i]
        rank = sum(1 for j in range(i) if self.types[j] == kind) + 1
        return {1: "T", 3: "P", 2: "Q"}[kind] + str(rank)

    def dominant_colours(self) -> list[int]:
        return [col for i, cls in enumerate(self.classes)
                if self.dominant(i) for col in cls]

    def table(self) -> list[dict]:
        return [{"class": i + 1, "colours": [c + 1 for c in cls],
                 "type": t, "block": self.block_label(i)}
                for i, (cls, t) in enumerate(zip(self.classes, self.types))]


def _scc_labels(R: np.ndarray) -> np.ndarray:
    # edge i -> j iff drawing i adds balls of colour j
    adj = (np.asarray(R).T > 0).astype(np.int8)
    np.fill_diagonal(adj, 0)
    _, labels = connected_components(csr_matrix(adj), directed=True,
                                     connection="strong")
    return labels


def decompose(model: UrnModel) -> ClassDecomposition:
    """Compute classes, their types and the canonical ordering."""
    R = model.R
    q = model.q
    labels = _scc_labels(R)
    groups: dict[int, list[int]] = {}
    for colour, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(colour)
    raw = sorted((tuple(g) for g in groups.values()), key=lambda g: g[0])
    d = len(raw)
    index = np.empty(q, dtype=np.int64)
    for i, cls in enumerate(raw):
        index[list(cls)] = i

    direct = np.eye(d, dtype=bool)
    for i, j in zip(*np.nonzero(R.T > 0)):
        direct[index[i], index[j]] = True
    leads = direct.copy()
    for _ in range(d):
        nxt = (leads.astype(np.int64) @ direct.astype(np.int64)) > 0
        if np.array_equal(nxt, leads):
            break
        leads = nxt

    others = ~np.eye(d, dtype=bool)
    dominant = ~(leads & others).any(axis=1)
    entered = (leads & others).any(axis=0)
    kinds = np.where(dominant, np.where(entered, 2, 1), 3)

    type1 = [i for i in range(d) if kinds[i] == 1]
    type2 = [i for i in range(d) if kinds[i] == 2]
    type3 = _topological([i for i in range(d) if kinds[i] == 3], leads, raw)

    order = type1 + type2 + type3
    classes = tuple(raw[i] for i in order)
    types = tuple(int(kinds[i]) for i in order)
    leads_to = leads[np.ix_(order, order)]

    a, c = len(type1), len(type2)
    block_order = tuple(list(range(a)) + list(range(a + c, d))
                        + list(range(a, a + c)))
    ordering = np.array([col for blk in block_order for col in classes[blk]],
                        dtype=np.int64)
    return ClassDecomposition(classes, types, leads_to, ordering, block_order)


def _topological(nodes, leads, raw):
    """Kahn's algorithm, ties broken by smallest colour index."""
    pending = set(nodes)
    result = []
    while pending:
        ready = [(raw[i][0], i) for i in pending
                 if not any(leads[j, i] for j in pending if j != i)]
        _, i = min(ready)
        result.append(i)
        pending.remove(i)
    return result


def permuted_matrix(model: UrnModel, decomposition: ClassDecomposition) -> np.ndarray:
    """``R`` in block order (rows and columns permuted together)."""
    p = decomposition.ordering
    return model.R[np.ix_(p, p)]


def block_slices(decomposition: ClassDecomposition) -> list[tuple[int, slice]]:
    """(class index, slice into the permuted coordinates) per diagonal block."""
    out, start = [], 0
    for blk in decomposition.block_order:
        size = len(decomposition.classes[blk])
        out.append((blk, slice(start, start + size)))
        start += size
    return out


def is_block_lower_triangular(model: UrnModel,
                              decomposition: ClassDecomposition) -> bool:
    Rp = permuted_matrix(model, decomposition)
    for bi, (_, si) in enumerate(block_slices(decomposition)):
        for bj, (_, sj) in enumerate(block_slices(decomposition)):
            if bj > bi and np.any(Rp[si, sj] != 0):
                return False
    return True
