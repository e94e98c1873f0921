"""Nested multigrid levels obtained by trimming hierarchical DOFs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MgLevel:
    p_cap: int
    k_cap: int
    dofs: np.ndarray  # sorted indices into the fine system
    A: object = field(repr=False)  # principal submatrix of the fine matrix
    coarse_sel: np.ndarray | None = field(default=None, repr=False)  # next-coarser dofs, local positions

    @property
    def n(self):
        return len(self.dofs)


@dataclass
class LevelHierarchy:
    levels: list  # coarsest first

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, l):
        return self.levels[l]

    @property
    def finest(self):
        return self.levels[-1]

    def restrict(self, v, l):
        """Level ``l`` vector -> level ``l - 1`` by dropping the level-``l``-only entries."""
        return v[self.levels[l].coarse_sel]

    def prolongate(self, w, l):
        """Level ``l - 1`` vector -> level ``l``, zero in the added entries."""
        out = np.zeros(self.levels[l].n, dtype=np.result_type(w, float))
        out[self.levels[l].coarse_sel] = w
        return out

    def selection_matrix(self, l):
        """Dense 0/1 restriction matrix between levels ``l`` and ``l - 1`` (for checks)."""
        R = np.zeros((self.levels[l - 1].n, self.levels[l].n))
        R[np.arange(self.levels[l - 1].n), self.levels[l].coarse_sel] = 1.0
        return R


def level_sequence(p, k):
    """``(p_cap, k_cap)`` from fine to coarse: lower ``p`` first, then ``k``."""
    seq = [(q, k) for q in range(p, 0, -1)]
    seq += [(1, d) for d in range(k - 1, -1, -1)]
    return seq


def build_hierarchy(dofmap, A, p=None, k=None):
    """Levels for an arithmetic p-sequence followed by refinement-depth coarsening.

    Level matrices are cut out of the fine matrix: with binary restriction,
    ``R A R^T`` is exactly the principal submatrix on the kept DOFs. Levels
    that would repeat the next finer DOF set are skipped.
    """
    p = dofmap.p if p is None else p
    k = int(dofmap.depth.max(initial=0)) if k is None else k
    A = A.tocsr()
    levels = []
    prev = None
    for p_cap, k_cap in level_sequence(p, k):
        dofs = dofmap.trim(p_cap, k_cap)
        if len(dofs) == 0:
            raise ValueError(f"multigrid level (p={p_cap}, k={k_cap}) has no DOFs")
        if prev is not None and len(dofs) == len(prev.dofs):
            if len(levels) > 1:
                prev.p_cap, prev.k_cap = p_cap, k_cap
            continue
        sub = A[dofs][:, dofs].tocsr()
        sub.sort_indices()
        lvl = MgLevel(p_cap, k_cap, dofs, sub)
        levels.append(lvl)
        prev = lvl
    levels.reverse()
    for fine, coarse in zip(levels[1:], levels[:-1]):
        fine.coarse_sel = np.searchsorted(fine.dofs, coarse.dofs)
    if levels[-1].n != dofmap.n_dofs:
        raise ValueError("finest level does not cover all DOFs")
    return LevelHierarchy(levels)
