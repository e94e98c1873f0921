"""Point and block smoothers: Jacobi, Gauss-Seidel and additive Schwarz."""
from __future__ import annotations

import logging
import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..mesh import node_patches

log = logging.getLogger(__name__)

JACOBI = "jacobi"
GAUSS_SEIDEL = "gauss-seidel"
SCHWARZ_ELEMENT = "schwarz-elementwise"
SCHWARZ_PATCH = "schwarz-patchwise"
KINDS = (JACOBI, GAUSS_SEIDEL, SCHWARZ_ELEMENT, SCHWARZ_PATCH)

# 2D relaxation defaults for additive Schwarz; point smoothers are undamped.
DEFAULT_OMEGA = {JACOBI: 1.0, GAUSS_SEIDEL: 1.0, SCHWARZ_ELEMENT: 1.0 / 3.0, SCHWARZ_PATCH: 1.0 / 6.0}

_ALIASES = {
    "gs": GAUSS_SEIDEL, "gauss_seidel": GAUSS_SEIDEL,
    "elementwise": SCHWARZ_ELEMENT, "schwarz_elementwise": SCHWARZ_ELEMENT,
    "patchwise": SCHWARZ_PATCH, "schwarz_patchwise": SCHWARZ_PATCH,
}


def canonical_kind(kind):
    kind = _ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ValueError(f"unknown smoother {kind!r}; expected one of {KINDS}")
    return kind


class SingularBlockError(RuntimeError):
    pass


class JacobiSmoother:
    kind = JACOBI

    def __init__(self, A, omega=1.0):
        d = A.diagonal()
        if np.any(d <= 0):
            raise ValueError("Jacobi smoother needs a positive diagonal")
        self.inv_diag = 1.0 / d
        self.omega = omega

    def apply(self, r):
        return self.omega * self.inv_diag * r


class GaussSeidelSmoother:
    """Forward sweep ``(D + L)^-1 r``; symmetric adds the backward sweep."""

    kind = GAUSS_SEIDEL

    def __init__(self, A, omega=1.0, symmetric=False):
        A = sp.csr_matrix(A)
        if np.any(A.diagonal() <= 0):
            raise ValueError("Gauss-Seidel smoother needs a positive diagonal")
        self.A = A
        self.lower = _triangular_solver(sp.tril(A, format="csc"))
        self.upper = _triangular_solver(sp.triu(A, format="csc")) if symmetric else None
        self.omega = omega
        self.symmetric = symmetric

    def apply(self, r):
        y = self.lower(r)
        if self.symmetric:
            y = y + self.upper(r - self.A @ y)
        return self.omega * y


def _triangular_solver(T):
    # SuperLU on a triangular matrix in natural order has no fill and no
    # pivoting; its compiled substitution is much faster than spsolve_triangular.
    lu = splu(T, permc_spec="NATURAL", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    return lu.solve


class SchwarzSmoother:
    """Additive Schwarz ``omega * sum_i P_i A_i^-1 P_i^T``.

    Blocks are padded into a few size buckets so that block inverses are
    built and applied as batched dense operations.
    """

    def __init__(self, A, blocks, omega, kind=SCHWARZ_ELEMENT):
        self.kind = kind
        self.omega = omega
        self.n = A.shape[0]
        self.blocks = [np.asarray(b, dtype=int) for b in blocks if len(b)]
        covered = np.zeros(self.n, dtype=bool)
        for b in self.blocks:
            covered[b] = True
        if not covered.all():
            raise ValueError(f"{int((~covered).sum())} DOFs are not covered by any Schwarz block")
        A = sp.csr_matrix(A)
        self.buckets = []
        self._where = {}
        order = sorted(range(len(self.blocks)), key=lambda i: len(self.blocks[i]))
        groups = {}
        for i in order:
            groups.setdefault(_bucket(len(self.blocks[i])), []).append(i)
        for m, ids in sorted(groups.items()):
            for row, i in enumerate(ids):
                self._where[i] = (len(self.buckets), row)
            self.buckets.append(self._factor_bucket(A, ids, m))

    def _factor_bucket(self, A, ids, m):
        nb = len(ids)
        idx = np.full((nb, m), self.n, dtype=int)
        for row, i in enumerate(ids):
            b = self.blocks[i]
            idx[row, :len(b)] = b
        mask = idx < self.n
        inv = np.empty((nb, m, m))
        step = max(1, _CHUNK_BYTES // (8 * m * m))
        eye = np.eye(m, dtype=bool)
        for lo in range(0, nb, step):
            hi = min(lo + step, nb)
            dense = np.zeros((hi - lo, m, m))
            for row in range(lo, hi):
                b = self.blocks[ids[row]]
                dense[row - lo, :len(b), :len(b)] = A[b][:, b].toarray()
            dense[~mask[lo:hi, :, None] & eye[None]] = 1.0
            inv[lo:hi] = _spd_inverse(dense, ids[lo:hi])
        inv *= mask[:, :, None] & mask[:, None, :]
        return idx, inv

    def apply(self, r):
        ext = np.append(r, 0.0)
        out = np.zeros(self.n + 1)
        for idx, inv in self.buckets:
            y = np.matmul(inv, ext[idx][:, :, None])[:, :, 0]
            out += np.bincount(idx.ravel(), y.ravel(), minlength=self.n + 1)
        return self.omega * out[: self.n]

    def block_inverse(self, i):
        """Dense inverse stored for block ``i`` (in the block's own ordering)."""
        m = len(self.blocks[i])
        bucket, row = self._where[i]
        return self.buckets[bucket][1][row, :m, :m]

    @property
    def max_block(self):
        return max(len(b) for b in self.blocks)


# Upper bound on the dense scratch space used while factoring one chunk of blocks.
_CHUNK_BYTES = 64 << 20


def _bucket(m):
    return m if m <= 16 else 8 * math.ceil(m / 8)


def _spd_inverse(blocks, ids):
    """Inverses of a stack of SPD blocks, diagonally scaled; Cholesky certifies definiteness."""
    d = np.sqrt(np.einsum("bii->bi", blocks))
    if np.any(~(d > 0)):
        bad = int(np.flatnonzero(~(d > 0).all(axis=1))[0])
        raise SingularBlockError(f"Schwarz block {ids[bad]} has a non-positive diagonal entry")
    scaled = blocks / d[:, :, None] / d[:, None, :]
    try:
        np.linalg.cholesky(scaled)
    except np.linalg.LinAlgError:
        for row in range(len(scaled)):
            try:
                np.linalg.cholesky(scaled[row])
            except np.linalg.LinAlgError:
                raise SingularBlockError(
                    f"Schwarz block {ids[row]} is singular or indefinite") from None
        raise
    inv = np.linalg.inv(scaled)
    inv = 0.5 * (inv + np.swapaxes(inv, 1, 2))
    return inv / d[:, :, None] / d[:, None, :]


def _level_map(dofmap, level_dofs):
    local = np.full(dofmap.n_dofs, -1, dtype=int)
    local[level_dofs] = np.arange(len(level_dofs))
    return local


def element_blocks(mesh, dofmap, level_dofs):
    """One block per leaf cell: level DOFs of every function supported on it."""
    local = _level_map(dofmap, level_dofs)
    blocks = []
    for leaf in mesh.leaves():
        ids = local[dofmap.leaf_dofs(leaf).ravel()]
        ids = np.unique(ids[ids >= 0])
        if len(ids):
            blocks.append(ids)
    return blocks


def patch_blocks(mesh, dofmap, level_dofs):
    """One block per base-grid vertex: level DOFs supported on its base elements."""
    local = _level_map(dofmap, level_dofs)
    per_base = {}
    for leaf in mesh.leaves():
        per_base.setdefault(mesh.base_cell(*leaf), []).append(dofmap.leaf_dofs(leaf).ravel())
    per_base = {b: np.concatenate(v) for b, v in per_base.items()}
    blocks = []
    for patch in node_patches(mesh):
        ids = local[np.concatenate([per_base[e] for e in patch.elements if e in per_base])]
        ids = np.unique(ids[ids >= 0])
        if len(ids):
            blocks.append(ids)
    return blocks


def build_smoother(level, kind, mesh=None, dofmap=None, omega=None, symmetric_gs=False):
    """Smoother for one multigrid level (``level`` is an ``MgLevel``)."""
    kind = canonical_kind(kind)
    omega = DEFAULT_OMEGA[kind] if omega is None else omega
    if kind == JACOBI:
        return JacobiSmoother(level.A, omega)
    if kind == GAUSS_SEIDEL:
        return GaussSeidelSmoother(level.A, omega, symmetric_gs)
    if mesh is None or dofmap is None:
        raise ValueError("Schwarz smoothers need the mesh and dof map")
    select = element_blocks if kind == SCHWARZ_ELEMENT else patch_blocks
    blocks = select(mesh, dofmap, level.dofs)
    sm = SchwarzSmoother(level.A, blocks, omega, kind)
    log.debug("%s: %d blocks, max size %d", kind, len(sm.blocks), sm.max_block)
    return sm


def schwarz_preconditioner(A, mesh, dofmap, kind=SCHWARZ_ELEMENT, dofs=None):
    """Plain (undamped) additive Schwarz operator on the full system."""
    kind = canonical_kind(kind)
    dofs = np.arange(dofmap.n_dofs) if dofs is None else dofs
    select = element_blocks if kind == SCHWARZ_ELEMENT else patch_blocks
    return SchwarzSmoother(A, select(mesh, dofmap, dofs), 1.0, kind)
