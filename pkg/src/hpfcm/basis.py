"""Integrated Legendre shape functions in 1D and their 2D combinations.

Mode indices follow the usual p-FEM convention (1-based): modes 1 and 2 are
the linear nodal functions, mode ``j + 1`` for ``j >= 2`` is the normalized
integral of the Legendre polynomial ``P_{j-1}`` and has polynomial order ``j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_XI_TOL = 1e-12

VERTEX, EDGE, INTERIOR = "vertex", "edge", "interior"
TENSOR, TRUNK = "tensor", "trunk"

# Reference square vertices, counter-clockwise from (-1, -1). The pair is the
# (mode_x, mode_y) nodal combination that equals one at the vertex.
VERTEX_MODES = ((1, 1), (2, 1), (2, 2), (1, 2))
# Edges: 0 bottom (eta=-1), 1 right (xi=+1), 2 top (eta=+1), 3 left (xi=-1).
# Each entry tells which direction is tangential and which nodal mode is used
# as the blending factor in the normal direction.
EDGE_LAYOUT = (("x", 1), ("y", 2), ("x", 2), ("y", 1))


def legendre(n, x):
    """Legendre polynomials ``P_0..P_n`` and derivatives by three-term recurrence.

    Returns two arrays of shape ``(n + 1,) + np.shape(x)``.
    """
    x = np.asarray(x, dtype=float)
    P = np.zeros((n + 1,) + x.shape)
    dP = np.zeros_like(P)
    P[0] = 1.0
    if n >= 1:
        P[1] = x
        dP[1] = 1.0
    for j in range(2, n + 1):
        P[j] = ((2 * j - 1) * x * P[j - 1] - (j - 1) * P[j - 2]) / j
        dP[j] = dP[j - 2] + (2 * j - 1) * P[j - 1]
    return P, dP


def eval_modes_1d(p, xi):
    """Evaluate the ``p + 1`` hierarchical 1D modes and their derivatives.

    Parameters
    ----------
    p : int
        Polynomial order, ``p >= 1``.
    xi : float or array_like
        Local coordinate(s) in ``[-1, 1]``.

    Returns
    -------
    values, derivatives : ndarray
        Arrays of shape ``(p + 1,) + np.shape(xi)``; row ``i`` holds mode ``i + 1``.
    """
    if p < 1:
        raise ValueError(f"polynomial order must be >= 1, got {p}")
    xi = np.asarray(xi, dtype=float)
    if np.any(np.abs(xi) > 1.0 + _XI_TOL):
        raise ValueError("local coordinate outside [-1, 1]")
    xi = np.clip(xi, -1.0, 1.0)
    N = np.empty((p + 1,) + xi.shape)
    dN = np.empty_like(N)
    N[0] = 0.5 * (1.0 - xi)
    N[1] = 0.5 * (1.0 + xi)
    dN[0] = -0.5
    dN[1] = 0.5
    if p >= 2:
        P, dP = legendre(p, xi)
        for j in range(2, p + 1):
            scale = 1.0 / np.sqrt(2.0 * (2 * j - 1))
            N[j] = (P[j] - P[j - 2]) * scale
            dN[j] = (dP[j] - dP[j - 2]) * scale
    return N, dN


def mode_order(index):
    """Polynomial order carried by a 1D mode index (1 for the nodal modes)."""
    return 1 if index <= 2 else index - 1


@dataclass(frozen=True)
class Mode2D:
    mode_x: int
    mode_y: int
    entity: str  # vertex | edge | interior
    local_entity: int  # vertex / edge number on the reference square, 0 for interior
    order: int


@dataclass(frozen=True)
class ElementBasis2D:
    p: int
    space: str
    modes: tuple[Mode2D, ...] = field(repr=False)

    def __len__(self):
        return len(self.modes)

    @property
    def mode_x(self):
        return np.array([m.mode_x for m in self.modes])

    @property
    def mode_y(self):
        return np.array([m.mode_y for m in self.modes])

    def index(self):
        """Map ``(entity, local_entity, mode_x, mode_y) -> position``."""
        return {(m.entity, m.local_entity, m.mode_x, m.mode_y): i for i, m in enumerate(self.modes)}


def _edge_mode(edge, j):
    tangential, blend = EDGE_LAYOUT[edge]
    return (j, blend) if tangential == "x" else (blend, j)


def interior_pairs(p, space):
    """Interior (bubble) index pairs of a 2D element, ascending in mode order."""
    pairs = []
    for i in range(3, p + 2):
        for j in range(3, p + 2):
            if space == TRUNK and (i - 1) + (j - 1) > p:
                continue
            pairs.append((i, j))
    key = (lambda ij: max(ij) - 1) if space == TENSOR else (lambda ij: ij[0] + ij[1] - 2)
    return sorted(pairs, key=lambda ij: (key(ij), ij[1], ij[0])), key


def build_element_basis(p, space=TENSOR):
    """Mode list for a 2D element of order ``p``.

    Vertex modes come first, then edge modes, then interior modes; edge and
    interior modes are sorted by ascending polynomial order so that the basis
    of a lower order is a prefix-compatible subset of a higher one.
    """
    if p < 1:
        raise ValueError(f"polynomial order must be >= 1, got {p}")
    if space not in (TENSOR, TRUNK):
        raise ValueError(f"unknown space {space!r}")
    modes = [Mode2D(mx, my, VERTEX, v, 1) for v, (mx, my) in enumerate(VERTEX_MODES)]
    for j in range(3, p + 2):
        for e in range(4):
            mx, my = _edge_mode(e, j)
            modes.append(Mode2D(mx, my, EDGE, e, j - 1))
    pairs, order_of = interior_pairs(p, space)
    modes.extend(Mode2D(i, j, INTERIOR, 0, order_of((i, j))) for i, j in pairs)
    return ElementBasis2D(p, space, tuple(modes))


def eval_basis_2d(basis, points):
    """Values and local gradients of every mode of ``basis`` at ``points``.

    ``points`` has shape ``(n, 2)`` (a single point of shape ``(2,)`` is
    accepted). Returns ``values`` of shape ``(n, m)`` and ``gradients`` of
    shape ``(n, m, 2)`` with derivatives taken in reference coordinates.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    Nx, dNx = eval_modes_1d(basis.p, pts[:, 0])
    Ny, dNy = eval_modes_1d(basis.p, pts[:, 1])
    ix = basis.mode_x - 1
    iy = basis.mode_y - 1
    vx, vy = Nx[ix].T, Ny[iy].T
    values = vx * vy
    grads = np.stack([dNx[ix].T * vy, vx * dNy[iy].T], axis=-1)
    return values, grads
