"""Cartesian base grids with multi-level hp overlay refinement.

Cells are addressed by ``(k, i, j)``: depth ``k`` and integer position on the
uniform grid of spacing ``h / 2**k`` anchored at the grid origin. Vertices and
edges use the same integer lattice, so an entity's locus and depth are implied
by its key and coincident loci on different depths are distinct entities.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .basis import EDGE, INTERIOR, TENSOR, VERTEX, build_element_basis, eval_basis_2d, interior_pairs

DEFAULT_K_MAX = 4


@dataclass(frozen=True)
class BaseGrid:
    origin: tuple[float, float]
    lengths: tuple[float, float]
    counts: tuple[int, int]

    @property
    def h(self):
        return self.lengths[0] / self.counts[0]

    @property
    def n_elements(self):
        return self.counts[0] * self.counts[1]

    def element_index(self, ix, iy):
        return iy * self.counts[0] + ix

    def cell_size(self, k):
        return self.h / 2**k

    def cell_bounds(self, k, i, j):
        s = self.cell_size(k)
        x0 = self.origin[0] + i * s
        y0 = self.origin[1] + j * s
        return (x0, y0, x0 + s, y0 + s)

    def vertex_coords(self, k, i, j):
        s = self.cell_size(k)
        return (self.origin[0] + i * s, self.origin[1] + j * s)

    @property
    def bounds(self):
        return (self.origin[0], self.origin[1],
                self.origin[0] + self.lengths[0], self.origin[1] + self.lengths[1])


def build_grid(origin, lengths, counts):
    """Uniform grid of square elements, indexed row-major."""
    lx, ly = map(float, lengths)
    nx, ny = map(int, counts)
    if nx < 1 or ny < 1:
        raise ValueError("element counts must be >= 1")
    if lx <= 0 or ly <= 0:
        raise ValueError("domain lengths must be positive")
    if abs(lx / nx - ly / ny) > 1e-12 * max(lx / nx, 1.0):
        raise ValueError(f"elements are not square: {lx / nx} x {ly / ny}")
    return BaseGrid((float(origin[0]), float(origin[1])), (lx, ly), (nx, ny))


class HpMesh:
    """Base grid plus per-element refinement quadtrees.

    ``cells[k]`` holds the cells existing on depth ``k``; base cells outside
    ``cells[0]`` are treated as removed from the discretization.
    """

    def __init__(self, grid, cells=None, k_max=DEFAULT_K_MAX):
        self.grid = grid
        self.k_max = k_max
        if cells is None:
            nx, ny = grid.counts
            cells = [{(i, j) for i in range(nx) for j in range(ny)}]
        self.cells = [frozenset(c) for c in cells]
        while len(self.cells) > 1 and not self.cells[-1]:
            self.cells.pop()

    @classmethod
    def from_grid(cls, grid, keep=None, k_max=DEFAULT_K_MAX):
        """Mesh on ``grid``; ``keep(bounds) -> bool`` filters base elements."""
        nx, ny = grid.counts
        base = {(i, j) for i in range(nx) for j in range(ny)
                if keep is None or keep(grid.cell_bounds(0, i, j))}
        return cls(grid, [base], k_max)

    @property
    def depth(self):
        return len(self.cells) - 1

    def has_cell(self, k, i, j):
        return k < len(self.cells) and (i, j) in self.cells[k]

    def is_refined(self, k, i, j):
        return self.has_cell(k + 1, 2 * i, 2 * j)

    def cell_bounds(self, k, i, j):
        return self.grid.cell_bounds(k, i, j)

    def leaves(self):
        out = []
        for k, cells in enumerate(self.cells):
            out.extend((k, i, j) for (i, j) in sorted(cells) if not self.is_refined(k, i, j))
        return out

    def base_cell(self, k, i, j):
        return (i >> k, j >> k)

    def ancestors(self, k, i, j):
        """``[(0, ...), ..., (k, i, j)]`` from the base element down."""
        return [(d, i >> (k - d), j >> (k - d)) for d in range(k + 1)]

    def leaves_of_base(self, ix, iy):
        stack, out = [(0, ix, iy)], []
        while stack:
            k, i, j = stack.pop()
            if self.is_refined(k, i, j):
                stack.extend((k + 1, 2 * i + a, 2 * j + b) for b in (1, 0) for a in (1, 0))
            else:
                out.append((k, i, j))
        return sorted(out)

    def base_depth(self, ix, iy):
        return max(k for k, _, _ in self.leaves_of_base(ix, iy))

    def locate(self, x, tol=1e-12):
        """Leaf cell containing point ``x``; ties on shared edges prefer existing cells."""
        g = self.grid
        h = g.h
        fx = (x[0] - g.origin[0]) / h
        fy = (x[1] - g.origin[1]) / h
        cand_x = sorted({int(math.floor(fx + s)) for s in (-tol, 0.0, tol)})
        cand_y = sorted({int(math.floor(fy + s)) for s in (-tol, 0.0, tol)})
        for ix in cand_x:
            for iy in cand_y:
                if (ix, iy) not in self.cells[0]:
                    continue
                x0, y0, x1, y1 = g.cell_bounds(0, ix, iy)
                if not (x0 - tol * h <= x[0] <= x1 + tol * h and y0 - tol * h <= x[1] <= y1 + tol * h):
                    continue
                k, i, j = 0, ix, iy
                while self.is_refined(k, i, j):
                    bx0, by0, bx1, by1 = g.cell_bounds(k, i, j)
                    i = 2 * i + (1 if x[0] >= 0.5 * (bx0 + bx1) else 0)
                    j = 2 * j + (1 if x[1] >= 0.5 * (by0 + by1) else 0)
                    k += 1
                return (k, i, j)
        return None

    def summary(self):
        leaves = Counter(k for k, _, _ in self.leaves())
        return {
            "grid": {"origin": self.grid.origin, "lengths": self.grid.lengths, "counts": self.grid.counts},
            "base_elements": len(self.cells[0]),
            "cells_per_depth": [len(c) for c in self.cells],
            "leaves_per_depth": {int(k): v for k, v in sorted(leaves.items())},
        }


def refine_where(mesh, predicate: Callable, k, recursive=False):
    """Overlay refinement of base elements selected by ``predicate(bounds)``.

    By default every selected base element receives a uniform quadtree of
    depth ``k``. With ``recursive=True`` only sub-cells that again satisfy the
    predicate are bisected further. Existing refinement is kept, so calling
    twice with the same arguments is a no-op.
    """
    if k > mesh.k_max:
        raise ValueError(f"refinement depth {k} exceeds k_max={mesh.k_max}")
    cells = [set(c) for c in mesh.cells] + [set() for _ in range(k + 1 - len(mesh.cells))]
    frontier = [(0, i, j) for (i, j) in sorted(mesh.cells[0])
                if predicate(mesh.cell_bounds(0, i, j))]
    for depth in range(k):
        nxt = []
        for _, i, j in frontier:
            for b in (0, 1):
                for a in (0, 1):
                    child = (2 * i + a, 2 * j + b)
                    cells[depth + 1].add(child)
                    if not recursive or predicate(mesh.cell_bounds(depth + 1, *child)):
                        nxt.append((depth + 1,) + child)
        frontier = nxt
    return HpMesh(mesh.grid, cells, mesh.k_max)


class TopoEntity(NamedTuple):
    kind: str  # vertex | edge | cell
    depth: int
    i: int
    j: int
    axis: int = -1  # edges: 0 runs along x from (i, j), 1 runs along y

    def locus(self, grid):
        """Geometric position: a point for vertices, endpoints for edges, bounds for cells."""
        if self.kind == "vertex":
            return grid.vertex_coords(self.depth, self.i, self.j)
        if self.kind == "edge":
            a = grid.vertex_coords(self.depth, self.i, self.j)
            b = grid.vertex_coords(self.depth, self.i + (self.axis == 0), self.j + (self.axis == 1))
            return (a, b)
        return grid.cell_bounds(self.depth, self.i, self.j)


def _cell_vertices(i, j):
    return ((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1))


def _cell_edges(i, j):
    # local edge numbering of basis.EDGE_LAYOUT: bottom, right, top, left
    return ((0, i, j), (1, i + 1, j), (0, i, j + 1), (1, i, j))


def _vertex_cells(i, j):
    return ((i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j))


def _edge_cells(axis, i, j):
    return ((i, j - 1), (i, j)) if axis == 0 else ((i - 1, j), (i, j))


def activate_entities(mesh):
    """Active topological entities of the multi-level hp basis.

    Base entities (depth 0) touching at least one base cell are active.
    Overlay entities (depth > 0) are active only in the interior of their
    depth's refined region, so overlay functions vanish on its boundary.
    Entities of any depth that are completely overlaid by the next depth
    (all adjacent cells refined) are switched off, since the finer level
    reproduces their functions exactly.
    """
    active = []
    for k, cells in enumerate(mesh.cells):
        min_v, min_e = (1, 1) if k == 0 else (4, 2)

        def exists(c):
            return c in cells

        def refined(c):
            return mesh.is_refined(k, *c)

        verts, edges = set(), set()
        for (i, j) in cells:
            verts.update(_cell_vertices(i, j))
            edges.update(_cell_edges(i, j))
        for (i, j) in sorted(verts):
            adj = _vertex_cells(i, j)
            n = sum(exists(c) for c in adj)
            if n < min_v:
                continue
            if n == 4 and all(refined(c) for c in adj):
                continue
            active.append(TopoEntity("vertex", k, i, j))
        for (axis, i, j) in sorted(edges, key=lambda e: (e[0], e[1], e[2])):
            adj = _edge_cells(axis, i, j)
            n = sum(exists(c) for c in adj)
            if n < min_e:
                continue
            if n == 2 and all(refined(c) for c in adj):
                continue
            active.append(TopoEntity("edge", k, i, j, axis))
        for (i, j) in sorted(cells):
            if not mesh.is_refined(k, i, j):
                active.append(TopoEntity("cell", k, i, j))
    return active


@dataclass
class CellFunctions:
    """Active functions living on one (possibly non-leaf) cell."""

    modes: np.ndarray  # positions into the element basis
    dofs: np.ndarray  # (n_modes, n_f) global dof numbers


@dataclass
class DofMap:
    p: int
    space: str
    n_f: int
    mesh: HpMesh = field(repr=False)
    entities: list = field(repr=False)
    entity: np.ndarray = field(repr=False)
    order: np.ndarray = field(repr=False)
    depth: np.ndarray = field(repr=False)
    component: np.ndarray = field(repr=False)
    cell_functions: dict = field(repr=False)

    @property
    def n_dofs(self):
        return len(self.entity)

    @property
    def basis(self):
        return build_element_basis(self.p, self.space)

    def trim(self, p_cap, k_cap):
        """Sorted indices of the DOFs with mode order <= p_cap and depth <= k_cap."""
        return np.flatnonzero((self.order <= p_cap) & (self.depth <= k_cap))

    def leaf_functions(self, leaf):
        """Cells in the ancestry of ``leaf`` with their active functions."""
        out = []
        for cell in self.mesh.ancestors(*leaf):
            cf = self.cell_functions.get(cell)
            if cf is not None and len(cf.modes):
                out.append((cell, cf))
        return out

    def leaf_dofs(self, leaf):
        parts = [cf.dofs for _, cf in self.leaf_functions(leaf)]
        return np.concatenate(parts) if parts else np.zeros((0, self.n_f), dtype=int)

    def evaluate(self, leaf, points, basis=None):
        """Scalar shape functions supported on ``leaf`` at global ``points``.

        Returns ``values (n, m)``, global ``gradients (n, m, 2)`` and the dof
        table ``(m, n_f)`` of the ``m`` functions (base plus overlays).
        """
        basis = basis or self.basis
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals, grads, dofs = [], [], []
        for cell, cf in self.leaf_functions(leaf):
            x0, y0, x1, y1 = self.mesh.cell_bounds(*cell)
            s = x1 - x0
            ref = np.column_stack([2.0 * (pts[:, 0] - x0) / s - 1.0, 2.0 * (pts[:, 1] - y0) / s - 1.0])
            v, g = eval_basis_2d(basis, np.clip(ref, -1.0, 1.0))
            vals.append(v[:, cf.modes])
            grads.append(g[:, cf.modes, :] * (2.0 / s))
            dofs.append(cf.dofs)
        return np.concatenate(vals, axis=1), np.concatenate(grads, axis=1), np.concatenate(dofs)

    def summary(self):
        classes = Counter(zip(self.order.tolist(), self.depth.tolist()))
        return {
            "n_dofs": self.n_dofs,
            "p": self.p,
            "space": self.space,
            "n_f": self.n_f,
            "dofs_per_order_depth": {f"q={q},k={k}": n for (q, k), n in sorted(classes.items())},
        }


def _entity_modes(entity, p, space):
    """``(order, mode_x, mode_y)`` per mode carried by an entity (orientation-free)."""
    if entity.kind == "vertex":
        return [(1, None)]
    if entity.kind == "edge":
        return [(j - 1, j) for j in range(3, p + 2)]
    pairs, order_of = interior_pairs(p, space)
    return [(order_of(ij), ij) for ij in pairs]


def build_dof_map(mesh, p, space=TENSOR, n_f=1, entities=None):
    """Number the DOFs of every active entity.

    Each DOF is tagged with its entity, mode order ``q``, entity depth ``k`` and
    field component, which is all the multigrid level trimming needs.
    """
    if p < 1:
        raise ValueError(f"polynomial order must be >= 1, got {p}")
    if entities is None:
        entities = activate_entities(mesh)
    basis = build_element_basis(p, space)
    pos = basis.index()
    edge_pos = {(m.local_entity, m.order): i for i, m in enumerate(basis.modes) if m.entity == EDGE}

    ent_dofs = {}
    tag_e, tag_q, tag_k, tag_c = [], [], [], []
    n = 0
    for eid, ent in enumerate(entities):
        modes = _entity_modes(ent, p, space)
        block = np.arange(n, n + len(modes) * n_f).reshape(len(modes), n_f)
        ent_dofs[(ent.kind, ent.depth, ent.i, ent.j, ent.axis)] = (modes, block)
        for q, _ in modes:
            for c in range(n_f):
                tag_e.append(eid)
                tag_q.append(q)
                tag_k.append(ent.depth)
                tag_c.append(c)
        n += len(modes) * n_f

    cell_functions = {}
    for k, cells in enumerate(mesh.cells):
        for (i, j) in sorted(cells):
            idx, dofs = [], []
            for v, (vi, vj) in enumerate(_cell_vertices(i, j)):
                hit = ent_dofs.get(("vertex", k, vi, vj, -1))
                if hit is None:
                    continue
                mx, my = basis.modes[v].mode_x, basis.modes[v].mode_y
                idx.append(pos[(VERTEX, v, mx, my)])
                dofs.append(hit[1][0])
            for e, (axis, ei, ej) in enumerate(_cell_edges(i, j)):
                hit = ent_dofs.get(("edge", k, ei, ej, axis))
                if hit is None:
                    continue
                for (q, _), row in zip(hit[0], hit[1]):
                    idx.append(edge_pos[(e, q)])
                    dofs.append(row)
            hit = ent_dofs.get(("cell", k, i, j, -1))
            if hit is not None:
                for (q, (mx, my)), row in zip(hit[0], hit[1]):
                    idx.append(pos[(INTERIOR, 0, mx, my)])
                    dofs.append(row)
            if idx:
                cell_functions[(k, i, j)] = CellFunctions(
                    np.asarray(idx, dtype=int), np.asarray(dofs, dtype=int).reshape(len(idx), n_f))

    return DofMap(p, space, n_f, mesh, entities,
                  np.asarray(tag_e, dtype=int), np.asarray(tag_q, dtype=int),
                  np.asarray(tag_k, dtype=int), np.asarray(tag_c, dtype=int), cell_functions)


@dataclass(frozen=True)
class Patch:
    vertex: tuple[int, int]
    elements: tuple[tuple[int, int], ...]


def node_patches(mesh):
    """One patch per base-grid vertex: the existing base elements sharing it."""
    nx, ny = mesh.grid.counts
    out = []
    for j in range(ny + 1):
        for i in range(nx + 1):
            els = tuple(c for c in _vertex_cells(i, j) if c in mesh.cells[0])
            if els:
                out.append(Patch((i, j), els))
    return out


def summary_json(mesh, dofmap=None, **kw):
    data = {"mesh": mesh.summary()}
    if dofmap is not None:
        data["dofs"] = dofmap.summary()
    return json.dumps(data, **kw)
