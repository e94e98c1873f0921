"""Finite cell assembly of Poisson and plane linear elasticity systems.

The bilinear form integrates ``alpha(x)``-scaled energy over the leaf cells of
the multi-level hp mesh, plus a penalty boundary mass on Dirichlet curves; the
right-hand side collects the volume source, Neumann tractions and the penalty
load.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import eval_basis_2d
from .immersed import DIRICHLET, NEUMANN, boundary_rule, gauss_square, volume_rule


@dataclass(frozen=True)
class Poisson:
    kappa: float = 1.0
    n_f = 1

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")

    def element_matrix(self, grads, wa):
        gx, gy = grads[:, :, 0], grads[:, :, 1]
        K = (gx.T * wa) @ gx + (gy.T * wa) @ gy
        return self.kappa * K

    def energy_density(self, dgrad):
        """Pointwise energy of a field gradient difference ``(n, n_f, 2)``."""
        return self.kappa * (dgrad[:, 0, :] ** 2).sum(axis=1)


@dataclass(frozen=True)
class Elasticity2D:
    E: float
    nu: float
    model: str = "plane-stress"
    n_f = 2

    def __post_init__(self):
        if self.E <= 0 or not 0.0 <= self.nu < 0.5:
            raise ValueError("require E > 0 and 0 <= nu < 0.5")
        if self.model not in ("plane-stress", "plane-strain"):
            raise ValueError(f"unknown model {self.model!r}")

    @property
    def C(self):
        E, nu = self.E, self.nu
        if self.model == "plane-stress":
            f = E / (1.0 - nu**2)
            return f * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])
        f = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
        return f * np.array([[1.0 - nu, nu, 0.0], [nu, 1.0 - nu, 0.0], [0.0, 0.0, 0.5 - nu]])

    def element_matrix(self, grads, wa):
        C = self.C
        gx, gy = grads[:, :, 0], grads[:, :, 1]
        xx = (gx.T * wa) @ gx
        yy = (gy.T * wa) @ gy
        xy = (gx.T * wa) @ gy
        m = gx.shape[1]
        K = np.empty((m, 2, m, 2))
        K[:, 0, :, 0] = C[0, 0] * xx + C[2, 2] * yy
        K[:, 1, :, 1] = C[1, 1] * yy + C[2, 2] * xx
        K[:, 0, :, 1] = C[0, 1] * xy + C[2, 2] * xy.T
        K[:, 1, :, 0] = K[:, 0, :, 1].transpose(1, 0)
        return K.reshape(2 * m, 2 * m)

    def energy_density(self, dgrad):
        eps = np.stack([dgrad[:, 0, 0], dgrad[:, 1, 1], dgrad[:, 0, 1] + dgrad[:, 1, 0]], axis=1)
        return np.einsum("qi,ij,qj->q", eps, self.C, eps)


@dataclass
class DirichletPenalty:
    g: object  # callable(points) -> (n,) or (n, n_f)
    beta: float
    tag: str = DIRICHLET

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("penalty parameter must be positive")


@dataclass
class Neumann:
    g: object  # callable(points, normals) -> (n,) or (n, n_f)
    tag: str = NEUMANN


@dataclass(frozen=True)
class QuadConfig:
    depth: int = 4
    samples: int = 5
    n_gauss: int | None = None  # default p + 1
    boundary_order: int | None = None  # default p + 1


@dataclass
class LinearSystem:
    A: sp.csr_matrix
    b: np.ndarray
    dofmap: object

    @property
    def n(self):
        return self.A.shape[0]


def _as_field(vals, n, n_f):
    vals = np.asarray(vals, dtype=float)
    return vals.reshape(n, n_f)


def _reference_stiffness(physics, basis, n_gauss):
    # Energy integrals over a square are invariant to its size in 2D.
    X, W = gauss_square((-1.0, -1.0, 1.0, 1.0), n_gauss)
    _, g = eval_basis_2d(basis, X)
    return physics.element_matrix(g, W)


def _scatter_index(dofs):
    flat = dofs.ravel()
    return np.repeat(flat, len(flat)), np.tile(flat, len(flat))


def iter_leaf_quadrature(mesh, dofmap, domain, quad, alpha_fict=None):
    """Yield ``(leaf, points, weights, alpha, class)`` over all leaf cells."""
    ng = quad.n_gauss or dofmap.p + 1
    for leaf in mesh.leaves():
        X, W, alpha, cls = volume_rule(domain, mesh.cell_bounds(*leaf), ng, quad.depth, quad.samples)
        if len(W) == 0:
            raise RuntimeError(f"leaf cell {leaf} received no quadrature points")
        if alpha_fict is not None:
            alpha = np.where(alpha < 1.0, alpha_fict, alpha)
        yield leaf, X, W, alpha, cls


def assemble(mesh, dofmap, domain, physics, bcs=(), source=None, quad=QuadConfig(), alpha_fict=None):
    """Assemble the penalized finite cell system.

    Parameters
    ----------
    mesh, dofmap : HpMesh, DofMap
    domain : ImplicitDomain
    physics : Poisson or Elasticity2D
    bcs : sequence of DirichletPenalty / Neumann
    source : callable(points) -> (n,) or (n, n_f), optional
        Volume load, weighted by ``alpha`` like the stiffness.
    quad : QuadConfig
    alpha_fict : float, optional
        Override of the domain's fictitious scaling (``0`` is allowed here).
    """
    n_f = dofmap.n_f
    if physics.n_f != n_f:
        raise ValueError(f"physics needs {physics.n_f} field components, dof map has {n_f}")
    basis = dofmap.basis
    ng = quad.n_gauss or dofmap.p + 1
    K_ref = _reference_stiffness(physics, basis, ng)
    rows, cols, vals = [], [], []
    b = np.zeros(dofmap.n_dofs)

    for leaf, X, W, alpha, cls in iter_leaf_quadrature(mesh, dofmap, domain, quad, alpha_fict):
        funcs = dofmap.leaf_functions(leaf)
        uniform = cls != "cut" and leaf[0] == 0 and len(funcs) == 1 and np.all(alpha == alpha[0])
        if uniform:
            cf = funcs[0][1]
            dofs = cf.dofs
            sel = (cf.modes[:, None] * n_f + np.arange(n_f)).ravel()
            Ke = alpha[0] * K_ref[np.ix_(sel, sel)]
            need_vals = source is not None
            if need_vals:
                vals_, _, _ = dofmap.evaluate(leaf, X, basis)
        else:
            vals_, grads, dofs = dofmap.evaluate(leaf, X, basis)
            Ke = physics.element_matrix(grads, W * alpha)
            Ke = 0.5 * (Ke + Ke.T)
            need_vals = source is not None
        r, c = _scatter_index(dofs)
        rows.append(r)
        cols.append(c)
        vals.append(Ke.ravel())
        if need_vals:
            f = _as_field(source(X), len(W), n_f)
            Fe = (vals_.T * (W * alpha)) @ f
            np.add.at(b, dofs.ravel(), Fe.ravel())

    depth = mesh.depth
    for bc in bcs:
        order = quad.boundary_order or dofmap.p + 1
        rule = boundary_rule(domain, bc.tag, order, mesh.grid, mesh.grid.cell_size(depth))
        if len(rule) == 0:
            if isinstance(bc, DirichletPenalty):
                raise RuntimeError(f"no boundary quadrature registered for Dirichlet tag {bc.tag!r}")
            continue
        for leaf, idx in _group_by_leaf(mesh, rule):
            P = rule.points[idx]
            w = rule.weights[idx]
            N, _, dofs = dofmap.evaluate(leaf, P, basis)
            if isinstance(bc, DirichletPenalty):
                M = bc.beta * ((N.T * w) @ N)
                Ke = np.kron(M, np.eye(n_f))
                Ke = 0.5 * (Ke + Ke.T)
                r, c = _scatter_index(dofs)
                rows.append(r)
                cols.append(c)
                vals.append(Ke.ravel())
                g = _as_field(bc.g(P), len(w), n_f)
                np.add.at(b, dofs.ravel(), (bc.beta * (N.T * w) @ g).ravel())
            else:
                g = _as_field(bc.g(P, rule.normals[idx]), len(w), n_f)
                np.add.at(b, dofs.ravel(), ((N.T * w) @ g).ravel())

    n = dofmap.n_dofs
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return LinearSystem(A, b, dofmap)


def _group_by_leaf(mesh, rule):
    groups = {}
    cache = {}
    for q, mid in enumerate(map(tuple, rule.locator)):
        leaf = cache.get(mid)
        if leaf is None:
            leaf = mesh.locate(mid)
            if leaf is None:
                raise RuntimeError(f"boundary point {mid} lies outside the discretized cells")
            cache[mid] = leaf
        groups.setdefault(leaf, []).append(q)
    return [(leaf, np.asarray(idx)) for leaf, idx in sorted(groups.items())]


def assemble_mass(mesh, dofmap, quad=QuadConfig()):
    """Unweighted scalar mass matrix over all leaf cells (no fictitious scaling)."""
    basis = dofmap.basis
    ng = quad.n_gauss or dofmap.p + 1
    rows, cols, vals = [], [], []
    for leaf in mesh.leaves():
        X, W = gauss_square(mesh.cell_bounds(*leaf), ng)
        N, _, dofs = dofmap.evaluate(leaf, X, basis)
        M = np.kron((N.T * W) @ N, np.eye(dofmap.n_f))
        r, c = _scatter_index(dofs)
        rows.append(r)
        cols.append(c)
        vals.append(M.ravel())
    n = dofmap.n_dofs
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n)).tocsr()


@dataclass
class ManufacturedSolution:
    u: object
    grad: object
    source: object
    dirichlet: object
    a: float


def manufactured_poisson(psi_deg, kappa, center=(0.0, 0.0)):
    """Rotated manufactured field ``cos(a x') sin(a y') / (2 kappa a^2)`` with ``a = 3 pi / 2``.

    ``x', y'`` are coordinates in the frame rotated by ``psi_deg`` about
    ``center``; the matching source for ``-kappa * laplace(u) = s`` is
    ``cos(a x') sin(a y')``.
    """
    a = 1.5 * math.pi
    psi = math.radians(psi_deg)
    c, s = math.cos(psi), math.sin(psi)
    amp = 1.0 / (2.0 * kappa * a * a)

    def rotated(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        dx, dy = x[:, 0] - center[0], x[:, 1] - center[1]
        return c * dx + s * dy, -s * dx + c * dy

    def u(x):
        xr, yr = rotated(x)
        return amp * np.cos(a * xr) * np.sin(a * yr)

    def grad(x):
        xr, yr = rotated(x)
        gxr = -a * amp * np.sin(a * xr) * np.sin(a * yr)
        gyr = a * amp * np.cos(a * xr) * np.cos(a * yr)
        return np.column_stack([c * gxr - s * gyr, s * gxr + c * gyr])

    def source(x):
        xr, yr = rotated(x)
        return np.cos(a * xr) * np.sin(a * yr)

    return ManufacturedSolution(u, grad, source, u, a)


def _field_at(dofmap, leaf, X, x, basis):
    N, G, dofs = dofmap.evaluate(leaf, X, basis)
    coef = x[dofs]  # (m, n_f)
    return N @ coef, np.einsum("qmd,mc->qcd", G, coef)


def energy_error(mesh, dofmap, domain, x, exact_grad, physics, quad=QuadConfig()):
    """Energy norm of ``u_h - u`` over the physical part of the domain.

    ``exact_grad(points)`` returns ``(n, 2)`` for scalar fields or
    ``(n, n_f, 2)`` for vector fields.
    """
    basis = dofmap.basis
    total = 0.0
    for leaf, X, W, alpha, _ in iter_leaf_quadrature(mesh, dofmap, domain, quad):
        phys = alpha >= 1.0
        if not phys.any():
            continue
        _, gh = _field_at(dofmap, leaf, X[phys], x, basis)
        ge = np.asarray(exact_grad(X[phys]), dtype=float).reshape(gh.shape)
        total += float(W[phys] @ physics.energy_density(gh - ge))
    return math.sqrt(total)


def l2_error(mesh, dofmap, domain, x, exact, quad=QuadConfig()):
    """L2 norm of ``u_h - u`` over the physical part of the domain."""
    basis = dofmap.basis
    total = 0.0
    for leaf, X, W, alpha, _ in iter_leaf_quadrature(mesh, dofmap, domain, quad):
        phys = alpha >= 1.0
        if not phys.any():
            continue
        uh, _ = _field_at(dofmap, leaf, X[phys], x, basis)
        ue = np.asarray(exact(X[phys]), dtype=float).reshape(uh.shape)
        total += float(W[phys] @ ((uh - ue) ** 2).sum(axis=1))
    return math.sqrt(total)


def sample_solution(mesh, dofmap, x, points):
    """Evaluate the discrete field at arbitrary points (NaN outside the mesh)."""
    basis = dofmap.basis
    out = np.full((len(points), dofmap.n_f), np.nan)
    for q, pt in enumerate(np.asarray(points, dtype=float)):
        leaf = mesh.locate(pt)
        if leaf is None:
            continue
        u, _ = _field_at(dofmap, leaf, pt[None, :], x, basis)
        out[q] = u[0]
    return out
