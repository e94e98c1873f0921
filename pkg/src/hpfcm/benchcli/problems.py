"""Benchmark problem construction: mesh, immersed domain, DOF map and assembled system."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..assembly import (DirichletPenalty, Elasticity2D, Neumann, Poisson, QuadConfig, assemble,
                        manufactured_poisson)
from ..immersed import CUT, OUTSIDE, classify, perforated_plate, rotated_square
from ..mesh import HpMesh, build_dof_map, build_grid, refine_where
from .config import PLATE, ROTATED_SQUARE, ROTATED_SQUARE_GRID


@dataclass
class Problem:
    config: object
    mesh: object
    dofmap: object
    domain: object
    physics: object
    system: object  # LinearSystem
    quad: QuadConfig
    exact: object = None  # ManufacturedSolution for the rotated square
    timings: dict = field(default_factory=dict)

    @property
    def A(self):
        return self.system.A

    @property
    def b(self):
        return self.system.b


def _refine(mesh, domain, d):
    if d.k == 0 or d.refine == "none":
        return mesh
    if d.refine == "all":
        return refine_where(mesh, lambda b: True, d.k)
    return refine_where(mesh, lambda b: classify(domain, b) == CUT, d.k, recursive=d.recursive)


def build_problem(cfg):
    """Discretize and assemble the benchmark described by ``cfg``.

    Background elements entirely outside the physical domain are dropped.
    """
    t0 = time.perf_counter()
    pb, d, f = cfg.problem, cfg.discretization, cfg.fcm
    n = cfg.elements_per_direction
    if pb.kind == ROTATED_SQUARE:
        half = 0.5 * ROTATED_SQUARE_GRID
        grid = build_grid((-half, -half), (2 * half, 2 * half), (n, n))
        domain = rotated_square(pb.angle_deg, alpha_fict=f.alpha)
        physics = Poisson(pb.kappa)
        exact = manufactured_poisson(pb.angle_deg, pb.kappa)
        bcs = [DirichletPenalty(exact.dirichlet, cfg.beta)]
        source = exact.source
        n_f = 1
    elif pb.kind == PLATE:
        grid = build_grid((0.0, 0.0), (pb.length, pb.length), (n, n))
        domain = perforated_plate(pb.length, [tuple(c) for c in pb.hole_centers], pb.hole_radius, f.alpha)
        physics = Elasticity2D(pb.youngs_modulus, pb.poisson_ratio, pb.model)
        traction = np.array([pb.traction, 0.0])
        bcs = [DirichletPenalty(lambda x: np.zeros((len(x), 2)), cfg.beta),
               Neumann(lambda x, normals: np.tile(traction, (len(x), 1)))]
        source, exact, n_f = None, None, 2
    else:  # guarded by config validation
        raise ValueError(f"unknown problem {pb.kind!r}")

    mesh = HpMesh.from_grid(grid, keep=lambda b: classify(domain, b) != OUTSIDE)
    mesh = _refine(mesh, domain, d)
    dofmap = build_dof_map(mesh, d.p, d.space, n_f)
    t1 = time.perf_counter()
    quad = QuadConfig(depth=f.quadtree_depth)
    system = assemble(mesh, dofmap, domain, physics, bcs, source, quad)
    t2 = time.perf_counter()
    return Problem(cfg, mesh, dofmap, domain, physics, system, quad, exact,
                   {"discretize": t1 - t0, "assemble": t2 - t1})
