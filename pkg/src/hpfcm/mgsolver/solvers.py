"""V-cycle, stand-alone multigrid iteration and preconditioned CG."""
from __future__ import annotations

import logging
import time

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .report import SolveReport
from .smoothers import GAUSS_SEIDEL, SCHWARZ_ELEMENT, build_smoother, schwarz_preconditioner

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_IT = 500
DIVERGENCE_WINDOW = 10


class IndefiniteMatrixError(RuntimeError):
    pass


class DirectCoarseSolver:
    """Sparse LU with a few steps of iterative refinement."""

    def __init__(self, A, refine_steps=2):
        self.A = sp.csc_matrix(A)
        try:
            self.lu = splu(self.A)
        except RuntimeError as exc:
            raise RuntimeError(f"coarse matrix is singular: {exc}") from exc
        self.refine_steps = refine_steps

    def solve(self, r):
        x = self.lu.solve(r)
        for _ in range(self.refine_steps):
            x += self.lu.solve(r - self.A @ x)
        if not np.all(np.isfinite(x)):
            raise RuntimeError("coarse solve produced non-finite values")
        return x


class CGCoarseSolver:
    """Inner CG with elementwise additive Schwarz preconditioning."""

    def __init__(self, A, mesh, dofmap, dofs, tol=1e-12, max_it=2000):
        self.A = sp.csr_matrix(A)
        self.M = schwarz_preconditioner(self.A, mesh, dofmap, SCHWARZ_ELEMENT, dofs)
        self.tol = tol
        self.max_it = max_it

    def solve(self, r):
        x, rep = _cg(self.A, r, self.M.apply, self.tol, self.max_it)
        if not rep.converged:
            raise RuntimeError(f"coarse CG did not reach {self.tol} in {self.max_it} iterations")
        return x


def coarse_solver(A0, kind="direct", mesh=None, dofmap=None, dofs=None):
    if kind == "direct":
        return DirectCoarseSolver(A0)
    if kind == "cg":
        return CGCoarseSolver(A0, mesh, dofmap, dofs)
    raise ValueError(f"unknown coarse solver {kind!r}")


class VCycle:
    """One V-cycle from a zero initial guess, usable as a preconditioner ``r -> e``.

    Every smoothing step is a fixed-point update with a freshly computed
    residual; level 0 is solved by ``coarse``.
    """

    def __init__(self, hierarchy, smoothers, coarse, n_s=5):
        if n_s < 1:
            raise ValueError("need at least one smoothing step")
        self.hierarchy = hierarchy
        self.smoothers = smoothers
        self.coarse = coarse
        self.n_s = n_s

    def __call__(self, r):
        return self._cycle(len(self.hierarchy) - 1, np.asarray(r, dtype=float))

    def _cycle(self, l, b):
        if l == 0:
            return self.coarse.solve(b)
        A = self.hierarchy[l].A
        S = self.smoothers[l]
        x = np.zeros_like(b)
        r = b.copy()
        for _ in range(self.n_s):
            x += S.apply(r)
            r = b - A @ x
        sel = self.hierarchy[l].coarse_sel
        x[sel] += self._cycle(l - 1, r[sel])
        r = b - A @ x
        for i in range(self.n_s):
            x += S.apply(r)
            if i + 1 < self.n_s:
                r = b - A @ x
        return x


def build_smoothers(hierarchy, kind, mesh=None, dofmap=None, omega=None, symmetric_gs=False):
    """Per-level smoothers; index 0 (the coarse level) gets ``None``."""
    out = [None]
    for level in hierarchy.levels[1:]:
        out.append(build_smoother(level, kind, mesh, dofmap, omega, symmetric_gs=symmetric_gs))
    return out


def v_cycle(hierarchy, smoothers, r_fine, n_s=5, coarse=None):
    """Correction for residual ``r_fine`` from a single V-cycle."""
    coarse = coarse or DirectCoarseSolver(hierarchy[0].A)
    return VCycle(hierarchy, smoothers, coarse, n_s)(r_fine)


def solve_mg(A, b, cycle, tol=DEFAULT_TOL, max_it=DEFAULT_MAX_IT):
    """Stand-alone multigrid: ``x <- x + cycle(b - A x)`` until the relative residual is below ``tol``.

    The run is flagged as diverged once the residual grows for
    ``DIVERGENCE_WINDOW`` consecutive iterations.
    """
    t0 = time.perf_counter()
    x = np.zeros_like(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, SolveReport(0, [0.0], True)
    r = b.copy()
    hist = [1.0]
    growing = 0
    converged = diverged = False
    for _ in range(max_it):
        x += cycle(r)
        r = b - A @ x
        rel = np.linalg.norm(r) / bnorm
        if not np.isfinite(rel):
            diverged = True
            break
        growing = growing + 1 if rel > hist[-1] else 0
        hist.append(float(rel))
        if rel < tol:
            converged = True
            break
        if growing >= DIVERGENCE_WINDOW:
            diverged = True
            break
    rep = SolveReport(len(hist) - 1, hist, converged, diverged,
                      {"iterate": time.perf_counter() - t0})
    return x, rep


def _cg(A, b, M, tol, max_it):
    x = np.zeros_like(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, SolveReport(0, [0.0], True)
    r = b.copy()
    z = M(r) if M is not None else r.copy()
    p = z.copy()
    rz = r @ z
    hist = [1.0]
    converged = False
    for _ in range(max_it):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0.0:
            raise IndefiniteMatrixError(f"non-positive curvature p^T A p = {pAp:.3e}")
        a = rz / pAp
        x += a * p
        r -= a * Ap
        rel = np.linalg.norm(r) / bnorm
        hist.append(float(rel))
        if rel < tol:
            converged = True
            break
        z = M(r) if M is not None else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolveReport(len(hist) - 1, hist, converged)


def solve_pcg(A, b, preconditioner=None, tol=DEFAULT_TOL, max_it=DEFAULT_MAX_IT):
    """Preconditioned conjugate gradients from ``x0 = 0``.

    ``preconditioner`` is ``None`` or a callable ``r -> M^-1 r`` (a Jacobi or
    Schwarz ``apply`` method, or a ``VCycle``); it must be symmetric positive.
    """
    t0 = time.perf_counter()
    x, rep = _cg(A, b, preconditioner, tol, max_it)
    rep.timings["iterate"] = time.perf_counter() - t0
    return x, rep
