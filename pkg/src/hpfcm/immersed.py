"""Implicit physical domains, cut-cell classification and cut-cell quadrature."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

INSIDE, OUTSIDE, CUT = "inside", "outside", "cut"
DIRICHLET, NEUMANN, FREE = "dirichlet", "neumann", "free"

_GEOM_TOL = 1e-12


@functools.lru_cache(maxsize=None)
def _gauss_1d(n):
    t, w = np.polynomial.legendre.leggauss(n)
    t.flags.writeable = False
    w.flags.writeable = False
    return t, w


def gauss_1d(n):
    """Gauss-Legendre points and weights on [-1, 1] (cached, read-only)."""
    return _gauss_1d(int(n))


@functools.lru_cache(maxsize=None)
def _unit_square_rule(n):
    t, w = gauss_1d(n)
    u = 0.5 * (t + 1.0)
    U = np.column_stack([np.repeat(u, n), np.tile(u, n)])
    W = 0.25 * np.outer(w, w).ravel()
    return U, W


def gauss_square(bounds, n):
    """Tensor Gauss rule with ``n x n`` points on an axis-aligned rectangle."""
    x0, y0, x1, y1 = bounds
    U, W = _unit_square_rule(int(n))
    size = np.array([x1 - x0, y1 - y0])
    return np.array([x0, y0]) + U * size, W * (size[0] * size[1])


def _shrink(bounds, rel=1e-12):
    x0, y0, x1, y1 = bounds
    e = rel * max(x1 - x0, y1 - y0)
    return (x0 + e, y0 + e, x1 - e, y1 - e)


@dataclass(frozen=True)
class Segment:
    """Straight boundary piece; the physical domain lies to the left of ``a -> b``."""

    a: tuple[float, float]
    b: tuple[float, float]
    tag: str = DIRICHLET

    @property
    def length(self):
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    def bbox(self):
        return (min(self.a[0], self.b[0]), min(self.a[1], self.b[1]),
                max(self.a[0], self.b[0]), max(self.a[1], self.b[1]))

    def normal(self):
        dx, dy = self.b[0] - self.a[0], self.b[1] - self.a[1]
        L = math.hypot(dx, dy)
        return np.array([dy / L, -dx / L])

    def crosses_open_box(self, bounds):
        # Liang-Barsky clipping against the slightly shrunk open rectangle
        x0, y0, x1, y1 = _shrink(bounds)
        ax, ay = self.a
        dx, dy = self.b[0] - ax, self.b[1] - ay
        t0, t1 = 0.0, 1.0
        for pk, qk in ((-dx, ax - x0), (dx, x1 - ax), (-dy, ay - y0), (dy, y1 - ay)):
            if pk == 0.0:
                if qk <= 0.0:
                    return False
                continue
            r = qk / pk
            if pk < 0:
                t0 = max(t0, r)
            else:
                t1 = min(t1, r)
            if t0 > t1:
                return False
        return t1 - t0 > 0.0

    def split(self, origin, spacing):
        """Parameter breakpoints at crossings with the grid lines."""
        ts = [0.0, 1.0]
        for d in (0, 1):
            a, b = self.a[d], self.b[d]
            if abs(b - a) < _GEOM_TOL:
                continue
            lo, hi = sorted((a, b))
            m0 = math.ceil((lo - origin[d]) / spacing)
            m1 = math.floor((hi - origin[d]) / spacing)
            for m in range(m0, m1 + 1):
                ts.append((origin[d] + m * spacing - a) / (b - a))
        return _unique_sorted(ts, 0.0, 1.0)

    def rule(self, t0, t1, order):
        """Gauss points on the sub-segment ``[t0, t1]`` with arclength weights."""
        g, w = gauss_1d(order)
        t = t0 + 0.5 * (g + 1.0) * (t1 - t0)
        a, b = np.asarray(self.a), np.asarray(self.b)
        pts = a + np.outer(t, b - a)
        wts = w * 0.5 * (t1 - t0) * self.length
        return pts, wts, np.tile(self.normal(), (len(t), 1)), a + 0.5 * (t0 + t1) * (b - a)


@dataclass(frozen=True)
class Circle:
    """Full circle; ``hole=True`` means the physical domain is outside it."""

    center: tuple[float, float]
    radius: float
    tag: str = FREE
    hole: bool = True

    @property
    def length(self):
        return 2.0 * math.pi * self.radius

    def bbox(self):
        cx, cy = self.center
        r = self.radius
        return (cx - r, cy - r, cx + r, cy + r)

    def crosses_open_box(self, bounds):
        x0, y0, x1, y1 = _shrink(bounds)
        cx, cy = self.center
        dmin = math.hypot(max(x0 - cx, 0.0, cx - x1), max(y0 - cy, 0.0, cy - y1))
        dmax = max(math.hypot(x - cx, y - cy) for x in (x0, x1) for y in (y0, y1))
        return dmin < self.radius < dmax

    def split(self, origin, spacing):
        cx, cy = self.center
        r = self.radius
        th = [0.0, 2.0 * math.pi]
        for d, c in ((0, cx), (1, cy)):
            m0 = math.ceil((c - r - origin[d]) / spacing)
            m1 = math.floor((c + r - origin[d]) / spacing)
            for m in range(m0, m1 + 1):
                s = (origin[d] + m * spacing - c) / r
                if abs(s) >= 1.0:
                    continue
                if d == 0:
                    base = math.acos(s)
                    th.extend([base, 2.0 * math.pi - base])
                else:
                    base = math.asin(s)
                    th.extend([base % (2.0 * math.pi), math.pi - base])
        return _unique_sorted(th, 0.0, 2.0 * math.pi)

    def rule(self, t0, t1, order):
        g, w = gauss_1d(order)
        t = t0 + 0.5 * (g + 1.0) * (t1 - t0)
        c = np.asarray(self.center)
        radial = np.column_stack([np.cos(t), np.sin(t)])
        pts = c + self.radius * radial
        wts = w * 0.5 * (t1 - t0) * self.radius
        normals = -radial if self.hole else radial
        tm = 0.5 * (t0 + t1)
        return pts, wts, normals, c + self.radius * np.array([math.cos(tm), math.sin(tm)])


def _unique_sorted(ts, lo, hi, tol=1e-13):
    out = []
    for t in sorted(min(max(t, lo), hi) for t in ts):
        if not out or t - out[-1] > tol:
            out.append(t)
    return out


@dataclass
class ImplicitDomain:
    """Physical domain ``{x : phi(x) <= 0}`` with its analytic boundary curves."""

    phi: Callable[[np.ndarray], np.ndarray]
    curves: list = field(default_factory=list)
    alpha_fict: float = 1e-8
    name: str = "domain"

    def __post_init__(self):
        if not 0.0 < self.alpha_fict < 1.0:
            raise ValueError(f"alpha_fict must lie in (0, 1), got {self.alpha_fict}")

    def inside(self, x):
        return self.phi(np.atleast_2d(np.asarray(x, dtype=float))) <= 0.0

    def curves_tagged(self, tag):
        return [(i, c) for i, c in enumerate(self.curves) if c.tag == tag]


def rotated_square(angle_deg, center=(0.0, 0.0), side=1.0, alpha_fict=1e-8):
    """Square rotated by ``angle_deg`` about its center; all edges are Dirichlet."""
    psi = math.radians(angle_deg)
    c, s = math.cos(psi), math.sin(psi)
    cx, cy = center
    half = 0.5 * side

    def phi(x):
        dx, dy = x[:, 0] - cx, x[:, 1] - cy
        xr = c * dx + s * dy
        yr = -s * dx + c * dy
        return np.maximum(np.abs(xr), np.abs(yr)) - half

    local = [(-half, -half), (half, -half), (half, half), (-half, half)]
    corners = [(cx + c * u - s * v, cy + s * u + c * v) for u, v in local]
    curves = [Segment(corners[n], corners[(n + 1) % 4], DIRICHLET) for n in range(4)]
    return ImplicitDomain(phi, curves, alpha_fict, f"rotated_square({angle_deg})")


def perforated_plate(length=4.0, centers=((1.0, 1.0), (3.0, 1.0), (1.0, 3.0), (3.0, 3.0)),
                     radius=0.3 * math.sqrt(2.0), alpha_fict=1e-8):
    """Square plate ``[0, length]^2`` with circular holes.

    The left edge is clamped (Dirichlet), the right edge carries the traction
    (Neumann); top, bottom and the holes are traction free.
    """
    L = float(length)
    cs = np.asarray(centers, dtype=float)

    def phi(x):
        rect = np.maximum.reduce([-x[:, 0], x[:, 0] - L, -x[:, 1], x[:, 1] - L])
        if len(cs) == 0:
            return rect
        d = np.sqrt(((x[:, None, :] - cs[None, :, :]) ** 2).sum(-1))
        return np.maximum(rect, (radius - d).max(axis=1))

    curves = [
        Segment((0.0, 0.0), (L, 0.0), FREE),
        Segment((L, 0.0), (L, L), NEUMANN),
        Segment((L, L), (0.0, L), FREE),
        Segment((0.0, L), (0.0, 0.0), DIRICHLET),
    ] + [Circle(tuple(c), radius, FREE, hole=True) for c in cs]
    return ImplicitDomain(phi, curves, alpha_fict, "perforated_plate")


@functools.lru_cache(maxsize=None)
def _unit_samples(s):
    u = np.linspace(0.0, 1.0, s)
    return np.column_stack([np.repeat(u, s), np.tile(u, s)])


def _sample_grid(bounds, s):
    x0, y0, x1, y1 = bounds
    return np.array([x0, y0]) + _unit_samples(s) * np.array([x1 - x0, y1 - y0])


def classify(domain, bounds, samples=5):
    """``inside``, ``outside`` or ``cut`` for an axis-aligned rectangle.

    A rectangle is uncut only if an ``samples x samples`` point grid (corners
    and center included for odd counts) agrees on one side and no boundary
    curve passes through its interior. Points on the boundary count for both
    sides, so element faces lying on the boundary do not make a cell cut.
    """
    phi = domain.phi(_sample_grid(bounds, samples))
    scale = max(bounds[2] - bounds[0], bounds[3] - bounds[1])
    tol = _GEOM_TOL * max(scale, 1.0)
    if not (np.all(phi <= tol) or np.all(phi >= -tol)):
        return CUT
    if any(c.crosses_open_box(bounds) for c in domain.curves):
        return CUT
    return INSIDE if np.all(phi <= tol) else OUTSIDE


@dataclass(frozen=True)
class QuadCell:
    bounds: tuple[float, float, float, float]
    cls: str
    depth: int

    @property
    def area(self):
        return (self.bounds[2] - self.bounds[0]) * (self.bounds[3] - self.bounds[1])


def integration_cells(domain, bounds, depth, samples=5):
    """Quadtree leaves for integration: only cut cells are bisected, down to ``depth``."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    out = []
    stack = [(tuple(bounds), 0)]
    while stack:
        b, d = stack.pop()
        cls = classify(domain, b, samples)
        if cls != CUT or d == depth:
            out.append(QuadCell(b, cls, d))
            continue
        x0, y0, x1, y1 = b
        xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        stack.extend([((xm, ym, x1, y1), d + 1), ((x0, ym, xm, y1), d + 1),
                      ((xm, y0, x1, ym), d + 1), ((x0, y0, xm, ym), d + 1)])
    return out


def alpha_at(domain, x):
    """Fictitious-domain scaling: 1 inside, ``alpha_fict`` outside (vectorized)."""
    x = np.asarray(x, dtype=float)
    vals = np.where(domain.inside(x), 1.0, domain.alpha_fict)
    return vals if x.ndim > 1 else float(vals[0])


def volume_rule(domain, bounds, n_gauss, depth, samples=5):
    """Points, weights and pointwise alpha for one element region.

    Uncut regions get a single Gauss rule; cut regions are integrated on the
    space-tree leaves, each with the same Gauss rule.
    """
    cls = classify(domain, bounds, samples)
    if cls != CUT:
        X, W = gauss_square(bounds, n_gauss)
        return X, W, alpha_at(domain, X), cls
    pts, wts = [], []
    for cell in integration_cells(domain, bounds, depth, samples):
        X, W = gauss_square(cell.bounds, n_gauss)
        pts.append(X)
        wts.append(W)
    X = np.concatenate(pts)
    return X, np.concatenate(wts), alpha_at(domain, X), cls


@dataclass
class BoundaryQuadrature:
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    segment: np.ndarray  # curve index in the domain's curve list
    element: np.ndarray  # containing base element (row-major index)
    locator: np.ndarray  # midpoint of the sub-segment each point belongs to

    def __len__(self):
        return len(self.weights)


def boundary_rule(domain, which, order, grid, spacing=None):
    """Gauss rule on all curves tagged ``which``, split at element boundaries.

    ``spacing`` defaults to the base element size; pass the finest overlay cell
    size to split at refined cell boundaries as well.
    """
    spacing = grid.h if spacing is None else spacing
    gx0, gy0, gx1, gy1 = grid.bounds
    tol = 1e-10 * max(grid.lengths)
    pts, wts, nrm, seg, loc = [], [], [], [], []
    for idx, curve in domain.curves_tagged(which):
        bx0, by0, bx1, by1 = curve.bbox()
        if bx0 < gx0 - tol or by0 < gy0 - tol or bx1 > gx1 + tol or by1 > gy1 + tol:
            raise ValueError(f"boundary curve {idx} ({which}) leaves the background grid")
        ts = curve.split(grid.origin, spacing)
        for t0, t1 in zip(ts[:-1], ts[1:]):
            P, W, Nn, mid = curve.rule(t0, t1, order)
            pts.append(P)
            wts.append(W)
            nrm.append(Nn)
            seg.append(np.full(len(W), idx))
            loc.append(np.tile(mid, (len(W), 1)))
    if not pts:
        empty = np.zeros((0, 2))
        return BoundaryQuadrature(empty, np.zeros(0), empty, np.zeros(0, int), np.zeros(0, int), empty)
    P = np.concatenate(pts)
    L = np.concatenate(loc)
    nx, ny = grid.counts
    ix = np.clip(np.floor((L[:, 0] - gx0) / grid.h).astype(int), 0, nx - 1)
    iy = np.clip(np.floor((L[:, 1] - gy0) / grid.h).astype(int), 0, ny - 1)
    return BoundaryQuadrature(P, np.concatenate(wts), np.concatenate(nrm),
                              np.concatenate(seg), iy * nx + ix, L)
