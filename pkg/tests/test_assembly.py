import numpy as np
import pytest
import scipy.linalg as sl
import scipy.sparse.linalg as sla

from hpfcm.assembly import (DirichletPenalty, Elasticity2D, Poisson, QuadConfig, assemble,
                            energy_error, l2_error, manufactured_poisson, sample_solution)
from hpfcm.immersed import ImplicitDomain, Segment, rotated_square
from hpfcm.mesh import HpMesh, build_dof_map, build_grid

from conftest import rotated_problem


def square_setup(n, p, n_f=1, length=1.0):
    mesh = HpMesh(build_grid((0, 0), (length, length), (n, n)))
    L = length
    corners = [(0.0, 0.0), (L, 0.0), (L, L), (0.0, L)]
    dom = ImplicitDomain(lambda x: np.maximum.reduce([-x[:, 0], x[:, 0] - L, -x[:, 1], x[:, 1] - L]),
                         [Segment(corners[i], corners[(i + 1) % 4], "dirichlet") for i in range(4)])
    return mesh, build_dof_map(mesh, p, n_f=n_f), dom


def test_p1_reference_stiffness():
    mesh, dm, dom = square_setup(1, 1)
    A = assemble(mesh, dm, dom, Poisson(1.0)).A.toarray()
    # bilinear Q1 Laplacian on a square, vertices ordered counter-clockwise
    ref = np.array([[4, -1, -2, -1], [-1, 4, -1, -2], [-2, -1, 4, -1], [-1, -2, -1, 4]]) / 6.0
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    vals, _, dofs = dm.evaluate((0, 0, 0), corners)
    perm = dofs[np.argmax(vals, axis=1), 0]
    assert np.allclose(A[np.ix_(perm, perm)], ref, atol=1e-14)


def test_interior_row_sums_vanish():
    mesh, dm, dom = square_setup(4, 1)
    A = assemble(mesh, dm, dom, Poisson(1.0)).A
    assert np.allclose(A @ np.ones(dm.n_dofs), 0.0, atol=1e-13)


def test_system_is_symmetric_and_spd():
    pb = rotated_problem(30, 2, "1/8")
    A = pb.A
    assert sla.norm(A - A.T, np.inf) <= 1e-12 * sla.norm(A, np.inf)
    w = sl.eigvalsh(A.toarray())
    assert w[0] > 0
    sl.cholesky(A.toarray())


def test_poisson_patch_test():
    mesh, dm, dom = square_setup(3, 2)
    g = lambda x: 1.0 + 2.0 * x[:, 0] - 3.0 * x[:, 1]  # noqa: E731
    sys_ = assemble(mesh, dm, dom, Poisson(1.0), [DirichletPenalty(g, 1e10)])
    x = sla.spsolve(sys_.A.tocsc(), sys_.b)
    err = l2_error(mesh, dm, dom, x, g)
    assert err < 1e-6


def test_elasticity_patch_test():
    mesh, dm, dom = square_setup(3, 2, n_f=2)
    G = np.array([[1e-3, 2e-3], [-1e-3, 5e-4]])
    g = lambda x: 0.01 + x @ G.T  # noqa: E731
    phys = Elasticity2D(1.0, 0.29)
    sys_ = assemble(mesh, dm, dom, phys, [DirichletPenalty(g, 1e10)])
    x = sla.spsolve(sys_.A.tocsc(), sys_.b)
    pts = np.random.default_rng(0).uniform(0.05, 0.95, (40, 2))
    uh = sample_solution(mesh, dm, x, pts)
    ue = g(pts)
    assert np.abs(uh - ue).max() <= 1e-6 * np.abs(ue).max()


def test_physics_mismatch_raises():
    mesh, dm, dom = square_setup(2, 1)
    with pytest.raises(ValueError):
        assemble(mesh, dm, dom, Elasticity2D(1.0, 0.3))


def test_dirichlet_without_boundary_raises():
    mesh, dm, _ = square_setup(2, 1)
    dom = ImplicitDomain(lambda x: -np.ones(len(x)))  # no curves
    with pytest.raises(RuntimeError):
        assemble(mesh, dm, dom, Poisson(), [DirichletPenalty(lambda x: 0 * x[:, 0], 1.0)])


def test_manufactured_solution_satisfies_pde(rng):
    ex = manufactured_poisson(30.0, 10.0)
    assert ex.a == pytest.approx(4.712, abs=1e-3)
    assert ex.u(np.zeros((1, 2)))[0] == 0.0
    x = rng.uniform(-0.5, 0.5, (100, 2))
    h = 1e-4
    lap = sum(ex.u(x + h * e) - 2 * ex.u(x) + ex.u(x - h * e) for e in np.eye(2)) / h**2
    assert np.allclose(-10.0 * lap, ex.source(x), atol=1e-5)
    for d, e in enumerate(np.eye(2)):
        fd = (ex.u(x + 1e-6 * e) - ex.u(x - 1e-6 * e)) / 2e-6
        assert np.allclose(ex.grad(x)[:, d], fd, atol=1e-8)


def _mesh_fitting_error(p, h, beta):
    from hpfcm.benchcli import build_problem, config_from_dict
    cfg = config_from_dict({"discretization": {"p": p, "h": h}, "fcm": {"beta": beta}})
    pb = build_problem(cfg)
    x = sla.spsolve(pb.A.tocsc(), pb.b)
    e = energy_error(pb.mesh, pb.dofmap, pb.domain, x, pb.exact.grad, pb.physics, pb.quad)
    l2 = l2_error(pb.mesh, pb.dofmap, pb.domain, x, pb.exact.u, pb.quad)
    return e, l2, pb, x


def test_energy_error_of_interpolant_is_small():
    _, _, pb, x = _mesh_fitting_error(4, "1/16", 1e8)
    e = energy_error(pb.mesh, pb.dofmap, pb.domain, x, pb.exact.grad, pb.physics, pb.quad)
    assert e < 1e-6


@pytest.mark.parametrize("p", [1, 2, 3])
def test_energy_convergence_rate(p):
    e1 = _mesh_fitting_error(p, "1/8", 1e8)[0]
    e2 = _mesh_fitting_error(p, "1/16", 1e8)[0]
    assert abs(e1 / e2 / 2**p - 1.0) < 0.15


def test_higher_order_is_more_accurate():
    assert _mesh_fitting_error(3, "1/8", 1e8)[0] < _mesh_fitting_error(2, "1/8", 1e8)[0]


@pytest.mark.xfail(strict=True, reason="with beta=1e4 the penalty error still dominates the L2 error")
def test_penalty_saturation():
    a = _mesh_fitting_error(2, "1/8", 1e4)[1]
    b = _mesh_fitting_error(2, "1/8", 1e8)[1]
    assert abs(a - b) < 0.01 * b


def test_quadtree_depth_convergence():
    sq = rotated_square(30.0)
    mesh = HpMesh(build_grid((-0.75, -0.75), (1.5, 1.5), (6, 6)))
    dm = build_dof_map(mesh, 2)
    A4 = assemble(mesh, dm, sq, Poisson(10.0), quad=QuadConfig(depth=4)).A.toarray()
    A8 = assemble(mesh, dm, sq, Poisson(10.0), quad=QuadConfig(depth=8)).A.toarray()
    big = np.abs(A8) > 1e-3 * np.abs(A8).max()
    assert np.all(np.abs(A4 - A8)[big] < 0.1 * np.abs(A8)[big])


def test_fictitious_contribution_is_tiny():
    sq = rotated_square(30.0)
    mesh = HpMesh(build_grid((-0.75, -0.75), (1.5, 1.5), (6, 6)))
    dm = build_dof_map(mesh, 2)
    A0 = assemble(mesh, dm, sq, Poisson(10.0), alpha_fict=0.0).A
    A1 = assemble(mesh, dm, sq, Poisson(10.0)).A
    assert sla.norm(A1 - A0) <= 1e-7 * sla.norm(A1)
