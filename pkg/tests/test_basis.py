import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import legendre as npleg

from hpfcm.basis import (EDGE, INTERIOR, TENSOR, TRUNK, VERTEX, build_element_basis, eval_basis_2d,
                         eval_modes_1d, interior_pairs, legendre, mode_order)

XI = np.linspace(-1.0, 1.0, 41)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 9])
def test_legendre_matches_numpy(n):
    P, dP = legendre(n, XI)
    for j in range(n + 1):
        c = np.zeros(j + 1)
        c[j] = 1.0
        assert np.allclose(P[j], npleg.legval(XI, c), atol=1e-13)
        assert np.allclose(dP[j], npleg.legval(XI, npleg.legder(c)), atol=1e-12)


def test_nodal_modes_and_bubble_endpoints():
    N, dN = eval_modes_1d(6, np.array([-1.0, 1.0]))
    assert np.allclose(N[0], [1.0, 0.0]) and np.allclose(N[1], [0.0, 1.0])
    assert np.allclose(N[2:], 0.0, atol=1e-15)


def test_bubble_derivatives_are_orthonormal():
    # d/dxi N_{j+1} = sqrt((2j-1)/2) P_{j-1}: the bubble stiffness is the identity.
    t, w = npleg.leggauss(12)
    _, dN = eval_modes_1d(8, t)
    K = (dN[2:] * w) @ dN[2:].T
    assert np.allclose(K, np.eye(len(K)), atol=1e-13)


def test_mode_derivatives_match_finite_differences():
    x = np.linspace(-0.9, 0.9, 7)
    eps = 1e-6
    _, dN = eval_modes_1d(5, x)
    Np, _ = eval_modes_1d(5, x + eps)
    Nm, _ = eval_modes_1d(5, x - eps)
    assert np.allclose(dN, (Np - Nm) / (2 * eps), atol=1e-8)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        eval_modes_1d(0, 0.0)
    with pytest.raises(ValueError):
        eval_modes_1d(2, 1.5)
    with pytest.raises(ValueError):
        build_element_basis(2, "serendipity")


def test_mode_order():
    assert [mode_order(i) for i in (1, 2, 3, 4, 7)] == [1, 1, 2, 3, 6]


@pytest.mark.parametrize("p", range(1, 8))
def test_tensor_basis_size(p):
    assert len(build_element_basis(p, TENSOR)) == (p + 1) ** 2


@pytest.mark.parametrize("p", range(1, 8))
def test_trunk_basis_size(p):
    interior = (p - 2) * (p - 3) // 2 if p >= 4 else 0
    assert len(build_element_basis(p, TRUNK)) == 4 + 4 * (p - 1) + interior


def test_basis_is_hierarchical():
    for space in (TENSOR, TRUNK):
        for p in range(1, 6):
            lo = build_element_basis(p, space).modes
            hi = build_element_basis(p + 1, space).modes
            assert set(lo) <= set(hi)
            assert all(m.order <= p for m in lo)


def test_entity_layout():
    b = build_element_basis(3)
    kinds = [m.entity for m in b.modes]
    assert kinds[:4] == [VERTEX] * 4
    assert kinds.count(EDGE) == 8 and kinds.count(INTERIOR) == 4
    pairs, order = interior_pairs(4, TRUNK)
    assert all(order(ij) <= 4 for ij in pairs)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1))
def test_vertex_modes_partition_unity(x, y):
    b = build_element_basis(4)
    v, g = eval_basis_2d(b, np.array([x, y]))
    assert abs(v[0, :4].sum() - 1.0) < 1e-14
    assert np.allclose(g[0, :4].sum(axis=0), 0.0, atol=1e-14)


def test_basis_vanishes_on_edges_it_does_not_own():
    b = build_element_basis(4)
    pts = {0: [(0.3, -1.0)], 1: [(1.0, 0.3)], 2: [(0.3, 1.0)], 3: [(-1.0, 0.3)]}
    for e, pt in pts.items():
        v, _ = eval_basis_2d(b, np.array(pt))
        for i, m in enumerate(b.modes):
            if m.entity == INTERIOR or (m.entity == EDGE and m.local_entity != e):
                assert abs(v[0, i]) < 1e-15


def test_2d_gradients_match_finite_differences():
    b = build_element_basis(3, TRUNK)
    x = np.array([[0.2, -0.4], [-0.7, 0.5]])
    eps = 1e-6
    _, g = eval_basis_2d(b, x)
    for d in range(2):
        e = np.zeros(2)
        e[d] = eps
        vp, _ = eval_basis_2d(b, x + e)
        vm, _ = eval_basis_2d(b, x - e)
        assert np.allclose(g[:, :, d], (vp - vm) / (2 * eps), atol=1e-8)
