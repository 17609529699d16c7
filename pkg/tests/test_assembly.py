"""Assembly layer: matrix structure, scaling reassembly, caps."""

import numpy as np
import pytest

from nlspec.assembly import (DisconnectedSupportWarning, assemble,
                             assemble_scaled, effective_sup, from_matrix)
from nlspec.grid_kernel import (KernelSpec, ResolutionError, build_grid,
                                kernel_mass, make_coefficient)


def _setup(n=64, sigma=1.0, family="uniform", bounds=((0.0, 1.0),), avalue=0.0):
    grid = build_grid(bounds, [n] * len(bounds))
    k = KernelSpec(family=family, sigma=sigma, dimension=len(bounds))
    a = make_coefficient(grid, "constant", value=avalue)
    return grid, k, a


def test_row_sums_equal_kernel_mass():
    grid, k, a = _setup(n=64, sigma=1.0)
    op = assemble(grid, k, a, "L_plus_a")
    rows = op.matrix @ np.ones(op.n)
    for i in (5, 31, 50):
        assert abs(rows[i] - kernel_mass(k, grid, grid.nodes[i])) <= 1e-13
    assert np.all(rows > 0) and np.all(rows <= 1.0)


def test_m_variant_at_m0_is_L_minus_identity_plus_a():
    grid = build_grid([[0.0, 1.0]], [64])
    k = KernelSpec(family="triangle", sigma=0.5, m=0.0)
    a = make_coefficient(grid, "cosine_bump", amplitude=0.3, frequency=1.0, center=0.5)
    a0 = make_coefficient(grid, "constant", value=0.0)
    L = assemble(grid, k, a0, "L_plus_a")
    M = assemble(grid, k, a, "M_plus_a")
    want = L.matrix - np.eye(op_n := grid.n_nodes) + np.diag(a.values)
    np.testing.assert_allclose(M.matrix, want, atol=1e-15)
    assert M.shift == -1.0


def test_constant_coefficient_is_diagonal_shift():
    grid, k, _ = _setup(n=64, sigma=0.5)
    a0 = make_coefficient(grid, "constant", value=0.0)
    ac = make_coefficient(grid, "constant", value=0.37)
    A0 = assemble(grid, k, a0, "L_plus_a").matrix
    Ac = assemble(grid, k, ac, "L_plus_a").matrix
    np.testing.assert_array_equal(Ac, A0 + 0.37 * np.eye(grid.n_nodes))


def test_linearity_in_a_exact():
    grid = build_grid([[0.0, 1.0]], [48])
    k = KernelSpec(family="epanechnikov", sigma=0.5)
    a = make_coefficient(grid, "gaussian_bump", amplitude=0.4, width=0.2, center=0.5)
    a_shift = make_coefficient(grid, "tabulated", values=a.values + 0.25)
    A = assemble(grid, k, a, "L_plus_a").matrix
    B = assemble(grid, k, a_shift, "L_plus_a").matrix
    np.testing.assert_allclose(B, A + 0.25 * np.eye(grid.n_nodes), rtol=0, atol=1e-15)


def test_offdiagonal_nonnegative_and_symmetry_flag():
    grid, k, a = _setup(n=96, sigma=0.25, family="quartic")
    op = assemble(grid, k, a, "L_plus_a")
    off = op.matrix.copy()
    np.fill_diagonal(off, 0.0)
    assert np.all(off >= 0)
    assert op.symmetric
    assert np.max(np.abs(op.matrix - op.matrix.T)) <= 1e-14 * np.max(np.abs(op.matrix))


def test_gershgorin_row_sum_bound():
    grid = build_grid([[0.0, 1.0]], [96])
    k = KernelSpec(family="triangle", sigma=0.25, m=1.0)
    a = make_coefficient(grid, "cosine_bump", amplitude=0.5, frequency=1.0, center=0.3)
    op = assemble(grid, k, a, "M_plus_a")
    mu = np.linalg.eigvalsh(op.matrix)
    bound = np.max(op.matrix @ np.ones(op.n))  # offdiag sums + diag terms
    assert mu[-1] <= bound + 1e-12


def test_2d_assembly_and_symmetry():
    grid = build_grid([[0.0, 1.0], [0.0, 1.0]], [20, 20])
    k = KernelSpec(family="uniform", sigma=0.5, dimension=2)
    a = make_coefficient(grid, "constant", value=0.1)
    op = assemble(grid, k, a, "L_plus_a")
    assert op.symmetric and op.n == 400
    assert effective_sup(op) == 0.1


def test_effective_sup_examples():
    grid, k, a = _setup(n=64, sigma=1.0)
    assert effective_sup(assemble(grid, k, a, "L_plus_a")) == 0.0
    k2 = KernelSpec(family="uniform", sigma=0.1, m=2.0)
    g2 = build_grid([[0.0, 1.0]], [160])
    a2 = make_coefficient(g2, "constant", value=0.0)
    assert abs(effective_sup(assemble(g2, k2, a2, "M_plus_a")) - (-100.0)) <= 1e-10
    k0 = KernelSpec(family="uniform", sigma=1.0, m=0.0)
    a3 = make_coefficient(grid, "cosine_bump", amplitude=0.3, frequency=1.0, center=0.5)
    es = effective_sup(assemble(grid, k0, a3, "M_plus_a"))
    assert abs(es - (a3.nu - 1.0)) <= 1e-15


def test_resolution_violation_raises():
    grid = build_grid([[0.0, 1.0]], [32])
    k = KernelSpec(family="uniform", sigma=0.1)
    a = make_coefficient(grid, "constant", value=0.0)
    with pytest.raises(ResolutionError):
        assemble(grid, k, a, "L_plus_a")


def test_dense_cap():
    grid = build_grid([[0.0, 1.0]], [4100])
    k = KernelSpec(family="uniform", sigma=1.0)
    a = make_coefficient(grid, "constant", value=0.0)
    with pytest.raises(ValueError, match="capped"):
        assemble(grid, k, a, "L_plus_a")


def test_mass_vector_matches_kernel_mass():
    grid = build_grid([[0.0, 1.0]], [80])
    k = KernelSpec(family="triangle", sigma=0.4, m=1.5)
    a = make_coefficient(grid, "gaussian_bump", amplitude=0.2, width=0.3, center=0.5)
    op = assemble(grid, k, a, "M_plus_a")
    pref = 1.0 / 0.4**1.5
    for i in (0, 40, 79):
        want = pref * kernel_mass(k, grid, grid.nodes[i])
        assert abs(op.mass_vector()[i] - want) <= 1e-12 * pref


def test_scaled_identity_factor():
    grid, k, a = _setup(n=64, sigma=0.5, family="epanechnikov")
    op = assemble(grid, k, a, "L_plus_a")
    scaled = assemble_scaled(op, 1.0)
    np.testing.assert_array_equal(scaled.matrix, op.matrix)


@pytest.mark.parametrize("factor", [2.0, 0.5, 10.0])
def test_scaled_reassembly_entrywise(factor):
    grid = build_grid([[0.0, 1.0]], [64])
    k = KernelSpec(family="epanechnikov", sigma=0.5)
    a = make_coefficient(grid, "cosine_bump", amplitude=0.4, frequency=1.0, center=0.5)
    op = assemble(grid, k, a, "L_plus_a")
    scaled = assemble_scaled(op, factor)
    scale = np.max(np.abs(op.matrix))
    assert np.max(np.abs(scaled.matrix - op.matrix)) <= 1e-14 * scale
    # eigenvalues agree to straight eigendecomposition accuracy
    mu0 = np.linalg.eigvalsh(op.matrix)[-1]
    mu1 = np.linalg.eigvalsh(scaled.matrix)[-1]
    assert abs(mu0 - mu1) <= 1e-12


def test_scaled_roundtrip_idempotent():
    grid = build_grid([[0.0, 1.0]], [48])
    k = KernelSpec(family="triangle", sigma=0.5)
    a = make_coefficient(grid, "gaussian_bump", amplitude=0.3, width=0.25, center=0.4)
    op = assemble(grid, k, a, "L_plus_a")
    back = assemble_scaled(assemble_scaled(op, 2.0), 0.5)
    assert np.max(np.abs(back.matrix - op.matrix)) <= 1e-13 * np.max(np.abs(op.matrix))
    np.testing.assert_allclose(back.grid.nodes, op.grid.nodes, rtol=0, atol=1e-15)


def test_from_matrix_and_disconnected_warning():
    A = np.array([[0.0, 1.0, 0.0, 0.0],
                  [1.0, 0.0, 0.0, 0.0],
                  [0.0, 0.0, 0.5, 2.0],
                  [0.0, 0.0, 2.0, 0.5]])
    with pytest.warns(DisconnectedSupportWarning):
        op = from_matrix(A)
    assert op.n_components == 2
    assert op.symmetric
    with pytest.raises(ValueError):
        from_matrix(np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_connected_when_resolved():
    grid, k, a = _setup(n=80, sigma=0.1)
    op = assemble(grid, k, a, "L_plus_a")
    assert op.n_components == 1


def test_general_variant_assembles_asymmetric():
    grid = build_grid([[0.0, 1.0]], [32])
    gmod = make_coefficient(grid, "constant", value=1.0)
    hmod = make_coefficient(grid, "piecewise", xs=[0.0, 1.0], ys=[0.8, 1.2])
    k = KernelSpec(variant="general", family="triangle", radius=1.0,
                   g_mod=gmod, h_mod=hmod)
    a = make_coefficient(grid, "constant", value=0.0)
    op = assemble(grid, k, a, "L_plus_a")
    assert not op.symmetric
    assert np.max(np.abs(op.matrix - op.matrix.T)) > 1e-6
    with pytest.raises(ValueError, match="convolution"):
        assemble(grid, k, a, "M_plus_a")
