"""Finite-difference Dirichlet reference solver."""

import numpy as np
import pytest

from nlspec.grid_kernel import KernelSpec, build_grid, make_coefficient
from nlspec.local_ref import diffusivity, dirichlet_lambda1


def test_interval_spectrum():
    grid = build_grid([[0.0, 1.0]], [256])
    a = make_coefficient(grid, "constant", value=0.0)
    res = dirichlet_lambda1(grid, 1.0, a)
    assert abs(res.lambda_1 - np.pi**2) / np.pi**2 <= 1e-3
    assert res.residual <= 1e-8
    assert np.all(res.phi_1 > 0)
    # unit weighted-l2 normalization
    assert abs(np.sum(grid.weights * res.phi_1**2) - 1.0) <= 1e-12


def test_linearity_in_diffusivity():
    grid = build_grid([[0.0, 1.0]], [256])
    a = make_coefficient(grid, "constant", value=0.0)
    res = dirichlet_lambda1(grid, 1.0 / 6.0, a)
    assert abs(res.lambda_1 - np.pi**2 / 6) / (np.pi**2 / 6) <= 1e-3


def test_constant_a_is_diagonal_shift():
    grid = build_grid([[0.0, 1.0]], [128])
    a0 = make_coefficient(grid, "constant", value=0.0)
    ak = make_coefficient(grid, "constant", value=0.8)
    l0 = dirichlet_lambda1(grid, 1.0, a0).lambda_1
    lk = dirichlet_lambda1(grid, 1.0, ak).lambda_1
    assert abs(lk - (l0 - 0.8)) <= 1e-10


def test_variational_lower_bound():
    grid = build_grid([[0.0, 1.0]], [128])
    a = make_coefficient(grid, "cosine_bump", amplitude=1.3, frequency=1.0, center=0.5)
    res = dirichlet_lambda1(grid, 0.05, a)
    assert res.lambda_1 >= -a.nu - 1e-12


def test_second_order_convergence():
    errs = []
    for n in (32, 64, 128):
        grid = build_grid([[0.0, 1.0]], [n])
        a = make_coefficient(grid, "constant", value=0.0)
        errs.append(abs(dirichlet_lambda1(grid, 1.0, a).lambda_1 - np.pi**2))
    for e0, e1 in zip(errs, errs[1:]):
        assert 3.5 <= e0 / e1 <= 4.5


def test_2d_unit_square():
    grid = build_grid([[0.0, 1.0], [0.0, 1.0]], [48, 48])
    a = make_coefficient(grid, "constant", value=0.0)
    res = dirichlet_lambda1(grid, 1.0, a)
    assert abs(res.lambda_1 - 2 * np.pi**2) / (2 * np.pi**2) <= 1e-3


def test_diffusivity_values():
    assert abs(diffusivity(KernelSpec(family="uniform")) - 1.0 / 6.0) <= 1e-14
    assert abs(diffusivity(KernelSpec(family="triangle")) - 1.0 / 12.0) <= 1e-14
    assert abs(diffusivity(KernelSpec(family="uniform", dimension=2)) - 1.0 / 8.0) <= 1e-14
    with pytest.raises(ValueError, match="even"):
        diffusivity(KernelSpec(family="uniform", drift=0.4))


def test_nonlocal_form_bounded_by_local_form():
    # interior-supported sine modes: the sigma-normalized nonlocal energy
    # stays below (D2/2) * discrete H1 seminorm, with margin shrinking in sigma
    from nlspec.grid_kernel import kernel_matrix, second_moment
    d2 = second_moment(KernelSpec(family="uniform"))
    margin = 0.25
    for sigma in (0.2, 0.1, 0.05):
        n = int(round(16 / sigma))
        grid = build_grid([[0.0, 1.0]], [n])
        x = grid.nodes[:, 0]
        h = grid.h
        k = KernelSpec(family="uniform", sigma=sigma)
        K = kernel_matrix(k, grid.nodes, grid.nodes)
        for mode in (1, 2, 3):
            phi = np.where((x >= margin) & (x <= 1 - margin),
                           np.sin(mode * np.pi * (x - margin) / (1 - 2 * margin)), 0.0)
            diff2 = (phi[:, None] - phi[None, :]) ** 2
            lhs = 0.5 * h * h * float(np.sum(K * diff2)) / sigma**2
            grad = np.diff(phi) / h
            rhs = (d2 / 2.0) * float(np.sum(h * grad**2))
            assert lhs <= rhs + 10.0 * h


def test_rejects_nonpositive_diffusivity():
    grid = build_grid([[0.0, 1.0]], [32])
    a = make_coefficient(grid, "constant", value=0.0)
    with pytest.raises(ValueError):
        dirichlet_lambda1(grid, 0.0, a)
