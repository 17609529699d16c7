"""Dense assembly of the discretized nonlocal operators.

The discrete operator is the Nystrom matrix of the integral part plus the
diagonal zero-order terms:

    A[i, j] = w_j * K(x_i, x_j) + delta_ij * (a_i + shift)

with shift = 0 for the plain integral operator plus a (variant L_plus_a)
and shift = -1/sigma^m for the dispersal-budget operator (variant
M_plus_a), whose integral term also carries the 1/sigma^m prefactor.
The integral runs over the box only (Dirichlet-exterior convention): no
ghost values, so kernel mass near the boundary is < 1.

Assembly refuses more than MAX_DENSE nodes; this is a desk-scale
correctness tool, not an HPC code.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph, csr_matrix

from .grid_kernel import (Coefficient, Grid, KernelSpec, check_resolution,
                          kernel_matrix, _freeze)

__all__ = ["DiscreteOperator", "DisconnectedSupportWarning", "assemble",
           "assemble_scaled", "effective_sup", "from_matrix", "MAX_DENSE"]

MAX_DENSE = 4096


class DisconnectedSupportWarning(UserWarning):
    """Off-diagonal support graph splits; the eigenvalue is per-component."""


@dataclass(frozen=True)
class DiscreteOperator:
    """Immutable dense operator with its zero-order bookkeeping.

    a_values and shift are kept separately from the matrix so the certified
    bounds can recover a_i + shift and the kernel row masses exactly:
    mass_i = (A @ 1)_i - (a_i + shift).
    """

    matrix: np.ndarray
    grid: Grid
    a_values: np.ndarray
    shift: float
    symmetric: bool
    n_components: int
    variant: str
    kernel: KernelSpec | None = None
    coefficient: Coefficient | None = None
    sigma: float = 0.0
    m: float = 0.0
    kernel_scale: float = 1.0   # accumulated domain dilation wrt the base kernel

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def diag_terms(self) -> np.ndarray:
        """a_i + shift, the diagonal zero-order part."""
        return self.a_values + self.shift

    def mass_vector(self) -> np.ndarray:
        """Row quadrature masses of the (prefactored) kernel part."""
        return self.matrix @ np.ones(self.n) - self.diag_terms()


def _connected_components(M: np.ndarray) -> int:
    off = np.abs(M.copy())
    np.fill_diagonal(off, 0.0)
    graph = csr_matrix(off > 0.0)
    ncomp, _ = csgraph.connected_components(graph, directed=False)
    return int(ncomp)


def _finish(matrix, grid, a_values, shift, symmetric, variant, kernel, coeff,
            sigma, m, kernel_scale=1.0) -> DiscreteOperator:
    if not np.all(np.isfinite(matrix)):
        raise ValueError("non-finite matrix entries")
    ncomp = _connected_components(matrix)
    if ncomp > 1:
        warnings.warn(
            f"support graph has {ncomp} components; the reported eigenvalue "
            "is the max over components", DisconnectedSupportWarning)
    matrix = _freeze(matrix)
    return DiscreteOperator(matrix, grid, _freeze(np.asarray(a_values, dtype=float)),
                            float(shift), symmetric, ncomp, variant, kernel, coeff,
                            float(sigma), float(m), float(kernel_scale))


def assemble(grid: Grid, k: KernelSpec, a: Coefficient, variant: str = "L_plus_a") -> DiscreteOperator:
    """Assemble the dense matrix for the chosen operator variant.

    variant 'L_plus_a': integral of K plus diag(a).
    variant 'M_plus_a': (1/sigma^m) * (integral of J_sigma - identity) + diag(a);
    requires a convolution kernel.
    """
    if variant not in ("L_plus_a", "M_plus_a"):
        raise ValueError(f"unknown variant {variant!r}")
    if grid.n_nodes > MAX_DENSE:
        raise ValueError(f"dense assembly capped at {MAX_DENSE} nodes, got {grid.n_nodes}")
    if a.grid is not grid and not np.array_equal(a.grid.nodes, grid.nodes):
        raise ValueError("coefficient and grid must share nodes")
    check_resolution(grid, k)

    K = kernel_matrix(k, grid.nodes, grid.nodes)
    if variant == "M_plus_a":
        if k.variant != "convolution":
            raise ValueError("M_plus_a needs a convolution kernel")
        pref = 1.0 / k.sigma**k.m
        K = K * pref
        shift = -pref
    else:
        shift = 0.0

    A = K * grid.weights[None, :]
    idx = np.diag_indices(grid.n_nodes)
    A[idx] += a.values + shift

    # convolution/slow-decay kernels on uniform grids are symmetric up to
    # the (constant) weights; the general modulated variant is not
    symmetric = k.is_even and k.variant != "general"
    return _finish(A, grid, a.values, shift, symmetric, variant, k, a,
                   k.sigma if k.variant == "convolution" else 0.0,
                   k.m if variant == "M_plus_a" else 0.0)


def assemble_scaled(op: DiscreteOperator, sigma_s: float) -> DiscreteOperator:
    """Reassemble on the dilated grid sigma_s * box with the dilated kernel.

    The scaled kernel sigma_s^-N K(x/sigma_s, y/sigma_s) against weights
    sigma_s^N w cancels algebraically, so the returned matrix equals the
    original entrywise up to rounding; the eigenvalues are invariant.
    """
    if op.variant != "L_plus_a":
        raise ValueError("scaled reassembly is defined for L_plus_a operators")
    if op.kernel is None or op.coefficient is None:
        raise ValueError("raw operators carry no kernel to rescale")
    if sigma_s <= 0:
        raise ValueError("scale factor must be positive")

    g = op.grid
    nodes = g.nodes * sigma_s
    weights = g.weights * sigma_s**g.dimension
    bounds = tuple((lo * sigma_s, hi * sigma_s) for lo, hi in g.bounds)
    grid_s = Grid(g.dimension, bounds, g.h * sigma_s, g.shape,
                  _freeze(nodes), _freeze(weights))

    # total dilation relative to the base kernel, so repeated scalings compose
    total = op.kernel_scale * sigma_s
    K = kernel_matrix(op.kernel, nodes / total, nodes / total) / total**g.dimension
    A = K * grid_s.weights[None, :]
    a_s = op.coefficient.rescaled(sigma_s, grid_s)
    idx = np.diag_indices(grid_s.n_nodes)
    A[idx] += a_s.values
    return _finish(A, grid_s, a_s.values, 0.0, op.symmetric, op.variant,
                   op.kernel, a_s, op.sigma, op.m, total)


def from_matrix(A: np.ndarray, weights=None) -> DiscreteOperator:
    """Wrap a raw square matrix as an operator (tests, random instances).

    The diagonal is attributed to the zero-order part (a_i = A_ii, zero
    kernel diagonal), weights default to 1.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    off = A.copy()
    np.fill_diagonal(off, 0.0)
    if np.any(off < 0):
        raise ValueError("off-diagonal entries must be nonnegative")
    if weights is None:
        weights = np.ones(n)
    weights = np.asarray(weights, dtype=float)
    nodes = np.arange(n, dtype=float)[:, None]
    grid = Grid(1, ((0.0, float(n)),), 1.0, (n,), _freeze(nodes), _freeze(weights))
    symmetric = bool(np.allclose(A, A.T, rtol=0.0, atol=1e-14 * max(1.0, np.abs(A).max())))
    return _finish(A, grid, np.diag(A).copy(), 0.0, symmetric, "raw", None, None, 0.0, 0.0)


def effective_sup(op: DiscreteOperator) -> float:
    """Max over nodes of the zero-order term a_i + shift.

    Equals nu for the L variant and nu - 1/sigma^m for the M variant; the
    eigenpair-existence test compares -lambda_p against this level.
    """
    return float(np.max(op.diag_terms()))
