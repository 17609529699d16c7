"""Grids, dispersal kernels, and coefficient fields.

Everything downstream works on a uniform midpoint (cell-centered) grid:
nodes sit at cell centers and every node carries the weight h^N, so
quadrature sums are plain weighted dot products and all weights stay
positive.  Positive weights matter: they preserve the nonnegative
(Perron) structure of the discretized integral operator, which is what
the certified eigenvalue bounds in :mod:`nlspec.spectral` rely on.

Kernel families are compactly supported probability densities J on the
ball of radius ``radius``, rescaled as J_sigma(z) = sigma^-N J(z/sigma).
A truncated algebraically-decaying family is provided for the 1-D
slow-decay experiments, and a drift parameter allows non-even kernels
for the exponential test-function bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "Grid",
    "KernelSpec",
    "Coefficient",
    "ResolutionError",
    "build_grid",
    "nested_box_family",
    "eval_kernel",
    "kernel_matrix",
    "second_moment",
    "kernel_mass",
    "make_coefficient",
    "nondegeneracy_witnesses",
    "check_resolution",
]

# Relative half-width of the band around a support edge inside which a
# discontinuous kernel takes its jump-average value.  Keeps midpoint
# quadrature second order when the edge lands exactly on a node distance,
# and makes kernel evaluation stable under coordinate rescaling noise.
EDGE_SNAP = 1e-12

MAX_TOTAL_NODES = 10**7

CONV_FAMILIES = ("uniform", "triangle", "epanechnikov", "quartic")


class ResolutionError(ValueError):
    """Grid spacing too coarse for the kernel scale (h > sigma*radius/8)."""


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform midpoint grid on a box.

    nodes has shape (n, N) (row-major over axes in 2-D), weights is the
    constant vector h^N.  Instances are immutable; arrays are marked
    read-only so they can be shared freely across threads.
    """

    dimension: int
    bounds: tuple
    h: float
    shape: tuple
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def volume(self) -> float:
        v = 1.0
        for lo, hi in self.bounds:
            v *= hi - lo
        return v

    def interior_mask(self, margin: float) -> np.ndarray:
        """Boolean mask of nodes at distance >= margin from the box boundary."""
        mask = np.ones(self.n_nodes, dtype=bool)
        for d, (lo, hi) in enumerate(self.bounds):
            xd = self.nodes[:, d]
            mask &= (xd - lo >= margin) & (hi - xd >= margin)
        return mask


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def build_grid(bounds: Sequence, resolution: Sequence) -> Grid:
    """Build a uniform midpoint grid.

    bounds: per-axis (lo, hi); resolution: nodes per axis (>= 2).  The
    spacing must agree across axes (square cells), weights are h^N and sum
    to the box volume exactly up to rounding.
    """
    bounds = tuple((float(lo), float(hi)) for lo, hi in np.atleast_2d(np.asarray(bounds, dtype=float)))
    resolution = tuple(int(r) for r in np.atleast_1d(resolution))
    ndim = len(bounds)
    if ndim not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {ndim}")
    if len(resolution) != ndim:
        raise ValueError("resolution must give one node count per axis")
    for lo, hi in bounds:
        if not (np.isfinite(lo) and np.isfinite(hi)) or not hi > lo:
            raise ValueError(f"bounds must be finite and nondegenerate, got ({lo}, {hi})")
    for r in resolution:
        if r < 2:
            raise ValueError("resolution must be >= 2 nodes per axis")
    total = int(np.prod(resolution))
    if total > MAX_TOTAL_NODES:
        raise ValueError(f"resolution overflow: {total} > {MAX_TOTAL_NODES} total nodes")

    hs = [(hi - lo) / r for (lo, hi), r in zip(bounds, resolution)]
    h = hs[0]
    if any(abs(hd - h) > 1e-9 * h for hd in hs):
        raise ValueError(f"axis spacings must agree (square cells), got {hs}")

    axes = [lo + (np.arange(r) + 0.5) * hd for (lo, hi), r, hd in zip(bounds, resolution, hs)]
    if ndim == 1:
        nodes = axes[0][:, None]
    else:
        X1, X2 = np.meshgrid(axes[0], axes[1], indexing="ij")
        nodes = np.column_stack([X1.ravel(), X2.ravel()])
    weights = np.full(nodes.shape[0], h**ndim)
    return Grid(ndim, bounds, h, resolution, _freeze(nodes), _freeze(weights))


def nested_box_family(half_widths: Sequence[float], h: float, dimension: int = 1) -> list:
    """Grids on [-L, L]^N for increasing L, sharing one node lattice.

    Nodes are taken from the signed lattice (i + 1/2) * h, so the node set
    of every level is exactly (bitwise) contained in the next.  Each L must
    be an integer multiple of h.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    Ls = [float(L) for L in half_widths]
    if any(b <= a for a, b in zip(Ls, Ls[1:])):
        raise ValueError("half_widths must be strictly increasing")
    grids = []
    for L in Ls:
        k = L / h
        if abs(k - round(k)) > 1e-9:
            raise ValueError(f"half width {L} is not a multiple of h={h}")
        k = int(round(k))
        idx = np.arange(-k, k)
        axis = (idx + 0.5) * h
        if dimension == 1:
            nodes = axis[:, None]
            shape = (2 * k,)
        elif dimension == 2:
            X1, X2 = np.meshgrid(axis, axis, indexing="ij")
            nodes = np.column_stack([X1.ravel(), X2.ravel()])
            shape = (2 * k, 2 * k)
        else:
            raise ValueError("dimension must be 1 or 2")
        if nodes.shape[0] > MAX_TOTAL_NODES:
            raise ValueError("resolution overflow in nested family")
        weights = np.full(nodes.shape[0], h**dimension)
        grids.append(Grid(dimension, tuple(((-L, L),) * dimension), h, shape,
                          _freeze(nodes), _freeze(weights)))
    return grids


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

# base-family radial profiles c*f(|u|) on the unit-radius support,
# normalization constants per dimension, and second moments D2 for radius=1.
_FAMILY = {
    # family: (profile f(t) on t in [0,1], norm 1-D, norm 2-D, D2 1-D, D2 2-D)
    "uniform": (lambda t: np.ones_like(t), 0.5, 1.0 / np.pi, 1.0 / 3.0, 1.0 / 2.0),
    "triangle": (lambda t: 1.0 - t, 1.0, 3.0 / np.pi, 1.0 / 6.0, 3.0 / 10.0),
    "epanechnikov": (lambda t: 1.0 - t**2, 0.75, 2.0 / np.pi, 1.0 / 5.0, 1.0 / 3.0),
    "quartic": (lambda t: (1.0 - t**2) ** 2, 15.0 / 16.0, 3.0 / np.pi, 1.0 / 7.0, 1.0 / 4.0),
}


@dataclass(frozen=True)
class KernelSpec:
    """Dispersal kernel description.

    variant 'convolution': K(x, y) = sigma^-N J((x - y)/sigma - drift*e1)
    with J one of the compactly supported unit-mass families on the ball
    of radius ``radius``.  drift != 0 (1-D only) breaks evenness and is
    meant for the exponential-test lower bound.

    variant 'general': K(x, y) = J((x - y)/(g(y) h(x))) with positive
    bounded modulations g, h given as coefficient fields.

    variant 'slow_decay_1d': K(x, y) = C (1 + |x - y|)^-alpha on
    |x - y| <= r_trunc, alpha > 3/2.
    """

    variant: str = "convolution"
    family: str = "uniform"
    radius: float = 1.0
    sigma: float = 1.0
    m: float = 2.0
    drift: float = 0.0
    amplitude: float = 1.0     # slow_decay amplitude C
    alpha: float = 2.0         # slow_decay exponent
    r_trunc: float = 50.0      # slow_decay truncation radius
    dimension: int = 1
    g_mod: Optional["Coefficient"] = None
    h_mod: Optional["Coefficient"] = None

    def __post_init__(self):
        if self.variant not in ("convolution", "general", "slow_decay_1d"):
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if self.variant in ("convolution", "general"):
            if self.family not in CONV_FAMILIES:
                raise ValueError(f"unknown kernel family {self.family!r}")
            if self.radius <= 0:
                raise ValueError("support radius must be positive")
        if self.variant == "convolution":
            if self.sigma <= 0:
                raise ValueError("sigma must be positive")
            if not 0.0 <= self.m <= 2.0:
                raise ValueError("m must lie in [0,2]")
            if self.drift != 0.0 and self.dimension != 1:
                raise ValueError("drift kernels are 1-D only")
        if self.variant == "general":
            if self.g_mod is None or self.h_mod is None:
                raise ValueError("general variant needs g_mod and h_mod")
            if self.g_mod._fn is None or self.h_mod._fn is None:
                raise ValueError("modulations must be symbolic families, not tabulated")
            if np.min(self.g_mod.values) <= 0 or np.min(self.h_mod.values) <= 0:
                raise ValueError("modulations must be positive")
        if self.variant == "slow_decay_1d":
            if self.dimension != 1:
                raise ValueError("slow_decay kernel is 1-D only")
            if self.alpha <= 1.5:
                raise ValueError("slow_decay exponent alpha must exceed 3/2")
            if self.amplitude <= 0 or self.r_trunc <= 0:
                raise ValueError("slow_decay amplitude and r_trunc must be positive")
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")

    @property
    def is_even(self) -> bool:
        return self.variant != "convolution" or self.drift == 0.0

    def support_radius(self) -> float:
        """Radius beyond which the kernel vanishes (x - y distance)."""
        if self.variant == "convolution":
            return self.sigma * (self.radius + abs(self.drift))
        if self.variant == "slow_decay_1d":
            return self.r_trunc
        gh = float(np.max(self.g_mod.values)) * float(np.max(self.h_mod.values))
        return self.radius * gh

    def with_sigma(self, sigma: float) -> "KernelSpec":
        return replace(self, sigma=float(sigma))


def _base_density(family: str, u: np.ndarray, dimension: int, radius: float) -> np.ndarray:
    """Unit-mass family density on the ball of the given radius.

    u: (..., N) displacement in base units.  The uniform family takes the
    jump-average value on the support edge (within EDGE_SNAP relative band),
    which keeps midpoint quadrature second order when the edge lands on a
    node distance; the other families vanish continuously there.
    """
    t = np.linalg.norm(u, axis=-1) / radius
    profile, c1, c2, _, _ = _FAMILY[family]
    c = (c1 if dimension == 1 else c2) / radius**dimension
    inside = t < 1.0 - EDGE_SNAP
    vals = np.where(inside, profile(np.minimum(t, 1.0)), 0.0)
    if family == "uniform":
        edge = np.abs(t - 1.0) <= EDGE_SNAP
        vals = np.where(edge, 0.5, vals)
    return c * vals


def eval_kernel(k: KernelSpec, x, y) -> np.ndarray:
    """Evaluate K(x, y); x, y broadcast over (..., N) point arrays."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape[-1] != k.dimension:
        x = x[..., None]
        y = y[..., None]
    z = x - y
    if k.variant == "convolution":
        u = z / k.sigma
        if k.drift != 0.0:
            u = u - k.drift
        out = _base_density(k.family, u, k.dimension, k.radius) / k.sigma**k.dimension
    elif k.variant == "slow_decay_1d":
        az = np.abs(z[..., 0])
        out = np.where(az <= k.r_trunc, k.amplitude * (1.0 + az) ** (-k.alpha), 0.0)
    else:
        scale = k.g_mod.evaluate(y) * k.h_mod.evaluate(x)
        out = _base_density(k.family, z / scale[..., None], k.dimension, k.radius)
    return out if out.shape else float(out)


def kernel_matrix(k: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise kernel values K(X_i, Y_j), shape (len(X), len(Y))."""
    return eval_kernel(k, X[:, None, :], Y[None, :, :])


def second_moment(k: KernelSpec) -> float:
    """Second moment of the base density J (sigma-independent).

    Convolution families use the closed forms; the truncated slow-decay
    family integrates 2C z^2 (1+z)^-alpha over [0, r_trunc] in closed form.
    The scaled kernel J_sigma has second moment sigma^2 * D2.
    """
    if k.variant == "convolution":
        _, _, _, d21, d22 = _FAMILY[k.family]
        d2 = d21 if k.dimension == 1 else d22
        return d2 * k.radius**2
    if k.variant == "slow_decay_1d":
        return _slow_decay_moment(k.amplitude, k.alpha, k.r_trunc)
    raise ValueError("second_moment is defined for convolution and slow_decay kernels")


def _slow_decay_moment(C: float, alpha: float, R: float) -> float:
    # 2C * int_0^R z^2 (1+z)^-alpha dz with u = 1+z:
    # int_1^{1+R} (u^2 - 2u + 1) u^-alpha du, log branches at alpha in {1,2,3}
    def F(p: float, u: float) -> float:
        if abs(p + 1.0) < 1e-14:
            return np.log(u)
        return u ** (p + 1.0) / (p + 1.0)

    u1 = 1.0 + R
    val = (F(2.0 - alpha, u1) - F(2.0 - alpha, 1.0)
           - 2.0 * (F(1.0 - alpha, u1) - F(1.0 - alpha, 1.0))
           + F(-alpha, u1) - F(-alpha, 1.0))
    return 2.0 * C * val


def base_mass(k: KernelSpec) -> float:
    """Adaptive quadrature of the kernel over its support (unit-mass check).

    Integrates eval_kernel itself, so it cross-checks the normalization
    constants rather than restating them; sigma-invariant by construction.
    """
    if k.variant != "convolution":
        raise ValueError("base_mass applies to convolution kernels")
    if k.dimension == 1:
        lo = k.sigma * (k.drift - k.radius)
        hi = k.sigma * (k.drift + k.radius)
        val, _ = integrate.quad(lambda z: float(eval_kernel(k, z, 0.0)), lo, hi,
                                points=[k.sigma * k.drift], limit=200)
        return val
    val, _ = integrate.quad(
        lambda rho: float(eval_kernel(k, np.array([[rho, 0.0]]), np.zeros((1, 2)))[0])
        * 2.0 * np.pi * rho, 0.0, k.sigma * k.radius, limit=200)
    return val


def kernel_mass(k: KernelSpec, grid: Grid, x) -> float:
    """Grid quadrature of K(x, .) over the domain.

    Equals 1 up to quadrature error when the support of a convolution
    kernel lies inside the box; strictly less near the boundary (the
    Dirichlet-exterior convention loses the escaping mass).
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    vals = kernel_matrix(k, x, grid.nodes)[0]
    return float(vals @ grid.weights)


def nondegeneracy_witnesses(k: KernelSpec):
    """Constants (c0, C0, r0, r1) with C0*1_{B_r0} >= K >= c0*1_{B_r1}.

    r0 is the support radius in x - y distance, r1 <= r0 an inner radius on
    which the kernel is bounded below by c0 > 0.  Raises when no such
    witnesses exist (drift >= radius shifts the support off the origin).
    """
    if k.variant == "convolution":
        r = k.radius
        if abs(k.drift) >= r:
            raise ValueError("drift kernel support excludes the origin; no witnesses")
        r0 = k.support_radius()
        profile, c1, c2, _, _ = _FAMILY[k.family]
        c = (c1 if k.dimension == 1 else c2) / (r**k.dimension * k.sigma**k.dimension)
        C0 = c * 1.0  # profiles peak at 1
        r1b = (r - abs(k.drift)) / 2.0  # base units; farthest |u - drift| <= r1b + |drift|
        tmax = min((r1b + abs(k.drift)) / r, 1.0 - 2.0 * EDGE_SNAP)
        c0 = c * float(profile(np.asarray(tmax)))
        if k.family == "uniform":
            c0 = c  # flat profile
        return c0, C0, r0, k.sigma * r1b
    if k.variant == "slow_decay_1d":
        r0 = k.r_trunc
        r1 = min(1.0, k.r_trunc)
        return k.amplitude * (1.0 + r1) ** (-k.alpha), k.amplitude, r0, r1
    g = k.g_mod.values
    h = k.h_mod.values
    lo = float(np.min(g)) * float(np.min(h))
    hi = float(np.max(g)) * float(np.max(h))
    if lo <= 0:
        raise ValueError("general kernel modulations must be positive")
    profile, c1, c2, _, _ = _FAMILY[k.family]
    c = (c1 if k.dimension == 1 else c2) / k.radius**k.dimension
    r1b = k.radius * lo / 2.0
    c0 = c * float(profile(np.asarray(min(r1b / (k.radius * lo), 1.0 - 2 * EDGE_SNAP))))
    if k.family == "uniform":
        c0 = c
    return c0, c, k.radius * hi, r1b


def check_resolution(grid: Grid, k: KernelSpec, nper: int = 8) -> None:
    """Enforce the resolution-coupling rule h <= (kernel scale)/nper.

    Under-resolved kernels silently destroy the small-sigma diffusion
    limit, so this is a hard error at assembly time.
    """
    if k.variant == "convolution":
        scale = k.sigma * k.radius
    elif k.variant == "slow_decay_1d":
        scale = 1.0  # kernel varies on the unit decay scale near z = 0
    else:
        gh = float(np.min(k.g_mod.values)) * float(np.min(k.h_mod.values))
        scale = k.radius * gh
    if grid.h > scale / nper * (1.0 + 1e-12):
        raise ResolutionError(
            f"resolution rule violated: h={grid.h:g} > {scale:g}/{nper} "
            f"(need at least {2 * nper} nodes across the kernel diameter)")


# ---------------------------------------------------------------------------
# coefficient fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coefficient:
    """Zeroth-order field a(x): a symbolic family cached on grid nodes.

    nu is the max of the node values (an O(h^alpha_holder) stand-in for
    sup a, kept consistent with every other grid-level quantity).
    """

    family: str
    params: dict
    grid: Grid
    values: np.ndarray
    nu: float
    alpha_holder: float
    _fn: Optional[Callable] = field(default=None, repr=False, compare=False)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the family at points of shape (..., N); tabulated
        coefficients only resolve on their own grid nodes."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None] if self.grid.dimension == 1 else points[None, :]
        if self._fn is None:
            if points.shape == self.grid.nodes.shape and np.array_equal(points, self.grid.nodes):
                return self.values.copy()
            raise ValueError("tabulated coefficient can only be evaluated on its own grid")
        lead = points.shape[:-1]
        flat = points.reshape(-1, points.shape[-1])
        return np.asarray(self._fn(flat), dtype=float).reshape(lead)

    def on_grid(self, grid: Grid) -> "Coefficient":
        """Re-evaluate the same family on another grid."""
        if self._fn is None:
            raise ValueError("tabulated coefficient is tied to its grid")
        return make_coefficient(grid, self.family, **self.params)

    def rescaled(self, factor: float, grid: "Grid") -> "Coefficient":
        """Coefficient x -> a(x/factor) on the dilated grid."""
        if self._fn is None:
            raise ValueError("tabulated coefficient cannot be rescaled")
        base = self._fn

        def fn(pts, base=base, factor=factor):
            return base(np.asarray(pts, dtype=float) / factor)

        vals = np.asarray(fn(grid.nodes), dtype=float)
        return Coefficient(self.family, dict(self.params, _rescale=factor), grid,
                           _freeze(vals), float(vals.max()), self.alpha_holder, fn)


def _coeff_fn(family: str, dimension: int, p: dict) -> tuple:
    """Return (callable on (n,N) points, Holder exponent)."""
    if family == "constant":
        v = float(p.get("value", 0.0))
        return (lambda x: np.full(x.shape[0], v)), 1.0
    if family == "cosine_bump":
        amp = float(p.get("amplitude", 1.0))
        freq = float(p.get("frequency", 1.0))
        center = np.atleast_1d(np.asarray(p.get("center", 0.0), dtype=float))
        if center.size == 1 and dimension > 1:
            center = np.full(dimension, center[0])

        def fn(x, amp=amp, freq=freq, center=center):
            phases = np.cos(2.0 * np.pi * freq * (x - center[None, :]))
            return amp * np.prod(phases, axis=1)

        return fn, 1.0
    if family == "gaussian_bump":
        amp = float(p.get("amplitude", 1.0))
        width = float(p.get("width", 1.0))
        center = np.atleast_1d(np.asarray(p.get("center", 0.0), dtype=float))
        if center.size == 1 and dimension > 1:
            center = np.full(dimension, center[0])
        if width <= 0:
            raise ValueError("gaussian width must be positive")

        def fn(x, amp=amp, width=width, center=center):
            d2 = np.sum((x - center[None, :]) ** 2, axis=1)
            return amp * np.exp(-d2 / (2.0 * width**2))

        return fn, 1.0
    if family == "power_cusp":
        nu = float(p.get("nu", 1.0))
        beta = float(p.get("beta", 0.5))
        center = np.atleast_1d(np.asarray(p.get("center", 0.0), dtype=float))
        if center.size == 1 and dimension > 1:
            center = np.full(dimension, center[0])
        if beta <= 0:
            raise ValueError("cusp exponent beta must be positive")

        def fn(x, nu=nu, beta=beta, center=center):
            d = np.linalg.norm(x - center[None, :], axis=1)
            return nu - d**beta

        return fn, min(beta, 1.0)
    if family == "piecewise":
        xs = np.asarray(p["xs"], dtype=float)
        ys = np.asarray(p["ys"], dtype=float)
        if dimension != 1:
            raise ValueError("piecewise coefficients are 1-D")
        if xs.ndim != 1 or xs.size != ys.size or np.any(np.diff(xs) <= 0):
            raise ValueError("piecewise needs increasing xs matching ys")

        def fn(x, xs=xs, ys=ys):
            return np.interp(x[:, 0], xs, ys, left=0.0, right=0.0)

        return fn, 1.0
    raise ValueError(f"unknown coefficient family {family!r}")


def make_coefficient(grid: Grid, family: str, **params) -> Coefficient:
    """Build a coefficient field on a grid.

    Families: constant(value), cosine_bump(amplitude, frequency, center),
    gaussian_bump(amplitude, width, center), power_cusp(nu, beta, center),
    piecewise(xs, ys) (1-D linear interpolation, zero outside),
    tabulated(values).
    """
    if family == "tabulated":
        values = np.asarray(params["values"], dtype=float)
        if values.shape != (grid.n_nodes,):
            raise ValueError("tabulated values must match the grid node count")
        if not np.all(np.isfinite(values)):
            raise ValueError("coefficient values must be finite")
        return Coefficient("tabulated", {"values": values.tolist()}, grid,
                           _freeze(values), float(values.max()),
                           float(params.get("alpha_holder", 1.0)), None)
    fn, alpha = _coeff_fn(family, grid.dimension, params)
    values = np.asarray(fn(grid.nodes), dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("coefficient values must be finite")
    return Coefficient(family, dict(params), grid, _freeze(values),
                       float(values.max()), alpha, fn)
