"""Runnable studies: scaling sweeps, limits, exhaustion, convergence checks.

Each driver wires the assembly and spectral layers into one experiment and
returns plain records; nothing here writes files (that is cli_io's job).
Records carry their certificates (ratio-sandwich and mass-envelope bounds)
and every record is checked against them at creation time, so a sweep
that completes is also a sweep whose invariants held.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .assembly import DiscreteOperator, assemble, assemble_scaled
from .grid_kernel import Coefficient, Grid, KernelSpec, build_grid, nested_box_family
from .local_ref import diffusivity, dirichlet_lambda1
from .spectral import bounds_iv, lambda_v_min, principal_eig

__all__ = ["SweepRecord", "LimitEstimate", "ExhaustionResult", "InvariantViolation",
           "sigma_sweep", "limit_estimate", "domain_exhaustion",
           "scaling_invariance_suite", "eigfn_convergence", "m0_monotonicity",
           "growth_rate", "grid_for_sigma"]

IV_SLACK = 1e-12


class InvariantViolation(AssertionError):
    """A certified bound failed to bracket the computed eigenvalue."""


@dataclass(frozen=True)
class SweepRecord:
    """One sampled point of the map sigma -> lambda_p with certificates."""

    sigma: float
    m: float
    lambda_p: float
    lambda_v: float
    cw_lower: float
    cw_upper: float
    iv_lo: float
    iv_hi: float
    n_nodes: int
    h: float
    wall_time_ms: float
    existence_verdict: str
    error: str = ""

    def check(self) -> None:
        if self.error:
            return
        if not (self.cw_lower - IV_SLACK <= self.lambda_p <= self.cw_upper + IV_SLACK):
            raise InvariantViolation(
                f"sigma={self.sigma}: ratio sandwich [{self.cw_lower}, {self.cw_upper}] "
                f"misses lambda_p={self.lambda_p}")
        if not (self.iv_lo - IV_SLACK <= self.lambda_p <= self.iv_hi + IV_SLACK):
            raise InvariantViolation(
                f"sigma={self.sigma}: envelope [{self.iv_lo}, {self.iv_hi}] "
                f"misses lambda_p={self.lambda_p}")


@dataclass(frozen=True)
class LimitEstimate:
    """Richardson-extrapolated limit of a sweep tail against a declared target."""

    extrapolated: float
    tail: tuple
    target_name: str
    target_value: float
    gap: float
    order: int
    non_monotone: bool = False


@dataclass(frozen=True)
class ExhaustionResult:
    half_widths: tuple
    n_nodes: tuple
    lambda_p: tuple
    monotone: bool
    stagnation_index: Optional[int]   # first level from which successive changes stay small
    stagnation_tol: float


def grid_for_sigma(bounds, sigma: float, radius: float, nper: int = 16) -> Grid:
    """Midpoint grid resolving the kernel: h <= sigma*radius/nper per axis."""
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    target = sigma * radius / nper
    res = [max(2, int(math.ceil((hi - lo) / target))) for lo, hi in bounds]
    # square cells: force the finest axis resolution everywhere
    n = max(res)
    lengths = [hi - lo for lo, hi in bounds]
    res = [int(round(n * L / max(lengths))) for L in lengths]
    return build_grid(bounds, res)


def _fixed_grid(bounds, h: float) -> Grid:
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    res = []
    for lo, hi in bounds:
        n = (hi - lo) / h
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"h={h} does not divide the box [{lo}, {hi}]")
        res.append(int(round(n)))
    return build_grid(bounds, res)


def _one_sweep_record(kernel: KernelSpec, a: Coefficient, bounds, m: float, s: float,
                      resolution_rule: str, fixed_h, nper: int, tol: float,
                      max_iter, variant: str, compute_lambda_v: bool) -> SweepRecord:
    t0 = time.perf_counter()
    try:
        k = kernel.with_sigma(s)
        if resolution_rule == "per_sigma":
            grid = grid_for_sigma(bounds, s, k.radius, nper)
        elif resolution_rule == "fixed":
            if fixed_h is None:
                raise ValueError("fixed resolution rule needs fixed_h")
            grid = _fixed_grid(bounds, fixed_h)
        else:
            raise ValueError(f"unknown resolution rule {resolution_rule!r}")
        a_g = a.on_grid(grid)
        k = replace(k, m=float(m))
        op = assemble(grid, k, a_g, variant)
        res = principal_eig(op, tol=tol, max_iter=max_iter)
        if compute_lambda_v and op.symmetric:
            lam_v, _ = lambda_v_min(op, tol=tol)
        else:
            lam_v = float("nan")
        lo, hi = bounds_iv(op)
        rec = SweepRecord(
            sigma=s, m=float(m), lambda_p=res.lambda_p, lambda_v=lam_v,
            cw_lower=res.cw_lower, cw_upper=res.cw_upper, iv_lo=lo, iv_hi=hi,
            n_nodes=grid.n_nodes, h=grid.h,
            wall_time_ms=1e3 * (time.perf_counter() - t0),
            existence_verdict=res.existence_verdict)
        rec.check()
        return rec
    except InvariantViolation:
        raise
    except Exception as exc:  # record the failure, keep sweeping
        return SweepRecord(s, float(m), math.nan, math.nan, math.nan, math.nan,
                           math.nan, math.nan, 0, math.nan,
                           1e3 * (time.perf_counter() - t0), "", error=str(exc))


def sigma_sweep(kernel: KernelSpec, a: Coefficient, bounds, m: float,
                sigma_list: Sequence[float], resolution_rule: str = "per_sigma",
                fixed_h: Optional[float] = None, nper: int = 16,
                tol: float = 1e-10, max_iter: Optional[int] = None,
                variant: str = "M_plus_a", compute_lambda_v: bool = True,
                threads: int = 1) -> list:
    """Sample sigma -> lambda_p for the dispersal operator.

    resolution_rule 'per_sigma' rebuilds the grid with h <= sigma*r/nper
    (needed for small-sigma limits); 'fixed' keeps one spacing fixed_h
    (needed for large-sigma limits).  Per-record errors are captured in
    the record instead of aborting the sweep.  Records are independent;
    threads > 1 computes them in a pool, output stays ordered by sigma.
    """
    sigmas = sorted(float(s) for s in sigma_list)
    args = [(kernel, a, bounds, m, s, resolution_rule, fixed_h, nper, tol,
             max_iter, variant, compute_lambda_v) for s in sigmas]
    if threads > 1 and len(sigmas) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda t: _one_sweep_record(*t), args))
    else:
        records = [_one_sweep_record(*t) for t in args]
    return records


def limit_estimate(records: Sequence[SweepRecord], target_name: str,
                   target_value: float, order: int = 1,
                   direction: str = "sigma_to_0") -> LimitEstimate:
    """Richardson extrapolation of the sweep tail toward a declared target.

    Assumes the declared error order p in sigma (direction 'sigma_to_0')
    or in 1/sigma (direction 'sigma_to_inf') and removes the leading term
    from the two tail records.  A non-monotone tail is flagged and the
    last raw value reported instead.
    """
    good = [r for r in records if not r.error]
    if len(good) < 3:
        raise ValueError("limit_estimate needs at least 3 successful records")
    if order not in (1, 2):
        raise ValueError("extrapolation order must be 1 or 2")
    good = sorted(good, key=lambda r: r.sigma)
    if direction == "sigma_to_0":
        tail = good[:3]
        r1, r2 = tail[1], tail[0]          # sigma1 > sigma2: finest last
        t1, t2 = r1.sigma, r2.sigma
        tail_vals = tuple(r.lambda_p for r in tail)
    elif direction == "sigma_to_inf":
        tail = good[-3:]
        r1, r2 = tail[-2], tail[-1]        # largest sigma last
        t1, t2 = 1.0 / r1.sigma, 1.0 / r2.sigma
        tail_vals = tuple(r.lambda_p for r in tail)
    else:
        raise ValueError(f"unknown direction {direction!r}")

    diffs = np.diff([r.lambda_p for r in tail])
    non_monotone = not (np.all(diffs <= 1e-13) or np.all(diffs >= -1e-13))
    if non_monotone:
        extrap = r2.lambda_p
    else:
        v1, v2 = r1.lambda_p, r2.lambda_p
        # correction form: exact for constant sequences
        extrap = v2 + (v2 - v1) * t2**order / (t1**order - t2**order)
    return LimitEstimate(float(extrap), tail_vals, target_name, float(target_value),
                         abs(float(extrap) - float(target_value)), order, non_monotone)


def domain_exhaustion(kernel: KernelSpec, a: Coefficient, half_widths: Sequence[float],
                      h: float, tol: float = 1e-13, stagnation_tol: float = 1e-8,
                      max_iter: Optional[int] = None) -> ExhaustionResult:
    """lambda_p along a node-nested family of boxes [-L, L]^N.

    With a fixed lattice spacing the smaller box's matrix is a principal
    submatrix of the larger one's, so the sequence is nonincreasing
    exactly; the result records where it stagnates (successive change
    below stagnation_tol from that level on).
    """
    grids = nested_box_family(half_widths, h, kernel.dimension)
    lams = []
    ns = []
    for g in grids:
        a_g = a.on_grid(g)
        op = assemble(g, kernel, a_g, "L_plus_a")
        res = principal_eig(op, tol=tol, max_iter=max_iter)
        lams.append(res.lambda_p)
        ns.append(g.n_nodes)
    diffs = np.diff(lams)
    monotone = bool(np.all(diffs <= IV_SLACK))
    stag = None
    for i in range(len(lams) - 1):
        if np.all(np.abs(diffs[i:]) < stagnation_tol):
            stag = i
            break
    return ExhaustionResult(tuple(float(L) for L in half_widths), tuple(ns),
                            tuple(lams), monotone, stag, stagnation_tol)


def scaling_invariance_suite(op: DiscreteOperator, sigma_s_list: Sequence[float],
                             tol: float = 1e-12) -> float:
    """Worst-case |lambda_p(original) - lambda_p(dilated)| over the scale list.

    The dilated operator's matrix equals the original entrywise (kernel
    prefactor against quadrature weights), so the discrepancy is solver
    noise; the contract is <= 1e-11.
    """
    base = principal_eig(op, tol=tol)
    worst = 0.0
    for s in sigma_s_list:
        scaled = assemble_scaled(op, float(s))
        res = principal_eig(scaled, tol=tol)
        worst = max(worst, abs(res.lambda_p - base.lambda_p))
    return worst


def eigfn_convergence(kernel: KernelSpec, a: Coefficient, bounds,
                      sigma_list: Sequence[float], interior_margin: float = 0.1,
                      nper: int = 16, tol: float = 1e-10,
                      max_iter: Optional[int] = None) -> list:
    """Interior L2 distance between the dispersal eigenvector and the
    local reference eigenfunction, per sigma (budget exponent m = 2).

    Both vectors are unit weighted-l2 normalized with positive sign; the
    local eigenfunction is computed on the same grid, so no interpolation
    enters.  A boundary-case verdict aborts that record (the eigenpair is
    only guaranteed for small enough sigma).
    """
    out = []
    for s in sorted((float(s) for s in sigma_list), reverse=True):
        k = kernel.with_sigma(s)
        k = replace(k, m=2.0)
        grid = grid_for_sigma(bounds, s, k.radius, nper)
        a_g = a.on_grid(grid)
        op = assemble(grid, k, a_g, "M_plus_a")
        res = principal_eig(op, tol=tol, max_iter=max_iter)
        if res.existence_verdict != "eigenpair":
            out.append({"sigma": s, "distance": math.nan, "lambda_p": res.lambda_p,
                        "lambda_1": math.nan, "aborted": True})
            continue
        local = dirichlet_lambda1(grid, diffusivity(k), a_g)
        mask = grid.interior_mask(interior_margin)
        w = grid.weights
        d = math.sqrt(float(np.sum(w[mask] * (res.eigvec[mask] - local.phi_1[mask]) ** 2)))
        out.append({"sigma": s, "distance": d, "lambda_p": res.lambda_p,
                    "lambda_1": local.lambda_1, "aborted": False})
    return out


def m0_monotonicity(kernel: KernelSpec, a: Coefficient, half_widths: Sequence[float],
                    h: float, sigma_list: Sequence[float], mono_tol: float = 1e-6,
                    stagnation_tol: float = 1e-8, tol: float = 1e-11) -> dict:
    """Monotonicity of sigma -> lambda_p at budget exponent m = 0.

    Valid on (a discrete stand-in for) the whole space with a radially
    nonincreasing symmetric coefficient; the box family must stagnate
    (boundary effects below stagnation_tol) before the verdict counts.
    Returns verdict 'monotone', 'violated', or 'inconclusive'.
    """
    sigmas = sorted(float(s) for s in sigma_list)
    k_big = kernel.with_sigma(sigmas[-1])
    exh = domain_exhaustion(k_big, a, half_widths, h, stagnation_tol=stagnation_tol)
    if exh.stagnation_index is None:
        return {"verdict": "inconclusive", "lambda_p": (), "sigmas": tuple(sigmas),
                "exhaustion": exh}
    grid = nested_box_family(half_widths, h, kernel.dimension)[-1]
    a_g = a.on_grid(grid)
    lams = []
    for s in sigmas:
        k = replace(kernel.with_sigma(s), m=0.0)
        op = assemble(grid, k, a_g, "M_plus_a")
        lams.append(principal_eig(op, tol=tol).lambda_p)
    ok = all(lams[i] <= lams[i + 1] + mono_tol for i in range(len(lams) - 1))
    return {"verdict": "monotone" if ok else "violated",
            "lambda_p": tuple(lams), "sigmas": tuple(sigmas), "exhaustion": exh}


def growth_rate(op: DiscreteOperator, T: float, dt: float, u0: np.ndarray) -> float:
    """Exponential growth rate of ||u(t)|| for u' = A u by explicit Euler.

    The state is renormalized every step (the rate accumulates from the
    log of the normalization factors, so no overflow), and the rate is the
    least-squares slope of the accumulated log-norm over the last half of
    [0, T].  Matches the negative of lambda_p when u0 overlaps the
    principal direction, which any nonnegative nonzero u0 does.
    """
    A = op.matrix
    norm_inf = float(np.max(np.abs(A).sum(axis=1)))
    if dt <= 0 or dt > 0.25 / norm_inf:
        raise ValueError(f"dt must lie in (0, 0.25/||A||_inf] = (0, {0.25 / norm_inf:g}]")
    u = np.asarray(u0, dtype=float).copy()
    if u.shape != (op.n,) or np.any(u < 0) or not np.any(u > 0):
        raise ValueError("u0 must be a nonnegative, nonzero vector of matching size")
    nrm = np.linalg.norm(u)
    u /= nrm
    steps = int(round(T / dt))
    if steps < 8:
        raise ValueError("T/dt too small to fit a rate")
    log_norm = 0.0
    ts = np.empty(steps + 1)
    logs = np.empty(steps + 1)
    ts[0], logs[0] = 0.0, 0.0
    for k in range(1, steps + 1):
        u = u + dt * (A @ u)
        nrm = np.linalg.norm(u)
        u /= nrm
        log_norm += math.log(nrm)
        ts[k] = k * dt
        logs[k] = log_norm
    half = steps // 2
    slope = np.polyfit(ts[half:], logs[half:], 1)[0]
    return float(slope)
