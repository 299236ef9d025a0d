"""Steklov-Robin duality as an algorithm.

For fixed ``lam`` let ``d`` be the number of Dirichlet eigenvalues
``<= lam``. Each Robin branch ``sigma -> lambda_{q,j}(sigma)`` is
continuous and strictly decreasing, tends to the ``j``-th Dirichlet
eigenvalue as ``sigma -> -inf`` and to ``-inf`` as ``sigma -> +inf``.
Hence ``lambda_{q,k+d}(s) = lam`` has exactly one root ``s_k``, and
``s_k`` is the ``k``-th eigenvalue of the DtN map for ``Delta + q - lam``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .assembly import FormMatrices
from .spectra import dirichlet_values_upto, robin_spectrum, steklov_spectrum, tol_dirichlet


class DualityError(RuntimeError):
    pass


class MonotonicityError(DualityError):
    def __init__(self, k: int, sigma: float, jump: float):
        super().__init__(f"Robin branch {k} increases by {jump:.3e} at sigma={sigma:.6g}")
        self.k, self.sigma, self.jump = k, sigma, jump


@dataclass(frozen=True, eq=False)
class RobinCurve:
    sigma_grid: np.ndarray
    branches: np.ndarray  # shape (K_max, len(sigma_grid))
    q: str
    lam: float = 0.0
    violations: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return not self.violations

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sigma"] + [f"lambda_{k + 1}" for k in range(len(self.branches))])
        for i, s in enumerate(self.sigma_grid):
            w.writerow([repr(float(s))] + [repr(float(x)) for x in self.branches[:, i]])
        return buf.getvalue()


@dataclass(frozen=True)
class DualityCertificate:
    k: int
    d: int
    s_k: float
    residual: float
    sigma_k_direct: float
    mismatch: float
    bracket: tuple[float, float]
    iterations: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def count_d(fm: FormMatrices, lam: float = 0.0) -> int:
    """Number of discrete Dirichlet eigenvalues ``<= lam`` (up to ``tol_dirichlet``)."""
    return int(len(dirichlet_values_upto(fm, lam + tol_dirichlet(lam))))


def robin_branch(fm: FormMatrices, sigma: float, j: int) -> float:
    """``lambda_{q,j}(sigma)``, 1-based."""
    return float(robin_spectrum(fm, sigma, j).values[j - 1])


def trace_robin_curves(
    fm: FormMatrices,
    sigma_lo: float,
    sigma_hi: float,
    n_grid: int,
    K_max: int,
    lam: float = 0.0,
    tol: float = 1e-8,
    check: bool = True,
) -> RobinCurve:
    """Sample the first ``K_max`` Robin branches on a uniform sigma grid.

    A branch that increases by more than ``tol * (1 + |value|)`` between
    consecutive grid points is a violation; with ``check`` the first one
    raises :class:`MonotonicityError`.
    """
    if not sigma_lo < sigma_hi:
        raise ValueError("need sigma_lo < sigma_hi")
    if n_grid < 2:
        raise ValueError("need at least two grid points")
    grid = np.linspace(sigma_lo, sigma_hi, n_grid)
    branches = np.empty((K_max, n_grid))
    for i, s in enumerate(grid):
        branches[:, i] = robin_spectrum(fm, s, K_max).values
    jumps = np.diff(branches, axis=1)
    scale = 1.0 + np.abs(branches[:, 1:])
    bad = np.argwhere(jumps > tol * scale)
    violations = [(int(k) + 1, float(grid[i + 1]), float(jumps[k, i])) for k, i in bad]
    if check and violations:
        raise MonotonicityError(*violations[0])
    qdesc = "constant" if fm.q_constant is None else f"constant({fm.q_constant:g})"
    return RobinCurve(grid, branches, qdesc, lam, violations)


def solve_s_k(
    fm: FormMatrices,
    lam: float,
    k: int,
    d: int | None = None,
    bracket: tuple[float, float] = (-10.0, 10.0),
    max_expand: int = 40,
    max_iter: int = 60,
    direct: np.ndarray | None = None,
) -> DualityCertificate:
    """Root ``s_k`` of ``lambda_{q,k+d}(sigma) = lam`` by bracketing and bisection.

    ``direct`` may hold precomputed Steklov eigenvalues for the comparison;
    otherwise they are computed here on the same matrices.
    """
    if k < 1:
        raise ValueError("k starts at 1")
    d = count_d(fm, lam) if d is None else d
    j = k + d
    tol = 1e-6 * (1.0 + abs(lam))

    def g(s):
        return robin_branch(fm, s, j) - lam

    lo, hi = bracket
    g_lo, g_hi = g(lo), g(hi)
    expansions = 0
    while not (g_lo > 0 > g_hi):
        if expansions >= max_expand:
            raise DualityError(
                f"no sign change of lambda_(k+d)(sigma) - lam on [{lo:g}, {hi:g}] "
                f"after {expansions} expansions (k={k}, d={d})"
            )
        width = hi - lo
        if g_lo <= 0:
            hi, g_hi = lo, g_lo
            lo = lo - width
            g_lo = g(lo)
        if g_hi >= 0:
            lo, g_lo = hi, g_hi
            hi = hi + width
            g_hi = g(hi)
        expansions += 1
    bracket_found = (lo, hi)

    it = 0
    mid, g_mid = lo, g_lo
    while it < max_iter:
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        it += 1
        if abs(g_mid) <= tol:
            break
        if g_mid > 0:
            lo = mid
        else:
            hi = mid
    if direct is None:
        direct = steklov_spectrum(fm, lam, count=k).values
    sigma_k = float(direct[k - 1])
    return DualityCertificate(
        k=k,
        d=d,
        s_k=float(mid),
        residual=float(abs(g_mid)),
        sigma_k_direct=sigma_k,
        mismatch=float(abs(mid - sigma_k)),
        bracket=bracket_found,
        iterations=it,
    )


def robin_multiplicity(fm: FormMatrices, sigma: float, lam: float, tol: float, count: int) -> int:
    """How many of the first ``count`` Robin eigenvalues at ``sigma`` equal ``lam`` within ``tol``."""
    vals = robin_spectrum(fm, sigma, count).values
    return int(np.sum(np.abs(vals - lam) <= tol))
