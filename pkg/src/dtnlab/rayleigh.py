"""Boundary-layer test functions, Rayleigh quotients and asymptotic probes.

For a Steklov eigenpair ``(sigma_k, phi_k)`` and a boundary nodal arc
``A_l`` of ``phi_k`` the test function is

    u(x) = phi_k(x') exp(-sigma_k y) chi(y)

where ``y`` is the distance to the boundary, ``x'`` the nearest boundary
vertex (the foot), and ``chi`` a C^1 cutoff equal to 1 on ``[0, delta/2]``
and 0 beyond ``3 delta / 4``. Points whose foot lies outside ``A_l`` get 0.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .assembly import FormMatrices, boundary_forms
from .geometry import Mesh, boundary_distances
from .nodal import ZERO_TOL, boundary_nodal_arcs
from .spectra import Spectrum


class RayleighError(ValueError):
    pass


def cutoff(y, delta: float) -> np.ndarray:
    """The cubic ``chi``: 1 on ``[0, delta/2]``, 0 on ``[3 delta/4, inf)``, C^1 in between."""
    y = np.asarray(y, dtype=float)
    t = np.clip((y - 0.5 * delta) / (0.25 * delta), 0.0, 1.0)
    return 1.0 - 3.0 * t**2 + 2.0 * t**3


@dataclass(frozen=True, eq=False)
class TestFunction:
    __test__ = False  # keep pytest from collecting this class

    k: int
    ell: int
    coefficients: np.ndarray
    delta: float
    sigma: float
    rayleigh: float = float("nan")


@dataclass(frozen=True)
class WeylFit:
    slope: float
    intercept: float
    r_squared: float
    predicted_constant: float


@dataclass
class LemmaReport:
    epsilon: float
    delta: float
    rows: list[tuple[int, int, float]] = field(default_factory=list)  # (k, ell, ratio)
    N: int | None = None
    max_ratio: float = float("nan")
    minmax_ok: bool = True

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "ell", "ratio"])
        for k, ell, r in self.rows:
            w.writerow([k, ell, repr(r)])
        return buf.getvalue()


@dataclass
class BtildeReport:
    k: np.ndarray
    r: np.ndarray
    boundary_eigs: np.ndarray
    sigma: np.ndarray

    @property
    def max_r(self) -> float:
        return float(self.r.max())

    def max_upto(self, k_max: int) -> float:
        return float(self.r[self.k <= k_max].max())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "r_k"])
        for k, r in zip(self.k, self.r):
            w.writerow([int(k), repr(float(r))])
        return buf.getvalue()


class _Layer:
    """Distance to the boundary and foot position for every mesh vertex, computed once."""

    def __init__(self, mesh: Mesh):
        self.y, foot = boundary_distances(mesh, mesh.vertices)
        self.foot = mesh.boundary_position()[foot]
        b = mesh.boundary_vertices
        self.y[b] = 0.0
        self.foot[b] = np.arange(len(b))


_LAYERS: dict[int, tuple[Mesh, _Layer]] = {}


def _layer(mesh: Mesh) -> _Layer:
    hit = _LAYERS.get(id(mesh))
    if hit is None or hit[0] is not mesh:
        hit = (mesh, _Layer(mesh))
        _LAYERS.clear()
        _LAYERS[id(mesh)] = hit
    return hit[1]


def build_test_function(
    mesh: Mesh, phi_k, sigma_k: float, arc, delta: float, k: int = 0, ell: int = 0
) -> TestFunction:
    """``phi_k(foot) exp(-sigma_k y) chi(y)`` on the part of the layer whose foot lies in ``arc``.

    ``phi_k`` has one entry per boundary vertex; ``arc`` holds positions in
    ``mesh.boundary_vertices`` (as returned by
    :func:`dtnlab.nodal.boundary_nodal_arcs`).
    """
    if not sigma_k > 0:
        raise RayleighError(f"sigma_k = {sigma_k} is not positive; the extension would not decay")
    dom = mesh.domain
    if dom is not None and not delta < dom.inradius:
        raise RayleighError(f"delta = {delta} is not below the inradius {dom.inradius}")
    phi = np.asarray(phi_k, dtype=float)
    lay = _layer(mesh)
    in_arc = np.zeros(len(phi), dtype=bool)
    in_arc[np.asarray(arc, dtype=int)] = True
    keep = (lay.y < delta) & in_arc[lay.foot]
    u = np.zeros(mesh.n_vertices)
    y = lay.y[keep]
    u[keep] = phi[lay.foot[keep]] * np.exp(-sigma_k * y) * cutoff(y, delta)
    return TestFunction(k, ell, u, delta, float(sigma_k))


def rayleigh_quotient(fm: FormMatrices, u) -> float:
    """``u'(K + Mq)u / u'Bb u``."""
    u = u.coefficients if isinstance(u, TestFunction) else np.asarray(u, dtype=float)
    den = float(u @ (fm.Bb @ u))
    if not den > 0:
        raise RayleighError("test function has zero boundary trace")
    return float(u @ (fm.KMq @ u)) / den


def max_rayleigh_on_span(fm: FormMatrices, U: np.ndarray) -> float:
    """Largest Rayleigh quotient over the span of the columns of ``U``."""
    A = U.T @ (fm.KMq @ U)
    B = U.T @ (fm.Bb @ U)
    return float(la.eigh(0.5 * (A + A.T), 0.5 * (B + B.T), eigvals_only=True)[-1])


def layer_functions(fm: FormMatrices, spec: Spectrum, k: int, delta: float, zero_tol: float = ZERO_TOL):
    """All test functions of eigenpair ``k`` (one per boundary nodal arc)."""
    phi = spec.vectors[:, k - 1]
    sigma = float(spec.values[k - 1])
    arcs = boundary_nodal_arcs(fm.mesh, phi, zero_tol)
    out = []
    for ell, arc in enumerate(arcs, start=1):
        tf = build_test_function(fm.mesh, phi, sigma, arc, delta, k, ell)
        out.append(TestFunction(k, ell, tf.coefficients, delta, sigma, rayleigh_quotient(fm, tf)))
    return out


def supports_disjoint(mesh: Mesh, tfs) -> bool:
    """Whether the boundary supports of the test functions are pairwise disjoint (vertex-wise)."""
    b = mesh.boundary_vertices
    seen = np.zeros(len(b), dtype=bool)
    for tf in tfs:
        s = tf.coefficients[b] != 0
        if np.any(seen & s):
            return False
        seen |= s
    return True


def check_lemma(
    fm: FormMatrices,
    spec: Spectrum,
    epsilon: float,
    k_range: tuple[int, int],
    delta: float | None = None,
    zero_tol: float = ZERO_TOL,
    minmax_tol: float = 1e-8,
) -> LemmaReport:
    """Ratios ``R(u_{k,l}) / sigma_k`` for ``k`` in ``k_range`` (inclusive) and every arc ``l``.

    ``N`` is the smallest integer such that all ratios with ``k > N`` are
    at most ``1 + epsilon`` (``k_range[0] - 1`` if every k passes, ``None``
    if even the last one fails). Alongside, the min-max consequence
    ``sigma_{M_k} <= max R`` over the span of the test functions is checked.
    """
    k_lo, k_hi = k_range
    if k_hi > len(spec):
        raise RayleighError(f"spectrum holds {len(spec)} eigenpairs, k_range ends at {k_hi}")
    if delta is None:
        if fm.mesh.domain is None:
            raise RayleighError("delta is required when the mesh carries no domain")
        delta = 0.2 * fm.mesh.domain.inradius
    sig = spec.values[k_lo - 1 : k_hi]
    if np.any(sig <= 0):
        bad = k_lo + int(np.flatnonzero(sig <= 0)[0])
        raise RayleighError(f"sigma_{bad} = {spec.values[bad - 1]:.6g} is not positive")
    rep = LemmaReport(epsilon, delta)
    worst = {}
    for k in range(k_lo, k_hi + 1):
        tfs = layer_functions(fm, spec, k, delta, zero_tol)
        for tf in tfs:
            rep.rows.append((k, tf.ell, tf.rayleigh / tf.sigma))
        worst[k] = max(tf.rayleigh / tf.sigma for tf in tfs)
        m = len(tfs)
        if m <= len(spec):
            rho = max_rayleigh_on_span(fm, np.column_stack([tf.coefficients for tf in tfs]))
            if spec.values[m - 1] > rho + minmax_tol * (1 + abs(rho)):
                rep.minmax_ok = False
    rep.max_ratio = max(worst.values())
    N = k_lo - 1
    for k in range(k_hi, k_lo - 1, -1):
        if worst[k] > 1 + epsilon:
            N = k
            break
    rep.N = None if N == k_hi else N
    return rep


def boundary_laplacian_eigenvalues(mesh: Mesh, count: int | None = None) -> np.ndarray:
    S, B = boundary_forms(mesh)
    w = la.eigh(S, B, eigvals_only=True)
    return w if count is None else w[:count]


def btilde_probe(fm: FormMatrices, spec: Spectrum, k_max: int) -> BtildeReport:
    """``r_k = |lambda_k^bdry - sigma_k^2| / |1 + sigma_k|`` for ``k <= k_max``.

    Sorted boundary-Laplacian and Steklov spectra are paired index by index.
    """
    if k_max > len(spec):
        raise RayleighError(f"spectrum holds {len(spec)} eigenpairs, k_max = {k_max}")
    lb = boundary_laplacian_eigenvalues(fm.mesh, k_max)
    s = spec.values[:k_max]
    den = np.abs(1.0 + s)
    if np.any(den == 0):
        raise RayleighError("sigma_k = -1 makes (1 + D) singular")
    r = np.abs(lb - s**2) / den
    return BtildeReport(np.arange(1, k_max + 1), r, lb, s)


def weyl_fit(values, boundary_length: float) -> WeylFit:
    """Least-squares line through ``(k, sigma_k)`` over the top half of the indices."""
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n < 20:
        raise RayleighError(f"Weyl fit needs at least 20 eigenvalues, got {n}")
    k = np.arange(1, n + 1, dtype=float)
    sel = slice(n // 2, n)
    slope, intercept = np.polyfit(k[sel], v[sel], 1)
    pred = slope * k[sel] + intercept
    ss_res = float(((v[sel] - pred) ** 2).sum())
    ss_tot = float(((v[sel] - v[sel].mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return WeylFit(float(slope), float(intercept), r2, float(slope * boundary_length))
