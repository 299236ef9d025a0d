"""Nodal-domain counts of interior eigenfunctions and of their boundary traces.

Vertices are tagged ``+``, ``-`` or ``0`` (``|u_v| <= zero_tol * max|u|``).
Interior domains are connected components of the graph on nonzero
vertices whose edges join vertices of equal sign. Boundary domains are
maximal runs of equal sign along each (cyclic) boundary loop; zero-tagged
vertices belong to no domain and separate runs.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .assembly import FormMatrices
from .duality import count_d
from .geometry import Mesh
from .spectra import Spectrum, steklov_spectrum

ZERO_TOL = 1e-8


class NodalError(ValueError):
    pass


@dataclass(frozen=True)
class NodalReport:
    k: int
    N_k: int
    M_k: int
    d: int
    theorem1_ok: bool
    ratio: float
    sigma_k: float = float("nan")


def _signs(u: np.ndarray, zero_tol: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    scale = np.abs(u).max() if len(u) else 0.0
    if not scale > 0:
        raise NodalError("eigenfunction vanishes identically")
    s = np.sign(u).astype(int)
    s[np.abs(u) <= zero_tol * scale] = 0
    return s


def count_interior_nodal(mesh: Mesh, u, zero_tol: float = ZERO_TOL) -> int:
    """Number of nodal domains of the P1 function with vertex values ``u``."""
    s = _signs(u, zero_tol)
    e = mesh.edges
    same = (s[e[:, 0]] == s[e[:, 1]]) & (s[e[:, 0]] != 0)
    e = e[same]
    n = mesh.n_vertices
    g = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    return int(len(np.unique(labels[s != 0])))


def _loop_arcs(s: np.ndarray) -> list[np.ndarray]:
    """Maximal cyclic runs of equal nonzero sign; positions into the loop."""
    n = len(s)
    if n == 0 or not np.any(s):
        return []
    if np.all(s == s[0]):
        return [np.arange(n)]
    # start right after a run boundary so no run wraps around
    change = np.flatnonzero(s != np.roll(s, 1))
    start = int(change[0])
    order = (np.arange(n) + start) % n
    arcs, cur = [], []
    prev = None
    for p in order:
        if s[p] != prev:
            if cur and prev != 0:
                arcs.append(np.array(cur))
            cur = []
            prev = s[p]
        cur.append(p)
    if cur and prev != 0:
        arcs.append(np.array(cur))
    return arcs


def boundary_nodal_arcs(mesh: Mesh, phi, zero_tol: float = ZERO_TOL) -> list[np.ndarray]:
    """Boundary nodal domains of ``phi`` as arrays of positions in ``mesh.boundary_vertices``."""
    s = _signs(phi, zero_tol)
    if len(s) != len(mesh.boundary_vertices):
        raise NodalError("phi must have one value per boundary vertex")
    arcs = []
    for sl in mesh.loop_slices():
        arcs += [a + sl.start for a in _loop_arcs(s[sl])]
    return arcs


def count_boundary_nodal(mesh: Mesh, phi, zero_tol: float = ZERO_TOL) -> int:
    return len(boundary_nodal_arcs(mesh, phi, zero_tol))


def count_cyclic_nodal(values, zero_tol: float = ZERO_TOL) -> int:
    """Sign arcs of values sampled around a single closed curve."""
    return len(_loop_arcs(_signs(values, zero_tol)))


def nodal_reports(fm: FormMatrices, spec: Spectrum, d: int, zero_tol: float = ZERO_TOL) -> list[NodalReport]:
    """One report per Steklov eigenpair held in ``spec``."""
    if spec.kind != "steklov" or spec.extensions is None:
        raise NodalError("nodal reports need a Steklov spectrum with interior extensions")
    out = []
    for j in range(len(spec)):
        k = j + 1
        N = count_interior_nodal(fm.mesh, spec.extensions[:, j], zero_tol)
        M = count_boundary_nodal(fm.mesh, spec.vectors[:, j], zero_tol)
        out.append(NodalReport(k, N, M, d, N <= k + d, M / k, float(spec.values[j])))
    return out


def nodal_sweep(fm: FormMatrices, k_max: int, lam: float = 0.0, zero_tol: float = ZERO_TOL) -> list[NodalReport]:
    """Counts ``N_k``, ``M_k`` and the verdict ``N_k <= k + d`` for ``k = 1..k_max``."""
    d = count_d(fm, lam)
    spec = steklov_spectrum(fm, lam, count=k_max)
    return nodal_reports(fm, spec, d, zero_tol)


def tail_max_ratio(reports: list[NodalReport]) -> np.ndarray:
    """``max_{j >= k} M_j / j`` for each report; a finite-range stand-in for the limsup."""
    r = np.array([rep.ratio for rep in reports])
    return np.maximum.accumulate(r[::-1])[::-1]


def reports_to_csv(reports: list[NodalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "N_k", "M_k", "d", "bound_ok", "ratio"])
    for r in reports:
        w.writerow([r.k, r.N_k, r.M_k, r.d, str(r.theorem1_ok).lower(), repr(r.ratio)])
    return buf.getvalue()


def report_dict(r: NodalReport) -> dict:
    return asdict(r)
