"""Dirichlet, Robin and Steklov (Dirichlet-to-Neumann) eigenproblems.

With ``A = K + Mq - lam*M`` split into interior (i) and boundary (b)
blocks, the discrete DtN matrix is the Schur complement

    S = A_bb - A_bi A_ii^{-1} A_ib

and the Steklov eigenproblem is ``S phi = sigma Bb_bb phi``. When ``lam``
sits on the discrete Dirichlet spectrum, ``A_ii`` is singular; the
problem is then posed on the subspace of boundary vectors orthogonal to
the normal-derivative traces ``A_bi w`` of the Dirichlet kernel vectors
``w``, where the Schur complement is still well defined.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .assembly import FormMatrices
from .linalg import DENSE_LIMIT, smallest_eigenpairs, start_vector, trace_bound_shift

# boundary sizes up to this use the explicit Schur complement
SCHUR_DENSE_LIMIT = 1200
_CHUNK = 128


class SpectrumError(ValueError):
    pass


class DirichletResonanceError(SpectrumError):
    """``lam`` coincides with a discrete Dirichlet eigenvalue and deflation is off."""


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues (ascending) with eigenvectors stored column-wise.

    Rows of ``vectors`` correspond to mesh vertices ``index``: interior
    vertices for ``dirichlet``, all vertices for ``robin``, boundary
    vertices for ``steklov``. Steklov spectra also carry the interior
    extensions on the whole mesh in ``extensions``.
    """

    kind: str
    parameter: float | None
    values: np.ndarray
    vectors: np.ndarray
    index: np.ndarray
    extensions: np.ndarray | None = None
    deflated: int = 0

    def __len__(self) -> int:
        return len(self.values)

    def to_dict(self, include_vectors: bool = False) -> dict:
        out = {"kind": self.kind, "parameter": self.parameter, "values": self.values.tolist()}
        if self.kind == "steklov":
            out["deflated"] = self.deflated
        if include_vectors:
            out["vectors"] = self.vectors.T.tolist()
        return out

    def to_json(self, include_vectors: bool = False) -> str:
        return json.dumps(self.to_dict(include_vectors), indent=2)


def tol_dirichlet(lam: float) -> float:
    return 1e-6 * (1.0 + abs(lam))


def _block(A, rows, cols):
    return A[rows][:, cols]


def dirichlet_spectrum(fm: FormMatrices, count: int) -> Spectrum:
    """Smallest ``count`` eigenvalues of ``(K + Mq, M)`` with the boundary rows removed."""
    I = fm.mesh.interior_vertices
    if not 1 <= count <= len(I):
        raise SpectrumError(f"count={count} but the mesh has {len(I)} interior vertices")
    A = _block(fm.KMq, I, I)
    B = _block(fm.M, I, I)
    w, v = smallest_eigenpairs(A, B, count, lower_bound=fm.q_min - 1.0)
    return Spectrum("dirichlet", None, w, v, I)


def dirichlet_values_upto(fm: FormMatrices, bound: float) -> np.ndarray:
    """All discrete Dirichlet eigenvalues ``<= bound``."""
    I = fm.mesh.interior_vertices
    if len(I) == 0:
        return np.empty(0)
    A = _block(fm.KMq, I, I)
    B = _block(fm.M, I, I)
    if len(I) <= DENSE_LIMIT:
        if bound < fm.q_min:
            return np.empty(0)
        return la.eigh(A.toarray(), B.toarray(), eigvals_only=True, subset_by_value=(-np.inf, bound))
    k = 8
    while True:
        k = min(k, len(I) - 2)
        w = np.sort(sla.eigsh(A.tocsc(), k=k, M=B.tocsc(), sigma=fm.q_min - 1.0, which="LM",
                              return_eigenvectors=False, tol=1e-12, v0=start_vector(len(I))))
        if w[-1] > bound or k >= len(I) - 2:
            return w[w <= bound]
        k *= 2


def robin_spectrum(fm: FormMatrices, sigma: float, count: int) -> Spectrum:
    """Smallest ``count`` eigenvalues of the Robin pencil ``(K + Mq - sigma*Bb, M)``."""
    n = fm.mesh.n_vertices
    if not 1 <= count <= n:
        raise SpectrumError(f"count={count} but the mesh has {n} vertices")
    A = (fm.KMq - sigma * fm.Bb).tocsr()
    lb = None
    if n > DENSE_LIMIT:
        lb = trace_bound_shift(fm.K, fm.M, fm.Bb, fm.q_min, sigma, cache=fm.cache.setdefault("trace", {}))
    w, v = smallest_eigenpairs(A, fm.M, count, lower_bound=lb)
    return Spectrum("robin", float(sigma), w, v, np.arange(n))


# ---------------------------------------------------------------- Steklov


class _InteriorSolver:
    """Solves ``A_ii x = r``; on the resonant path only for ``r`` orthogonal to the kernel.

    In the resonant case ``A_ii`` is (nearly) singular. The solver then
    factors the shifted matrix ``A_ii + tau*M_ii`` and runs a projected
    refinement, which converges like ``(tau / gap)^k`` on the complement
    of the kernel and never excites the kernel itself.
    """

    def __init__(self, Aii, Mii, kernel: np.ndarray | None, lu, tau: float = 0.0):
        self.Aii, self.Mii, self.W, self.lu, self.tau = Aii, Mii, kernel, lu, tau

    def _project(self, x):
        if self.W is None:
            return x
        return x - self.W @ (self.W.T @ (self.Mii @ x))

    def solve(self, r: np.ndarray) -> np.ndarray:
        if self.W is None:
            return self.lu.solve(r)
        x = self._project(self.lu.solve(r))
        for _ in range(8):
            res = r - self.Aii @ x
            if np.linalg.norm(res) <= 1e-14 * max(np.linalg.norm(r), 1e-300):
                break
            x = x + self._project(self.lu.solve(res))
        return x


def _near_zero_dirichlet(Aii, Mii, lu, tol: float, shift: float = 0.0):
    """Eigenpairs of ``(A_ii, M_ii)`` with ``|value| <= tol``.

    ``lu`` must factor ``A_ii - shift*M_ii``; it drives the shift-invert search.
    """
    n = Aii.shape[0]
    if n <= 64:
        w, v = la.eigh(Aii.toarray(), Mii.toarray())
    else:
        op = sla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
        k = min(6, n - 2)
        w, v = sla.eigsh(Aii, k=k, M=Mii, sigma=shift, OPinv=op, which="LM", tol=1e-12, v0=start_vector(n))
    keep = np.abs(w) <= tol
    return w[keep], v[:, keep]


def _factor(A):
    try:
        return sla.splu(sp.csc_matrix(A))
    except RuntimeError:
        return None


def _schur_dense(Abb, Aib, solver: _InteriorSolver, Z: np.ndarray | None = None) -> np.ndarray:
    nb = Abb.shape[0]
    Z = np.eye(nb) if Z is None else Z
    S = np.empty((Z.shape[1], Z.shape[1]))
    AbbZ = Abb @ Z
    for s in range(0, Z.shape[1], _CHUNK):
        cols = slice(s, s + _CHUNK)
        X = solver.solve(Aib @ Z[:, cols])
        S[:, cols] = Z.T @ (AbbZ[:, cols] - Aib.T @ X)
    return 0.5 * (S + S.T)


def steklov_spectrum(
    fm: FormMatrices,
    lam: float = 0.0,
    count: int | None = None,
    deflate: bool = True,
    method: str = "auto",
) -> Spectrum:
    """Discrete Dirichlet-to-Neumann spectrum for ``Delta + q - lam``.

    ``method`` is ``"dense"`` (explicit Schur complement, all eigenvalues
    available), ``"lanczos"`` (Schur complement applied implicitly, the
    ``count`` smallest only) or ``"auto"``.
    """
    mesh = fm.mesh
    I, B = mesh.interior_vertices, mesh.boundary_vertices
    nb = len(B)
    count = nb if count is None else count
    if not 1 <= count <= nb:
        raise SpectrumError(f"count={count} but the mesh has {nb} boundary vertices")
    A = (fm.KMq - lam * fm.M).tocsr() if lam != 0.0 else fm.KMq
    Aii = _block(A, I, I).tocsc()
    Aib = _block(A, I, B).tocsc()
    Abb = _block(A, B, B).toarray()
    Mii = _block(fm.M, I, I).tocsc()
    Bbb = _block(fm.Bb, B, B)
    tol = tol_dirichlet(lam)

    lu = _factor(Aii)
    resonant = lu is None or len(_near_zero_dirichlet(Aii, Mii, lu, tol)[0]) > 0
    kernel = None
    tau = 0.0
    if resonant:
        if not deflate:
            raise DirichletResonanceError(
                f"lambda={lam} is a discrete Dirichlet eigenvalue (tolerance {tol:.2e}); "
                "enable deflation to use the K(lambda)-orthogonal formulation"
            )
        tau = 1e-4 * (1.0 + abs(lam))
        lu = _factor(Aii + tau * Mii)
        if lu is None:
            raise SpectrumError("shifted interior factorisation failed")
        _, kernel = _near_zero_dirichlet(Aii, Mii, lu, tol, shift=-tau)
        if kernel.shape[1] == 0:
            raise SpectrumError("interior block is singular but no Dirichlet kernel was found")
    solver = _InteriorSolver(Aii, Mii, kernel, lu, tau)

    if method == "auto":
        method = "dense" if (nb <= SCHUR_DENSE_LIMIT or kernel is not None or count > nb // 3) else "lanczos"

    if kernel is not None:
        T = Aib.T @ kernel  # discrete normal-derivative traces, one column per kernel vector
        Z = la.null_space(T.T)
        S = _schur_dense(Abb, Aib, solver, Z)
        vals, C = la.eigh(S, Z.T @ (Bbb @ Z))
        phis = Z @ C
        deflated = kernel.shape[1]
        count = min(count, len(vals))
    elif method == "dense":
        S = _schur_dense(Abb, Aib, solver)
        vals, phis = la.eigh(S, Bbb.toarray())
        deflated = 0
    elif method == "lanczos":
        def matvec(x):
            x = np.ravel(x)
            return Abb @ x - Aib.T @ solver.solve(Aib @ x)

        S_op = sla.LinearOperator((nb, nb), matvec=matvec, dtype=float)
        k = min(nb - 2, count + max(4, count // 4))  # keep degenerate pairs whole
        vals, phis = sla.eigsh(S_op, k=k, M=Bbb.tocsc(), which="SA", tol=1e-12,
                               ncv=min(nb - 1, max(2 * k + 1, 40)), v0=start_vector(nb))
        order = np.argsort(vals)[:count]
        vals, phis = vals[order], phis[:, order]
        phis = phis / np.sqrt(np.einsum("ij,ij->j", phis, Bbb @ phis))
        deflated = 0
    else:
        raise SpectrumError(f"unknown method {method!r}")

    vals, phis = vals[:count], phis[:, :count]
    ext = np.zeros((mesh.n_vertices, count))
    ext[B] = phis
    ext[I] = -solver.solve(Aib @ phis)
    return Spectrum("steklov", float(lam), vals, phis, B, ext, deflated)


def steklov_full_pencil(fm: FormMatrices, lam: float = 0.0) -> np.ndarray:
    """Finite eigenvalues of the full pencil ``(K + Mq - lam*M, Bb)`` by QZ.

    Independent of the Schur route; dense, so only for small meshes.
    """
    n = fm.mesh.n_vertices
    if n > 2000:
        raise SpectrumError("full-pencil route is dense; use a mesh with at most 2000 vertices")
    A = (fm.KMq - lam * fm.M).toarray()
    alpha, beta = la.eig(A, fm.Bb.toarray(), right=False, homogeneous_eigvals=True)
    scale = np.abs(alpha) + np.abs(beta)
    finite = np.abs(beta) > 1e-10 * scale
    vals = (alpha[finite] / beta[finite]).real
    return np.sort(vals)
