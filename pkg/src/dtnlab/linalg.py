"""Symmetric generalized eigensolvers used by the spectral routines.

Small problems go to LAPACK (``scipy.linalg.eigh``); large sparse ones to
ARPACK in shift-invert mode around a certified lower bound of the
spectrum, so that "eigenvalues nearest the shift" are the smallest ones.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla

DENSE_LIMIT = 600


class EigenSolverError(RuntimeError):
    pass


def start_vector(n: int) -> np.ndarray:
    """Fixed pseudo-random ARPACK start vector, so repeated runs give identical output."""
    return np.random.default_rng(20240).standard_normal(n)


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A)


def smallest_eigenpairs(A, B, count: int, lower_bound: float | None = None, dense_limit: int = DENSE_LIMIT):
    """The ``count`` smallest eigenpairs of the symmetric pencil ``(A, B)``, B SPD.

    Eigenvectors come back B-orthonormal, one per column.
    """
    n = A.shape[0]
    if not 1 <= count <= n:
        raise ValueError(f"requested {count} eigenvalues of a {n}x{n} pencil")
    if n <= dense_limit or count > n // 3:
        w, v = la.eigh(_dense(A), _dense(B), subset_by_index=[0, count - 1])
        return w, v
    if lower_bound is None:
        raise EigenSolverError("sparse path needs a lower bound for the spectrum")
    A = sp.csc_matrix(A)
    B = sp.csc_matrix(B)
    # a few extra pairs so that a degenerate pair is never cut at the boundary
    k = min(n - 2, count + max(4, count // 4))
    w, v = sla.eigsh(A, k=k, M=B, sigma=lower_bound, which="LM", tol=1e-12, v0=start_vector(n),
                     ncv=min(n - 1, max(2 * k + 1, 20)))
    order = np.argsort(w)[:count]
    w, v = w[order], v[:, order]
    # ARPACK returns B-orthogonal vectors; renormalise against drift
    v = v / np.sqrt(np.einsum("ij,ij->j", v, B @ v))
    return w, v


def generalized_residuals(A, B, values, vectors) -> np.ndarray:
    """Relative residuals ``|A v - w B v| / (|A v| + |w| |B v|)`` per pair."""
    Av = A @ vectors
    Bv = B @ vectors
    r = np.linalg.norm(Av - Bv * values[None, :], axis=0)
    scale = np.linalg.norm(Av, axis=0) + np.abs(values) * np.linalg.norm(Bv, axis=0)
    return r / np.where(scale > 0, scale, 1.0)


def trace_bound_shift(K, M, Bb, q_min: float, sigma: float, cache: dict | None = None) -> float:
    """A number strictly below the spectrum of ``(K + Mq - sigma*Bb, M)``.

    For ``sigma <= 0`` this is ``q_min - 1``. For ``sigma > 0`` it uses the
    discrete trace inequality ``u'Bb u <= theta(t) u'(K + tM)u`` and picks
    ``t`` so that ``sigma * theta(t) <= 1/2``. ``theta(t)`` does not depend
    on ``sigma``; pass a ``cache`` dict to reuse it across calls.
    """
    if sigma <= 0:
        return q_min - 1.0
    cache = {} if cache is None else cache
    t = 1.0
    for _ in range(80):
        if t not in cache:
            C = sp.csc_matrix(K + t * M)
            cache[t] = 1.01 * sla.eigsh(sp.csc_matrix(Bb), k=1, M=C, which="LA", return_eigenvectors=False,
                                        tol=1e-6, v0=start_vector(Bb.shape[0]))[0]
        theta = cache[t]
        if sigma * theta <= 0.5:
            return q_min - 1.0 - sigma * theta * t
        t *= 4.0
    raise EigenSolverError("could not bound the Robin spectrum from below")
