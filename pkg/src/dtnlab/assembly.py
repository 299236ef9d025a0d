"""P1 finite-element matrices for the Robin/Steklov quadratic forms.

For ``u = sum u_i phi_i`` the forms are

    u^T K u  = int |grad u|^2
    u^T M u  = int u^2
    u^T Mq u = int q u^2        (q replaced by its P1 interpolant)
    u^T Bb u = int_{boundary} u^2

so the Robin form with parameter ``sigma`` is ``K + Mq - sigma * Bb``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import factorial
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .geometry import Mesh


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class Potential:
    """A potential ``q`` sampled at mesh vertices.

    ``kind`` is ``"constant"``, ``"radial"`` (``func`` of the radius) or
    ``"grid"`` (explicit vertex ``values``).
    """

    kind: str
    value: float = 0.0
    func: Callable[[np.ndarray], np.ndarray] | None = None
    values: np.ndarray | None = None

    @classmethod
    def constant(cls, c: float) -> "Potential":
        return cls("constant", value=float(c))

    @classmethod
    def radial(cls, func: Callable[[np.ndarray], np.ndarray]) -> "Potential":
        return cls("radial", func=func)

    @classmethod
    def grid(cls, values) -> "Potential":
        return cls("grid", values=np.asarray(values, dtype=float))

    def sample(self, mesh: Mesh) -> np.ndarray:
        if self.kind == "constant":
            q = np.full(mesh.n_vertices, self.value)
        elif self.kind == "radial":
            q = np.asarray(self.func(np.linalg.norm(mesh.vertices, axis=1)), dtype=float)
            q = np.broadcast_to(q, (mesh.n_vertices,)).copy()
        elif self.kind == "grid":
            if self.values is None or len(self.values) != mesh.n_vertices:
                raise PotentialError("grid potential needs exactly one value per mesh vertex")
            q = self.values.astype(float).copy()
        else:
            raise PotentialError(f"unknown potential kind {self.kind!r}")
        bad = np.flatnonzero(~np.isfinite(q))
        if len(bad):
            v = int(bad[0])
            raise PotentialError(f"potential is not finite at vertex {v} (value {q[v]})")
        return q

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant({self.value:g})"
        return self.kind


@dataclass(frozen=True, eq=False)
class FormMatrices:
    mesh: Mesh
    q: np.ndarray
    K: sp.csr_matrix
    M: sp.csr_matrix
    Mq: sp.csr_matrix
    Bb: sp.csr_matrix
    q_constant: float | None = None
    # solver by-products that depend only on these matrices
    cache: dict = field(default_factory=dict, repr=False)

    @cached_property
    def KMq(self) -> sp.csr_matrix:
        return (self.K + self.Mq).tocsr()

    @property
    def q_min(self) -> float:
        return float(self.q.min())


# reference integrals of products of barycentric coordinates
_LOCAL_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def _triple_table() -> np.ndarray:
    T = np.empty((3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                e = np.bincount([i, j, k], minlength=3)
                T[i, j, k] = 2.0 * np.prod([factorial(int(x)) for x in e]) / factorial(5)
    return T


_TRIPLE = _triple_table()


def _scatter(tris: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble(mesh: Mesh, q: Potential | float = 0.0) -> FormMatrices:
    """Assemble stiffness, mass, potential-mass and boundary-mass matrices."""
    if not isinstance(q, Potential):
        q = Potential.constant(q)
    qv = q.sample(mesh)
    n = mesh.n_vertices
    tris = mesh.triangles
    p = mesh.vertices[tris]
    area = mesh.triangle_areas
    if np.any(area <= 0):
        raise ValueError("mesh has non-positive triangle areas")

    # gradients of barycentric coordinates: grad l_i = rot(p_{i+2} - p_{i+1}) / (2A)
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    G = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2 * area)[:, None, None]
    Kloc = area[:, None, None] * np.einsum("tik,tjk->tij", G, G)
    Mloc = area[:, None, None] * _LOCAL_MASS[None]

    K = _scatter(tris, Kloc, n)
    M = _scatter(tris, Mloc, n)
    K = (0.5 * (K + K.T)).tocsr()
    M = (0.5 * (M + M.T)).tocsr()

    q_const = q.value if q.kind == "constant" else None
    if q_const is not None:
        Mq = (q_const * M).tocsr()
    else:
        qt = qv[tris]
        Mqloc = area[:, None, None] * np.einsum("ijk,tk->tij", _TRIPLE, qt)
        Mq = _scatter(tris, Mqloc, n)
        Mq = (0.5 * (Mq + Mq.T)).tocsr()

    seg = mesh.boundary_segments
    d = mesh.vertices[seg[:, 1]] - mesh.vertices[seg[:, 0]]
    length = np.sqrt((d**2).sum(axis=1))
    Bloc = length[:, None, None] * (np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0)[None]
    rows = np.repeat(seg, 2, axis=1).ravel()
    cols = np.tile(seg, (1, 2)).ravel()
    Bb = sp.coo_matrix((Bloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    Bb = (0.5 * (Bb + Bb.T)).tocsr()
    return FormMatrices(mesh, qv, K, M, Mq, Bb, q_const)


def robin_form(fm: FormMatrices, sigma: float, lam: float = 0.0) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Pencil ``(K + Mq - sigma*Bb - lam*M, M)``.

    Its generalized eigenvalues are the Robin eigenvalues at ``sigma``
    shifted by ``-lam``.
    """
    A = fm.KMq - sigma * fm.Bb
    if lam != 0.0:
        A = A - lam * fm.M
    return A.tocsr(), fm.M


def boundary_forms(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """1D P1 stiffness and mass on the boundary loops, boundary-vertex indexed."""
    nb = len(mesh.boundary_vertices)
    pos = mesh.boundary_position()
    seg = pos[mesh.boundary_segments]
    d = mesh.vertices[mesh.boundary_segments[:, 1]] - mesh.vertices[mesh.boundary_segments[:, 0]]
    length = np.sqrt((d**2).sum(axis=1))
    S = np.zeros((nb, nb))
    B = np.zeros((nb, nb))
    for (i, j), L in zip(seg, length):
        S[i, i] += 1 / L
        S[j, j] += 1 / L
        S[i, j] -= 1 / L
        S[j, i] -= 1 / L
        B[i, i] += L / 3
        B[j, j] += L / 3
        B[i, j] += L / 6
        B[j, i] += L / 6
    return S, B
