"""Closed-form spectra used to validate the finite-element results.

* Bessel functions ``J_n`` (power series / Miller backward recurrence)
  and ``I_n`` (power series), their derivatives and zeros.
* The Dirichlet-to-Neumann spectrum of the unit disk with constant
  potential ``q = -mu`` at ``lambda = 0``: on the mode ``e^{i n theta}``
  the interior solution is ``J_n(sqrt(mu) r)``, giving
  ``sigma_n = sqrt(mu) J_n'(sqrt(mu)) / J_n(sqrt(mu))``.
* Boundary nodal bounds and spectrum of the flat cylinder
  ``circle x (-delta, delta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SERIES_TOL = 1e-16
RESONANCE_TOL = 1e-9
SERIES_MAX_X = 12.0


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class BesselValue:
    n: int
    x: float
    Jn: float
    Jn_prime: float
    In: float | None = None
    In_prime: float | None = None


@dataclass(frozen=True)
class DiskDtnBranch:
    n: int
    mu: float
    sigma: float
    resonant: bool = False


def _j_series(n: int, x: float) -> float:
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    k = 0
    while True:
        k += 1
        term *= -(half * half) / (k * (k + n))
        total += term
        if abs(term) <= SERIES_TOL * abs(total):
            return total


def _i_series(n: int, x: float) -> float:
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    k = 0
    while True:
        k += 1
        term *= (half * half) / (k * (k + n))
        total += term
        if abs(term) <= SERIES_TOL * abs(total):
            return total


def _j_miller(nmax: int, x: float) -> np.ndarray:
    """J_0..J_nmax by backward recurrence normalised with J_0 + 2 sum J_2k = 1."""
    start = 2 * ((max(nmax, int(x)) + 20 + int(math.sqrt(40 * max(nmax, x, 1.0)))) // 2)
    vals = np.zeros(start + 2)
    vals[start + 1] = 0.0
    vals[start] = 1e-300
    for k in range(start, 0, -1):
        vals[k - 1] = (2 * k / x) * vals[k] - vals[k + 1]
        if abs(vals[k - 1]) > 1e250:
            vals[k - 1 :] *= 1e-250
    norm = vals[0] + 2 * vals[2 : start + 1 : 2].sum()
    return vals[: nmax + 1] / norm


def bessel_jn(n: int, x: float) -> float:
    """``J_n(x)`` for integer ``n >= 0`` and ``x >= 0``."""
    if n < 0 or x < 0:
        raise OracleError("bessel_jn needs n >= 0 and x >= 0")
    # the alternating series cancels badly beyond x ~ 12, whatever the order
    if x <= SERIES_MAX_X:
        return _j_series(n, x)
    return float(_j_miller(n, x)[n])


def bessel_j(n: int, x: float) -> BesselValue:
    """``J_n`` and ``J_n'`` at ``x``, plus ``I_n`` and ``I_n'`` when the series is usable."""
    jm = bessel_jn(n - 1, x) if n > 0 else None
    jp = bessel_jn(n + 1, x)
    jn = bessel_jn(n, x)
    jprime = -jp if n == 0 else 0.5 * (jm - jp)
    In = Inp = None
    if x <= 60.0:
        In = _i_series(n, x)
        ip = _i_series(n + 1, x)
        Inp = ip if n == 0 else 0.5 * (_i_series(n - 1, x) + ip)
    return BesselValue(n, float(x), jn, jprime, In, Inp)


def bessel_zero(n: int, m: int, step: float = 0.1, x_max: float = 120.0) -> float:
    """The ``m``-th positive zero ``j_{n,m}`` of ``J_n``.

    A sign-change scan from ``x = n`` (there is no zero below the order)
    followed by bisection to 1e-10.
    """
    if n < 0 or m < 1:
        raise OracleError("bessel_zero needs n >= 0 and m >= 1")
    x = max(float(n), step)
    f = bessel_jn(n, x)
    found = 0
    while x < x_max:
        x1 = x + step
        f1 = bessel_jn(n, x1)
        if f == 0.0 or f * f1 < 0:
            found += 1
            if found == m:
                a, b, fa = x, x1, f
                if fa == 0.0:
                    return a
                while b - a > 1e-10:
                    c = 0.5 * (a + b)
                    fc = bessel_jn(n, c)
                    if fa * fc <= 0:
                        b = c
                    else:
                        a, fa = c, fc
                return 0.5 * (a + b)
        x, f = x1, f1
    raise OracleError(f"zero j_({n},{m}) not found below x = {x_max}")


def disk_dtn_sigma(n: int, mu: float) -> float:
    """Branch ``sigma_n(mu)`` of the unit-disk DtN map for ``q = -mu``, ``lambda = 0``.

    Returns ``inf`` (signed) when ``sqrt(mu)`` is within 1e-9 of a zero of ``J_n``.
    """
    if mu == 0.0:
        return float(n)
    x = math.sqrt(abs(mu))
    b = bessel_j(n, x)
    if mu > 0:
        if abs(b.Jn) <= RESONANCE_TOL * max(1.0, abs(b.Jn_prime)):
            return math.copysign(math.inf, -b.Jn_prime * b.Jn) if b.Jn != 0 else math.inf
        return x * b.Jn_prime / b.Jn
    return x * b.In_prime / b.In


def disk_dtn_spectrum(mu: float, n_max: int, per_branch: bool = False) -> list[DiskDtnBranch]:
    """DtN eigenvalues of the unit disk with ``q = -mu``.

    With ``per_branch`` one entry per angular order ``n = 0..n_max`` is
    returned (resonant branches included and flagged). Otherwise the
    non-resonant values are listed with multiplicity (twice for ``n >= 1``)
    in ascending order.
    """
    branches = []
    for n in range(n_max + 1):
        s = disk_dtn_sigma(n, mu)
        branches.append(DiskDtnBranch(n, mu, s, resonant=not math.isfinite(s)))
    if per_branch:
        return branches
    out = []
    for b in branches:
        if b.resonant:
            continue
        out += [b] if b.n == 0 else [b, b]
    return sorted(out, key=lambda b: (b.sigma, b.n))


def disk_dtn_values(mu: float, count: int) -> np.ndarray:
    """The ``count`` smallest disk DtN eigenvalues (with multiplicity)."""
    n_max = count + int(math.sqrt(abs(mu))) + 4
    vals = [b.sigma for b in disk_dtn_spectrum(mu, n_max)]
    return np.array(vals[:count])


def disk_dirichlet_values(count: int, n_max: int = 30, m_max: int = 10) -> np.ndarray:
    """Smallest Dirichlet eigenvalues ``j_{n,m}^2`` of the unit disk with multiplicity."""
    vals = []
    for n in range(n_max + 1):
        for m in range(1, m_max + 1):
            z = bessel_zero(n, m) ** 2
            vals += [z] if n == 0 else [z, z]
    return np.sort(vals)[:count]


# ---------------------------------------------------------------- cylinder


def circle_nodal_count(j: int) -> int:
    """Nodal domains of the ``j``-th (1-based) eigenfunction of the unit circle.

    The spectrum is 0, 1, 1, 4, 4, ...; ``psi_1`` is constant and
    ``psi_{2m}``, ``psi_{2m+1}`` are ``cos(m theta)``, ``sin(m theta)``.
    """
    if j < 1:
        raise OracleError("eigenfunction index starts at 1")
    m = j // 2
    return 1 if m == 0 else 2 * m


def cylinder_spectrum_bound(k: int) -> int:
    """Upper bound ``2 * #nodal(psi_{ceil(k/2)})`` for ``M_k`` on the flat cylinder."""
    if k < 1:
        raise OracleError("k starts at 1")
    return 2 * circle_nodal_count(math.ceil(k / 2))


def cylinder_steklov_spectrum(half_length: float, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Steklov eigenvalues of ``circle x (-delta, delta)`` and the boundary nodal count of each.

    Separated solutions ``psi_m(theta) f(y)`` with ``f`` even (``cosh``) or
    odd (``sinh``) give ``m tanh(m delta)`` and ``m coth(m delta)``; the
    ``m = 0`` modes are ``1`` (value 0) and ``y`` (value ``1/delta``). The
    boundary is two circles, so each trace has twice the nodal domains of
    ``psi_m`` on one circle.
    """
    d = half_length
    entries = [(0.0, 2), (1.0 / d, 2)]
    m = 1
    # both branches of order m are >= m tanh(m d), which increases with m
    while True:
        entries.sort(key=lambda e: e[0])
        if len(entries) >= count and m * math.tanh(m * d) > entries[count - 1][0]:
            break
        nodal = 2 * (2 * m)
        entries += [(m * math.tanh(m * d), nodal)] * 2
        entries += [(m / math.tanh(m * d), nodal)] * 2
        m += 1
    vals = np.array([e[0] for e in entries[:count]])
    counts = np.array([e[1] for e in entries[:count]], dtype=int)
    return vals, counts
