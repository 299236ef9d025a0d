import json

import numpy as np
import pytest

import dtnlab.duality as duality
from dtnlab.duality import (
    DualityError,
    MonotonicityError,
    count_d,
    robin_multiplicity,
    solve_s_k,
    trace_robin_curves,
)
from dtnlab.spectra import Spectrum, dirichlet_spectrum, steklov_spectrum

from .meshes import disk_fm

J31 = 6.380161895923984
KEY_MU = J31**2 - 0.1


@pytest.mark.parametrize("q,d", [(0.0, 0), (-30.0, 5), (-KEY_MU, 6)])
def test_count_d(q, d):
    assert count_d(disk_fm(0.05, q), 0.0) == d


def test_count_d_includes_equality():
    fm = disk_fm(0.1, 0.0)
    lam1 = dirichlet_spectrum(fm, 1).values[0]
    assert count_d(fm, lam1) == 1
    assert count_d(fm, lam1 - 1e-3) == 0


def test_robin_curve_examples():
    fm = disk_fm(0.05, 0.0)
    c = trace_robin_curves(fm, -5.0, 5.0, 21, 4)
    assert c.monotone
    i0 = int(np.argmin(np.abs(c.sigma_grid)))
    assert abs(c.branches[0, i0]) < 1e-10
    assert np.all(np.diff(c.branches[0]) < 0)
    assert np.all(np.diff(c.branches, axis=0) >= -1e-10)
    far = trace_robin_curves(fm, -1e4, -9e3, 2, 1).branches[0, 0]
    dl = dirichlet_spectrum(fm, 1).values[0]
    assert abs(far - dl) <= 0.05 * dl


def test_robin_curve_csv():
    c = trace_robin_curves(disk_fm(0.2, 0.0), -1.0, 1.0, 3, 2)
    lines = c.to_csv().splitlines()
    assert lines[0] == "sigma,lambda_1,lambda_2"
    assert len(lines) == 4
    assert float(lines[1].split(",")[0]) == -1.0


def test_robin_curve_argument_checks():
    fm = disk_fm(0.2, 0.0)
    with pytest.raises(ValueError):
        trace_robin_curves(fm, 1.0, -1.0, 5, 1)
    with pytest.raises(ValueError):
        trace_robin_curves(fm, -1.0, 1.0, 1, 1)


def test_monotonicity_violation_reported(monkeypatch):
    fm = disk_fm(0.2, 0.0)

    def fake(fm, sigma, count):
        vals = np.arange(count, dtype=float) + (0.5 if 0.2 < sigma < 0.8 else 0.0) - sigma
        return Spectrum("robin", sigma, vals, np.zeros((1, count)), np.arange(1))

    monkeypatch.setattr(duality, "robin_spectrum", fake)
    with pytest.raises(MonotonicityError) as e:
        trace_robin_curves(fm, 0.0, 1.0, 11, 2)
    assert e.value.k == 1 and e.value.sigma == pytest.approx(0.3)
    c = trace_robin_curves(fm, 0.0, 1.0, 11, 2, check=False)
    assert not c.monotone and (1, pytest.approx(0.3), pytest.approx(0.4)) == c.violations[0]


def test_solve_s_k_examples():
    c = solve_s_k(disk_fm(0.05, 0.0), 0.0, 2)
    assert c.d == 0 and abs(c.s_k - 1) < 0.02 and c.residual <= 1e-6
    c = solve_s_k(disk_fm(0.05, -1.0), 0.0, 1)
    assert c.d == 0 and abs(c.s_k + 0.5750809150043) <= 0.02 * 0.5750809150043
    c = solve_s_k(disk_fm(0.05, -KEY_MU), 0.0, 1)
    assert c.d == 6 and c.s_k < -10
    assert c.mismatch <= 0.01 * abs(c.sigma_k_direct)
    assert c.bracket[0] < -10  # reached by doubling
    d = json.loads(c.to_json())
    assert set(d) >= {"k", "d", "s_k", "residual", "sigma_k_direct", "mismatch"}


@pytest.mark.parametrize("q", [0.0, -1.0, -30.0, -KEY_MU])
def test_duality_family(q):
    fm = disk_fm(0.05, q)
    direct = steklov_spectrum(fm, 0.0, 6).values
    d = count_d(fm)
    s = [solve_s_k(fm, 0.0, k, d=d, direct=direct) for k in range(1, 7)]
    for c in s:
        assert c.residual <= 1e-6
        assert c.mismatch <= 0.01 * max(abs(c.sigma_k_direct), 1.0)
    vals = [c.s_k for c in s]
    assert all(a <= b + 1e-6 for a, b in zip(vals, vals[1:]))


def test_duality_nonzero_lambda():
    fm = disk_fm(0.1, 0.0)
    lam = 20.0
    direct = steklov_spectrum(fm, lam, 4).values
    for k in range(1, 5):
        c = solve_s_k(fm, lam, k, direct=direct)
        assert c.d == 3
        assert c.mismatch <= 1e-4 * max(1, abs(c.sigma_k_direct))


def test_bracket_failure():
    fm = disk_fm(0.2, 0.0)
    with pytest.raises(DualityError, match="no sign change"):
        solve_s_k(fm, 0.0, 2, bracket=(-1.0, -0.5), max_expand=0)
    with pytest.raises(ValueError):
        solve_s_k(fm, 0.0, 0)


def test_multiplicity_consistency():
    fm = disk_fm(0.05, 0.0)
    direct = steklov_spectrum(fm, 0.0, 8).values
    s = np.array([solve_s_k(fm, 0.0, k, direct=direct).s_k for k in range(1, 8)])
    for sigma in (direct[1], direct[3], direct[5]):
        tol = 1e-5
        m_s = int(np.sum(np.abs(s - sigma) <= tol))
        assert m_s == robin_multiplicity(fm, sigma, 0.0, 1e-8, 10)
