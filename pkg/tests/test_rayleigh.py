import math

import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given, settings
from hypothesis import strategies as st

from dtnlab.nodal import boundary_nodal_arcs
from dtnlab.rayleigh import (
    RayleighError,
    btilde_probe,
    build_test_function,
    check_lemma,
    cutoff,
    layer_functions,
    max_rayleigh_on_span,
    rayleigh_quotient,
    supports_disjoint,
    weyl_fit,
)
from dtnlab.spectra import steklov_spectrum

from .meshes import disk_fm, disk_mesh, square_fm


def whole_boundary(mesh):
    return np.arange(len(mesh.boundary_vertices))


def test_cutoff_shape():
    d = 0.2
    y = np.linspace(0, 0.3, 301)
    c = cutoff(y, d)
    assert np.all(c[y <= d / 2] == 1) and np.all(c[y >= 3 * d / 4] == 0)
    assert np.all(np.diff(c) <= 0)
    # C^1 at the knots: one-sided difference quotients vanish
    for knot in (d / 2, 3 * d / 4):
        assert abs(cutoff(knot + 1e-7, d) - cutoff(knot, d)) / 1e-7 < 1e-3
        assert abs(cutoff(knot, d) - cutoff(knot - 1e-7, d)) / 1e-7 < 1e-3


def test_build_examples():
    m = disk_mesh(0.025)
    t = np.arctan2(*m.vertices[m.boundary_vertices][:, ::-1].T)
    n, delta = 3, 0.2
    phi = np.cos(n * t)
    tf = build_test_function(m, phi, float(n), whole_boundary(m), delta)
    b = m.boundary_vertices
    assert np.array_equal(tf.coefficients[b], phi)
    r = np.linalg.norm(m.vertices, axis=1)
    assert np.all(tf.coefficients[r <= 1 - 0.76 * delta] == 0)
    # a vertex near radius 1 - delta/4
    i = int(np.argmin(np.abs(r - (1 - delta / 4)) + (np.arange(len(r)) % 7 != 0)))
    theta = math.atan2(m.vertices[i, 1], m.vertices[i, 0])
    expected = math.cos(n * theta) * math.exp(-n * delta / 4)
    assert tf.coefficients[i] == pytest.approx(expected, abs=0.1)


def test_build_errors():
    m = disk_mesh(0.1)
    phi = np.ones(len(m.boundary_vertices))
    with pytest.raises(RayleighError):
        build_test_function(m, phi, 0.0, whole_boundary(m), 0.2)
    with pytest.raises(RayleighError):
        build_test_function(m, phi, 1.0, whole_boundary(m), 1.5)


def test_rayleigh_examples():
    fm = disk_fm(0.05, 0.0)
    assert rayleigh_quotient(fm, np.ones(fm.mesh.n_vertices)) == pytest.approx(0.0, abs=1e-12)
    s = steklov_spectrum(fm, 0.0, 6)
    for k in range(6):
        assert rayleigh_quotient(fm, s.extensions[:, k]) == pytest.approx(s.values[k], abs=1e-9)
    with pytest.raises(RayleighError):
        u = np.zeros(fm.mesh.n_vertices)
        u[fm.mesh.interior_vertices[0]] = 1.0
        rayleigh_quotient(fm, u)


def _half_disk_oracle(delta):
    # cos(t) g(1 - r) on a half disk: R = int (g'^2 + g^2 / r^2) r dr with g(y) = exp(-y) chi(y)
    g = lambda y: np.exp(-y) * cutoff(y, delta)
    gp = lambda y: (g(y + 1e-7) - g(y - 1e-7)) / 2e-7
    f = lambda y: (gp(y) ** 2 + g(y) ** 2 / (1 - y) ** 2) * (1 - y)
    return quad(f, 0, delta, points=[delta / 2, 3 * delta / 4], limit=200)[0]


def test_half_disk_quotient_against_quadrature():
    delta = 0.3
    ref = _half_disk_oracle(delta)
    assert ref == pytest.approx(9.8200531, rel=1e-6)  # frozen
    errs = []
    for h in (0.025, 0.0125):
        fm = disk_fm(h, 0.0)
        m = fm.mesh
        b = m.boundary_vertices
        phi = np.cos(np.arctan2(m.vertices[b, 1], m.vertices[b, 0]))
        arc = boundary_nodal_arcs(m, phi)[0]
        errs.append(abs(rayleigh_quotient(fm, build_test_function(m, phi, 1.0, arc, delta)) - ref) / ref)
    assert errs[1] < 0.03 and errs[1] < errs[0]


def test_rayleigh_with_potential():
    fm = disk_fm(0.05, -1.0)
    s = steklov_spectrum(fm, 0.0, 3)
    assert rayleigh_quotient(fm, s.extensions[:, 0]) == pytest.approx(s.values[0], abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1e4, 1e4).filter(lambda c: abs(c) > 1e-3))
def test_rayleigh_scale_invariant(c):
    fm = disk_fm(0.1, 0.0)
    u = fm.mesh.vertices[:, 0] ** 2 + 0.3
    assert rayleigh_quotient(fm, c * u) == pytest.approx(rayleigh_quotient(fm, u), rel=1e-10)


def test_disjoint_supports_and_minmax():
    fm = disk_fm(0.025, 0.0)
    s = steklov_spectrum(fm, 0.0, 20)
    for k in (6, 12, 20):
        for delta in (0.2, 0.1, 0.05):
            tfs = layer_functions(fm, s, k, delta)
            assert supports_disjoint(fm.mesh, tfs)
            m = len(tfs)
            rho = max_rayleigh_on_span(fm, np.column_stack([t.coefficients for t in tfs]))
            assert s.values[m - 1] <= rho + 1e-8
            assert rho <= max(t.rayleigh for t in tfs) * 1.5


def test_check_lemma_disk():
    fm = disk_fm(0.025, 0.0)
    s = steklov_spectrum(fm, 0.0, 30)
    rep = check_lemma(fm, s, 0.25, (10, 30), delta=0.2)
    assert rep.N is not None and rep.N <= 30
    assert rep.minmax_ok
    assert all(r <= 1.25 for k, _, r in rep.rows if k > rep.N)
    assert rep.max_ratio > 1.25  # small k violate: the statement is asymptotic
    lines = rep.to_csv().splitlines()
    assert lines[0] == "k,ell,ratio" and len(lines) == len(rep.rows) + 1


def test_check_lemma_smaller_delta():
    # halving delta moves the threshold N up: the layer is thinner than 1/sigma_k for more k
    fm = disk_fm(0.025, 0.0)
    s = steklov_spectrum(fm, 0.0, 30)
    wide = check_lemma(fm, s, 0.25, (10, 30), delta=0.2)
    narrow = check_lemma(fm, s, 0.25, (10, 30), delta=0.1)
    worst = lambda rep: {k: max(r for kk, _, r in rep.rows if kk == k) for k in range(10, 31)}
    w, n = worst(wide), worst(narrow)
    assert all(n[k] >= w[k] - 1e-9 for k in w)
    # both decay towards 1
    assert n[30] < n[10] and w[30] < w[10]


def test_check_lemma_errors():
    fm = disk_fm(0.05, 0.0)
    s = steklov_spectrum(fm, 0.0, 10)
    with pytest.raises(RayleighError):
        check_lemma(fm, s, 0.25, (1, 5), delta=0.2)  # sigma_1 = 0
    with pytest.raises(RayleighError):
        check_lemma(fm, s, 0.25, (5, 20), delta=0.2)


def test_btilde_q0_small():
    fm = disk_fm(0.025, 0.0)
    rep = btilde_probe(fm, steklov_spectrum(fm, 0.0, 20), 20)
    assert rep.max_upto(10) < 0.05
    assert rep.r[0] < 1e-8
    assert rep.to_csv().splitlines()[0] == "k,r_k"


def test_btilde_q_minus1_no_growth():
    fm = disk_fm(0.025, -1.0)
    rep = btilde_probe(fm, steklov_spectrum(fm, 0.0, 20), 20)
    m10, m15, m20 = rep.max_upto(10), rep.max_upto(15), rep.max_upto(20)
    assert m10 <= m15 <= m20 <= 1.2 * m10


def test_btilde_rectangle_refinement():
    maxes = []
    for h in (0.025, 0.0125):
        fm = square_fm(h, 0.0)
        maxes.append(btilde_probe(fm, steklov_spectrum(fm, 0.0, 20), 20).max_r)
    assert max(maxes) <= 2 * min(maxes)


def test_weyl_exact_sequence():
    vals = [k // 2 for k in range(1, 41)]  # 0, 1, 1, 2, 2, ...
    fit = weyl_fit(vals, 2 * math.pi)
    assert fit.slope == pytest.approx(0.5, abs=0.01)
    assert fit.predicted_constant == pytest.approx(math.pi, rel=0.01)
    with pytest.raises(RayleighError):
        weyl_fit(vals[:19], 2 * math.pi)


def test_weyl_potential_keeps_slope():
    fits = {}
    for q in (0.0, -1.0):
        fm = disk_fm(0.0125, q)
        fits[q] = weyl_fit(steklov_spectrum(fm, 0.0, 40).values, fm.mesh.perimeter)
    assert fits[-1.0].slope == pytest.approx(0.5, rel=0.1)
    assert fits[-1.0].slope == pytest.approx(fits[0.0].slope, rel=0.02)


def test_weyl_square():
    fm = square_fm(0.0125, 0.0)
    fit = weyl_fit(steklov_spectrum(fm, 0.0, 40).values, fm.mesh.perimeter)
    assert abs(fit.predicted_constant - math.pi) <= 0.15 * math.pi
    assert fit.r_squared > 0.95
