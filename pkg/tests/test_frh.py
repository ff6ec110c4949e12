import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from hopf_frh import frh
from hopf_frh.errors import AlphaOutOfRange, DegenerateMinor, NotCritical
from hopf_frh.frh import (StabilityVerdict, TolerancePolicy, Verdict, build_matrix, classify,
                          critical_roots, hadamard_bound, minors, minors_of, resultant_check,
                          rotate)
from hopf_frh.polycore import CharPoly, roots, sector_classify
from oracles import (CRIT_A, hurwitz_ref, minors_ref, poly_from_roots, rotated_pair_ref,
                     sector_roots, sylvester_resultant)

CRIT = CharPoly((CRIT_A, CRIT_A, 1.0))
alphas = st.floats(1.0, 2.0, exclude_min=True, exclude_max=True)


def planted(rng, n, alpha, r0):
    z = r0 * cmath.exp(1j * alpha * math.pi / 2)
    return CharPoly(tuple(poly_from_roots([z, z.conjugate()] + sector_roots(rng, n - 2, alpha))))


# --- rotation and layout ---------------------------------------------------

def test_rotate_examples():
    rp = rotate(CharPoly((1.0,)), 1.5)
    assert rp.abar == pytest.approx((math.sqrt(2) / 2, 0.0), abs=1e-15)
    assert rp.bbar == pytest.approx((-math.sqrt(2) / 2, 1.0), abs=1e-15)
    rp = rotate(CharPoly((1.0, 1.0, 1.0)), 1.1)
    assert rp.abar[0] == pytest.approx(-0.891007, abs=1e-6)
    assert rp.bbar[0] == pytest.approx(0.453990, abs=1e-6)
    assert rp.abar[1] == pytest.approx(-0.309017, abs=1e-6)
    assert rp.bbar[1] == pytest.approx(-0.951057, abs=1e-6)
    with pytest.raises(AlphaOutOfRange):
        rotate(CharPoly((1.0,)), 1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=7), alphas)
def test_rotation_invariants(coeffs, alpha):
    rp = rotate(CharPoly(tuple(coeffs)), alpha)
    assert rp.abar[-1] == 0.0
    assert rp.bbar[-1] == coeffs[-1]
    full = [1.0] + coeffs
    ra, rb = rotated_pair_ref(coeffs, alpha)
    for j, a in enumerate(full):
        assert abs(rp.abar[j] ** 2 + rp.bbar[j] ** 2 - a * a) <= 1e-12 * max(a * a, 1e-300)
        assert abs(rp.abar[j] - float(ra[j])) <= 1e-13 * max(1.0, abs(a))
        assert abs(rp.bbar[j] - float(rb[j])) <= 1e-13 * max(1.0, abs(a))


def test_build_matrix_examples():
    H = build_matrix(rotate(CharPoly((1.0,)), 1.5))
    assert H.entries == pytest.approx(np.array([[0.707107, 0], [-0.707107, 1]]), abs=1e-6)
    rp = rotate(CharPoly((0.3, -0.7)), 1.3)
    a, b = rp.abar, rp.bbar
    want = np.array([[a[0], a[1], a[2], 0], [b[0], b[1], b[2], 0],
                     [0, a[0], a[1], a[2]], [0, b[0], b[1], b[2]]])
    assert np.array_equal(build_matrix(rp).entries, want)
    assert a[2] == 0.0
    rp = rotate(CharPoly((1.0, 2.0, 3.0)), 1.1)
    H = build_matrix(rp)
    assert H.entry(5, 3) == rp.abar[0]
    assert H.entry(6, 6) == rp.bbar[3] == 3.0


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6])
def test_matrix_matches_reference_layout(n):
    rng = np.random.default_rng(n)
    coeffs = rng.uniform(-5, 5, n)
    H = build_matrix(rotate(CharPoly(tuple(coeffs)), 1.37)).entries
    ref = np.array(hurwitz_ref(coeffs, 1.37).tolist(), dtype=float)
    assert np.allclose(H, ref, rtol=0, atol=1e-13 * max(1, np.abs(coeffs).max()))


# --- minors ----------------------------------------------------------------

def test_minor_examples():
    ms = minors(build_matrix(rotate(CharPoly((1.0,)), 1.5)))
    assert ms.nabla[0] == pytest.approx(0.707107, abs=1e-6)
    ms = minors_of(CRIT, 1.1)
    H = build_matrix(rotate(CRIT, 1.1)).entries
    assert abs(ms.nabla[2]) < 1e-8 * hadamard_bound(H)
    assert ms.nabla[0] > 0 and ms.nabla[1] > 0 and ms.nabla_tilde < 0


def test_rounded_critical_coefficients_sit_off_the_surface():
    # the six-digit rounding of 1 - 2cos(0.55 pi) moves the pair off the boundary
    # by ~2e-7, which is larger than 1e-8 of the row-norm bound
    ms = minors_of(CharPoly((1.312869, 1.312869, 1.0)), 1.1)
    bound = hadamard_bound(build_matrix(rotate(CharPoly((1.312869, 1.312869, 1.0)), 1.1)).entries)
    assert 1e-8 * bound < ms.nabla[2] < 1e-6 * bound
    assert classify(CharPoly((1.312869, 1.312869, 1.0)), 1.1).tag is Verdict.STABLE
    loose = classify(CharPoly((1.312869, 1.312869, 1.0)), 1.1, TolerancePolicy(1e-7))
    assert loose.tag is Verdict.HOPF_CANDIDATE and loose.r0 == pytest.approx(1.0, abs=1e-6)


@settings(max_examples=300, deadline=None)
@given(st.floats(-10, 10), alphas)
def test_nabla1_closed_form(a1, alpha):
    ms = minors_of(CharPoly((a1,)), alpha)
    assert abs(ms.nabla[0] - a1 * math.sin(alpha * math.pi / 2)) <= 1e-10 + 1e-10 * abs(a1)
    ms = minors_of(CharPoly((a1, 1.0, -2.0)), alpha)
    assert abs(ms.nabla[0] - a1 * math.sin(alpha * math.pi / 2)) <= 1e-10 + 1e-10 * abs(a1)


@pytest.mark.parametrize("seed", range(12))
def test_minors_match_high_precision(seed):
    rng = np.random.default_rng(100 + seed)
    n = 1 + seed % 6
    alpha = float(rng.uniform(1.05, 1.95))
    coeffs = rng.uniform(-5, 5, n)
    ms = minors_of(CharPoly(tuple(coeffs)), alpha)
    nab, tilde = minors_ref(coeffs, alpha)
    for p in range(n):
        assert abs(ms.nabla[p] - float(nab[p])) <= 1e-12 * ms.magnitude[p]
    assert abs(ms.nabla_tilde - float(tilde)) <= 1e-12 * max(1.0, ms.magnitude[-1])
    H = build_matrix(rotate(CharPoly(tuple(coeffs)), alpha)).entries
    assert abs(ms.nabla[-1] - np.linalg.det(H)) <= 1e-9 * hadamard_bound(H)


def test_equilibrated_bound_is_an_upper_bound():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 7))
        coeffs = rng.uniform(-5, 5, n) * 10.0 ** rng.uniform(-3, 3, n)
        ms = minors_of(CharPoly(tuple(coeffs)), float(rng.uniform(1.05, 1.95)))
        for v, s, m in zip(ms.nabla, ms.scale, ms.magnitude):
            assert abs(v) <= s * (1 + 1e-12)
            assert s <= m * (1 + 1e-12)


def test_equilibrate_is_exact():
    rng = np.random.default_rng(5)
    M = rng.normal(size=(3, 5, 5)) * 10.0 ** rng.uniform(-6, 6, size=(3, 5, 1))
    S, log2det = frh.equilibrate(M)
    ratio = S / M
    assert np.all(np.log2(ratio) == np.round(np.log2(ratio)))
    assert np.allclose(np.linalg.det(S) * np.exp2(-log2det), np.linalg.det(M), rtol=1e-10)


# --- classification --------------------------------------------------------

def test_classify_examples():
    assert classify(CharPoly((1.0,)), 1.5).tag is Verdict.STABLE
    v = classify(CharPoly((-1.0,)), 1.5)
    assert v.tag is Verdict.INDETERMINATE and v.details[0] == -1
    assert sector_classify(roots(CharPoly((-1.0,))), 1.5).n_unstable == 1
    v = classify(CRIT, 1.1)
    assert v.tag is Verdict.HOPF_CANDIDATE
    assert v.r0 == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(AlphaOutOfRange):
        classify(CRIT, 2.0)


def test_degenerate_minor():
    with pytest.raises(DegenerateMinor):
        classify(CharPoly((0.0, 0.0)), 1.4)


def test_dropped_leading_coefficient_is_built_literally():
    # sin(4 * 1.5 * pi / 2) = 0: f1 loses its leading term
    p = CharPoly((1.0, 2.0, 3.0, 4.0))
    rp = rotate(p, 1.5)
    assert abs(rp.abar[0]) < 1e-15
    v = classify(p, 1.5)
    stable = sector_classify(roots(p), 1.5).all_stable
    assert (v.tag is Verdict.STABLE) == stable


def test_critical_roots_examples():
    pair = critical_roots(classify(CRIT, 1.1), 1.1)
    for r, sgn in zip(pair, (1, -1)):
        assert r.modulus == pytest.approx(1.0, abs=1e-6)
        assert r.argument == pytest.approx(sgn * 0.55 * math.pi, abs=1e-15)
    fake = StabilityVerdict(Verdict.HOPF_CANDIDATE, 2.0, (), None, 1.5)
    a, b = critical_roots(fake, 1.5)
    assert (a.re, a.im) == pytest.approx((-math.sqrt(2), math.sqrt(2)), abs=1e-15)
    assert (b.re, b.im) == pytest.approx((-math.sqrt(2), -math.sqrt(2)), abs=1e-15)
    z = 0.7 * cmath.exp(1.3j * math.pi / 2)
    p = CharPoly(tuple(poly_from_roots([z, z.conjugate(), -2, -3])))
    a, b = critical_roots(classify(p, 1.3), 1.3)
    oracle = [r.z for r in roots(p)]
    for got in (a.z, b.z):
        assert min(abs(got - w) for w in oracle) < 1e-6
    with pytest.raises(NotCritical):
        critical_roots(classify(CharPoly((1.0,)), 1.5), 1.5)


# --- resultant ---------------------------------------------------------------

def test_resultant_examples():
    rp = rotate(CharPoly((0.8,)), 1.3)
    assert resultant_check(rp) == pytest.approx(rp.abar[0] * rp.bbar[1], rel=1e-14)
    assert minors_of(CharPoly((0.8,)), 1.3).nabla[0] == pytest.approx(resultant_check(rp), rel=1e-14)
    rp = rotate(CRIT, 1.1)
    assert abs(resultant_check(rp)) < 1e-12


@pytest.mark.parametrize("n,alpha", [(1, 1.3), (2, 1.1), (3, 1.1), (3, 1.7), (4, 1.5), (5, 1.9),
                                     (4, 1.25), (2, 1.5)])
def test_hurwitz_determinant_is_signed_sylvester_resultant(n, alpha):
    rng = np.random.default_rng(n * 31 + int(alpha * 100))
    coeffs = rng.uniform(-5, 5, n)
    abar, bbar = rotated_pair_ref(coeffs, alpha)
    res = sylvester_resultant(abar, bbar)
    rp = rotate(CharPoly(tuple(coeffs)), alpha)
    det = float(mp.det(hurwitz_ref(coeffs, alpha)))
    assert det == pytest.approx(frh.hurwitz_resultant_sign(n) * float(res), rel=1e-30, abs=1e-30)
    ms = minors_of(CharPoly(tuple(coeffs)), alpha)
    assert abs(abs(ms.nabla[-1]) - abs(float(res))) <= 1e-8 * ms.magnitude[-1]
    assert abs(resultant_check(rp) - float(res)) <= 1e-8 * ms.magnitude[-1]


# --- properties --------------------------------------------------------------

def test_oracle_agreement_sample():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(300):
        n = int(rng.integers(2, 7))
        alpha = float(rng.choice([1.1, 1.3, 1.5, 1.7, 1.9]))
        p = CharPoly(tuple(rng.uniform(-5, 5, n)))
        rts = roots(p)
        edge = alpha * math.pi / 2
        if any(abs(abs(r.argument) - edge) < 1e-5 for r in rts):
            continue
        checked += 1
        v = classify(p, alpha)
        assert (v.tag is Verdict.STABLE) == sector_classify(rts, alpha).all_stable
    assert checked > 250


@pytest.mark.parametrize("seed", range(20))
def test_subresultant_identity(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    alpha = float(rng.uniform(1.1, 1.9))
    r0 = float(rng.uniform(0.1, 10))
    p = planted(rng, n, alpha, r0)
    v = classify(p, alpha)
    assert v.tag is Verdict.HOPF_CANDIDATE
    ms = v.minors
    assert abs(ms.nabla[-2] * v.r0 + ms.nabla_tilde) <= 1e-12 * max(1.0, abs(ms.nabla_tilde))
    sec = sector_classify(roots(p), alpha, tau_arg=1e-5)
    assert (sec.n_critical, sec.n_stable) == (2, n - 2)
    crit = [r for r in roots(p) if abs(abs(r.argument) - alpha * math.pi / 2) < 1e-5]
    assert all(abs(r.modulus - v.r0) <= 1e-6 * v.r0 for r in crit)


@pytest.mark.parametrize("c", [0.25, 0.5, 2.0, 3.0])
def test_scaling_covariance(c):
    # a_j -> a_j c^j multiplies every root by c, so r0 scales by c
    rng = np.random.default_rng(int(c * 10))
    for n in (2, 3, 4):
        alpha = 1.35
        p = planted(rng, n, alpha, 1.3)
        q = CharPoly(tuple(a * c ** j for j, a in enumerate(p.coeffs, start=1)))
        vp, vq = classify(p, alpha), classify(q, alpha)
        assert vp.tag is vq.tag is Verdict.HOPF_CANDIDATE
        assert vq.r0 == pytest.approx(c * vp.r0, rel=1e-8)
        s = CharPoly(tuple(rng.uniform(-3, 3, n)))
        t = CharPoly(tuple(a * c ** j for j, a in enumerate(s.coeffs, start=1)))
        assert classify(s, alpha).tag is classify(t, alpha).tag


def test_tolerance_policy():
    tol = TolerancePolicy(1e-6)
    assert tol.tau(0.5) == 1e-6
    assert tol.tau(1e3) == pytest.approx(1e-3)


def test_rotation_per_row_alpha():
    rng = np.random.default_rng(9)
    coeffs = rng.uniform(-3, 3, (6, 4))
    alpha = rng.uniform(1.05, 1.95, 6)
    abar, bbar = frh.rotation_coefficients(coeffs, alpha)
    for i in range(6):
        a1, b1 = frh.rotation_coefficients(coeffs[i], alpha[i])
        assert np.array_equal(abar[i], a1) and np.array_equal(bbar[i], b1)
