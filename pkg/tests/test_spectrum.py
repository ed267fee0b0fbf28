import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ptssh.errors import DegenerateLimitError, DomainError, NormalizationError, ParameterError
from ptssh.model import CENTER, ModelParams, SiteIndex, build_hamiltonian, site_equation
from ptssh.spectrum import (
    LocClass,
    band_edges,
    continuum_dispersion,
    discrete_spectrum,
    ds_residual,
    eigenfunction,
    lambda_pm,
    profile_residual,
    ps_coefficients,
    ps_polynomial,
    quartic_coefficients,
    w_discriminant,
    zero_mode_weight,
    zero_modes,
    _normalize,
)

pos = st.floats(0.2, 5.0)
gam_st = st.floats(0.05, 6.0)


def mp_roots(params):
    """Quartic roots at 30 digits, independent of the closed form.

    The coefficients are rebuilt in extended precision from the exact
    parameter values so that double roots are resolved to full accuracy.
    """
    with mpmath.workdps(30):
        t1, t2, g, gm = (mpmath.mpf(x) ** 2 for x in (params.t1, params.t2, params.g, params.gamma))
        a = gm
        b = gm * gm - 2 * gm * (t2 + g) + t1 * t1 - 2 * g * t1
        c = (t1 - t2 - 2 * g) * (gm * (t1 - t2) - 2 * g * t1)
        roots = mpmath.polyroots([a, 0, b, 0, c], maxsteps=200, extraprec=100)
    return [complex(r) for r in roots]


def match_sets(x, y):
    """Largest distance under the best one-to-one pairing (greedy is fine for 4 points)."""
    y = list(y)
    worst = 0.0
    for v in x:
        j = min(range(len(y)), key=lambda i: abs(y[i] - v))
        worst = max(worst, abs(y[j] - v))
        y.pop(j)
    return worst


# ---------------------------------------------------------------------------
# Continuum


def test_band_edges_and_dispersion():
    p = ModelParams(3, 1, 3)
    up, lo = band_edges(p)
    assert (up.lower, up.upper, lo.lower, lo.upper) == (2, 4, -4, -2)
    assert continuum_dispersion(p, 0.0) == 4 and continuum_dispersion(p, math.pi) == 2
    assert continuum_dispersion(p, 1.0, -1) == -continuum_dispersion(p, 1.0)
    assert up.contains(3.0) and not up.contains(2.0) and up.contains(2.0, strict=False)
    with pytest.raises(DomainError):
        continuum_dispersion(p, -0.1)
    with pytest.raises(ParameterError):
        continuum_dispersion(p, 0.1, 0)


@settings(max_examples=30, deadline=None)
@given(pos, pos, st.floats(0.0, math.pi))
def test_dispersion_is_lead_eigenvalue(t1, t2, k):
    """Bloch states of the bare lead have energies +-E(k)."""
    h = np.array([[0, t2 + t1 * np.exp(-1j * k)], [t2 + t1 * np.exp(1j * k), 0]])
    e = np.sort(np.linalg.eigvalsh(h))
    p = ModelParams(t1, t2, 1.0)
    assert np.allclose(e, [-continuum_dispersion(p, k), continuum_dispersion(p, k)], atol=1e-12)


# ---------------------------------------------------------------------------
# Closed-form roots


@settings(max_examples=200, deadline=None)
@given(pos, pos, pos, gam_st)
def test_roots_match_independent_solvers(t1, t2, g, gam):
    p = ModelParams(t1, t2, g, gam)
    z = discrete_spectrum(p).energies
    assert len(z) == 4
    ref = mp_roots(p)
    scale = max(1.0, max(abs(r) for r in ref))
    assert match_sets(z, ref) <= 1e-8 * scale
    assert match_sets(z, np.roots(quartic_coefficients(p))) <= 1e-6 * scale


@settings(max_examples=200, deadline=None)
@given(pos, pos, pos, gam_st)
def test_root_symmetries(t1, t2, g, gam):
    z = discrete_spectrum(ModelParams(t1, t2, g, gam)).energies
    assert match_sets(z, -z) <= 1e-10 * max(1, np.abs(z).max())
    assert match_sets(z, z.conj()) <= 1e-10 * max(1, np.abs(z).max())


@settings(max_examples=150, deadline=None)
@given(pos, pos, pos, gam_st)
def test_lambda_consistency(t1, t2, g, gam):
    """Every mode's lambda solves the matching condition and the lead dispersion."""
    p = ModelParams(t1, t2, g, gam)
    for m in discrete_spectrum(p):
        assume(abs(t2 + t1 / m.lam) > 1e-6)
        assert abs(ds_residual(p, m.lam)) <= 1e-8 * (t1 ** 3 / abs(m.lam) ** 2 + gam ** 2 * t1 + g ** 2 * t1) * (1 + abs(m.lam))
        shell = (t2 + t1 * m.lam) * (t2 + t1 / m.lam)
        assert abs(shell - m.z ** 2) <= 1e-7 * max(1.0, abs(m.z) ** 2)
        assert cmath.isclose(m.k, -1j * cmath.log(m.lam), abs_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(pos, pos, pos, gam_st)
def test_lambda_product(t1, t2, g, gam):
    lp, lm = lambda_pm(ModelParams(t1, t2, g, gam))
    assert cmath.isclose(lp * lm, t1 ** 2 / gam ** 2, rel_tol=1e-10)


def test_polynomial_coefficients_by_expansion():
    """The coefficients equal the determinant-free expansion of P_s at sample points."""
    p = ModelParams(3, 1, 3, 2.5)
    a, b, c = ps_coefficients(p)
    assert a == 2.5 ** 2
    assert math.isclose(b, 2.5 ** 4 - 2 * 2.5 ** 2 * 10 + 81 - 2 * 9 * 9)
    assert math.isclose(c, (9 - 1 - 18) * (2.5 ** 2 * 8 - 2 * 9 * 9))
    assert ps_polynomial(p, 0.0) == c


@settings(max_examples=100, deadline=None)
@given(pos, pos, pos, gam_st)
def test_factored_w_discriminant(t1, t2, g, gam):
    p = ModelParams(t1, t2, g, gam)
    a, b, c = ps_coefficients(p)
    assert w_discriminant(p) == pytest.approx(b * b - 4 * a * c, rel=1e-9, abs=1e-9 * (b * b + abs(4 * a * c)))


def test_gamma_zero_branch():
    spec = discrete_spectrum(ModelParams(3, 1, 3, 0.0))
    assert spec.escaped and len(spec) == 2
    assert np.allclose(sorted(spec.energies.real), [-math.sqrt(20), math.sqrt(20)], atol=1e-12)
    assert all(m.lam == pytest.approx(1 / 3) for m in spec)
    with pytest.raises(DegenerateLimitError):
        lambda_pm(ModelParams(3, 1, 3, 0.0))


@pytest.mark.parametrize("t1,t2,g", [(3, 1, 3), (3, 1, 2.2), (1.2, 1, 0.8), (0.7, 1, 1.5)])
def test_small_gamma_approaches_hermitian_branch(t1, t2, g):
    """The two finite roots at gamma = 1e-6 agree with the gamma = 0 closed form; the others escape."""
    base = discrete_spectrum(ModelParams(t1, t2, g, 0.0))
    near = discrete_spectrum(ModelParams(t1, t2, g, 1e-6))
    finite = sorted(near.energies, key=abs)[:2]
    assert match_sets(finite, base.energies) <= 1e-6
    assert min(abs(z) for z in sorted(near.energies, key=abs)[2:]) > 1e3


def test_fig_values_region_I():
    """In the reservoir-assisted region |lambda| = t1/gamma, so Im k = ln(gamma/t1)."""
    for gam, sign in ((2.4, -1), (2.98, -1), (3.02, 1), (4.0, 1)):
        spec = discrete_spectrum(ModelParams(3, 1, 3, gam))
        for m in spec:
            assert abs(m.z.imag) > 1e-3
            assert m.k.imag == pytest.approx(math.log(gam / 3), abs=1e-10)
            assert np.sign(m.k.imag) == sign


def test_ric_point():
    spec = discrete_spectrum(ModelParams(3, 1, 3, 3.0))
    for m in spec:
        assert abs(m.z.imag) <= 1e-10 and abs(m.k.imag) <= 1e-10
        assert 2 < abs(m.z.real) < 4
        assert m.locclass is LocClass.DELOCALIZED
    # two distinct wavenumbers share each energy
    assert len({round(m.k.real, 9) for m in spec}) == 2


# ---------------------------------------------------------------------------
# Zero modes


@settings(max_examples=40, deadline=None)
@given(pos, pos, pos, st.floats(0.0, 5.0))
def test_zero_modes_solve_site_equations(t1, t2, g, gam):
    p = ModelParams(t1, t2, g, gam)
    for zm in zero_modes(p):
        amp = zm.amplitude
        for site in [CENTER] + [SiteIndex.lead(s * n, x) for s in (1, -1) for n in (1, 2, 3) for x in "AB"]:
            scale = max(abs(amp(site)), abs(zm.lam) ** 4 * (t1 + t2 + g + gam))
            assert abs(site_equation(p, amp, site)) <= 1e-12 * scale


def test_zero_mode_classes():
    za, zb = zero_modes(ModelParams(3, 1, 3, 2.0))
    assert za.locclass is LocClass.LOCALIZED and zb.locclass is LocClass.ANTI_LOCALIZED
    assert za.lam == -1 / 3 and zb.lam == -3
    assert za.center() == pytest.approx(-1j * 2 / 9)
    assert zb.center() == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        zero_modes(ModelParams(3, 1, 0.0, 1.0))


@pytest.mark.parametrize("gam", [0.5, 1.5, 2.5])
def test_zero_mode_weight_by_summation(gam):
    """Biorthogonal norm psi^T psi summed over a long lattice equals the closed form."""
    p = ModelParams(3, 1, 3, gam)
    za, _ = zero_modes(p)
    prof = eigenfunction(p, za, 60, normalization="none")
    v = prof.vector()
    w = zero_mode_weight(p)
    assert w == pytest.approx(za.center() ** 2 / np.sum(v * v), rel=1e-12)
    with pytest.raises(DomainError):
        zero_mode_weight(ModelParams(1, 3, 3, gam))


# ---------------------------------------------------------------------------
# Eigenfunctions


@settings(max_examples=60, deadline=None)
@given(pos, pos, pos, gam_st)
def test_profile_residual_random(t1, t2, g, gam):
    p = ModelParams(t1, t2, g, gam)
    for m in discrete_spectrum(p):
        assume(abs(m.lam) < 50 and abs(m.lam) > 0.02)
        try:
            prof = eigenfunction(p, m, 8, normalization="max")
        except DomainError:
            continue
        assert profile_residual(p, prof) <= 1e-8 * max(1.0, abs(m.z))


def test_profile_via_site_equations():
    """Independent oracle: residual computed from the hand-written site equations."""
    p = ModelParams(3, 1, 3, 2.4)
    for m in discrete_spectrum(p):
        prof = eigenfunction(p, m, 6)
        assert prof[CENTER] == pytest.approx(1.0)
        amp = prof.amplitudes.__getitem__
        for site in prof.amplitudes:
            if not site.is_center and abs(site.cell) >= 6:
                continue
            assert abs(site_equation(p, amp, site) - m.z * amp(site)) < 1e-10 * max(1, abs(m.lam) ** 6)


def test_truncated_eigenvalue_oracle():
    """Localized discrete states appear as eigenvalues of the truncated matrix."""
    p = ModelParams(3, 1, 3, 4.6)
    ev = np.linalg.eigvals(build_hamiltonian(p, 40).entries)
    for m in discrete_spectrum(p):
        if m.locclass is LocClass.LOCALIZED:
            assert np.min(np.abs(ev - m.z)) < 1e-8


def test_exceptional_point_flags_degenerate():
    p = ModelParams(3, 1, 3, 4.5)
    prof = eigenfunction(p, discrete_spectrum(p)[1], 10, normalization="max")
    assert prof.degenerate
    ric = ModelParams(3, 1, 3, 3.0)
    assert not eigenfunction(ric, discrete_spectrum(ric)[0], 10).degenerate


def test_ric_profile_uniform():
    p = ModelParams(3, 1, 3, 3.0)
    for m in discrete_spectrum(p):
        prof = eigenfunction(p, m, 41)
        for side in (1, -1):
            for sub in "AB":
                mag = np.abs(prof.lead(side, sub))
                assert np.ptp(mag) <= 1e-8 * mag.max()


def test_eigenfunction_rejects_non_root():
    p = ModelParams(3, 1, 3, 2.0)
    m = discrete_spectrum(p)[0]
    fake = type(m)(m.z + 0.5, m.lam, m.k, m.locclass, m.branch, m.sign)
    with pytest.raises(DomainError):
        eigenfunction(p, fake, 5)


def test_normalization_errors():
    amps = {CENTER: 0j, SiteIndex.lead(1, "A"): 1.0, SiteIndex.lead(-1, "A"): 1.0,
            SiteIndex.lead(1, "B"): 1.0, SiteIndex.lead(-1, "B"): 1.0}
    with pytest.raises(NormalizationError):
        _normalize(amps, "phi0")
    with pytest.raises(ParameterError):
        _normalize(amps, "l2")
    assert max(abs(v) for v in _normalize(amps, "max").values()) == 1.0


def test_growing_profile_keeps_phi0_normalization():
    """Anti-localized modes grow like |lambda|^n but phi0 is still usable."""
    p = ModelParams(3, 1, 3, 1.6)
    m = discrete_spectrum(p)[0]
    assert abs(m.lam) > 5
    prof = eigenfunction(p, m, 41)
    assert prof[CENTER] == pytest.approx(1.0)
    assert profile_residual(p, prof, 40) <= 1e-8 * np.abs(prof.vector()).max()
