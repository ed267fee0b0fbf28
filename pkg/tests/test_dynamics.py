import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from ptssh import kernels
from ptssh.dynamics import (
    DecayFit,
    default_step,
    evolve,
    fit_decay,
    fit_power_law,
    growth_rate,
    initial_state_measure,
    log_measure,
)
from ptssh.errors import DomainError, IntegratorError, ParameterError
from ptssh.model import ModelParams, SiteIndex, build_hamiltonian, reflection_bound

P313 = ModelParams(3.0, 1.0, 3.0)


def test_initial_probability_is_one():
    tr = evolve(P313.with_gamma(1.6), t_max=2.0)
    t, p = initial_state_measure(tr)
    assert t[0] == 0.0 and p[0] == 1.0
    assert tr.n_cells == reflection_bound(P313.with_gamma(1.6), 2.0)
    _, p1b = initial_state_measure(tr, "1B")
    assert p1b[0] == 0.0


def test_matches_matrix_exponential():
    """RK4 trace equals exp(-iHt) on the same truncated lattice."""
    p = P313.with_gamma(4.5)
    tr = evolve(p, t_max=3.0, dt_out=0.5, tol=1e-9)
    ham = build_hamiltonian(p, tr.n_cells)
    psi0 = np.zeros(ham.dim, dtype=complex)
    psi0[SiteIndex.parse("0").to_index(tr.n_cells)] = 1.0
    for site in ("0", "1A", "-1B"):
        amp = tr.true_amplitude(site)
        j = SiteIndex.parse(site).to_index(tr.n_cells)
        for i, t in enumerate(tr.times):
            exact = (scipy.linalg.expm(-1j * ham.entries * t) @ psi0)[j]
            assert abs(amp[i] - exact) <= 1e-8 * max(1.0, abs(exact))


def test_hermitian_unitarity():
    tr = evolve(P313, t_max=20.0)
    assert np.max(np.abs(tr.total_probability() - 1.0)) < 1e-8
    assert tr.step_change < 1e-6


def test_below_reflection_bound_rejected():
    with pytest.raises(ParameterError, match="reflection"):
        evolve(P313.with_gamma(4.5), n_cells=10, t_max=20.0)


@pytest.mark.parametrize("kwargs", [{"t_max": -1.0}, {"dt_out": 0.0}, {"tol": 0.0}, {"t_max": 1.03}, {"h": -0.1}])
def test_bad_run_arguments(kwargs):
    with pytest.raises(ParameterError):
        evolve(P313, **{"t_max": 1.0, **kwargs})


def test_unrecorded_site_raises_keyerror():
    tr = evolve(P313, t_max=1.0, record_sites=["0"])
    with pytest.raises(KeyError):
        initial_state_measure(tr, "2A")
    with pytest.raises(KeyError):
        log_measure(tr, "1B")


def test_initial_site_is_always_recorded():
    tr = evolve(P313.with_gamma(1.0), initial_site="1B", t_max=1.0, record_sites=["0"])
    assert tr.initial_site == SiteIndex.parse("1B")
    assert set(map(str, tr.sites)) == {"0", "1B"}
    assert initial_state_measure(tr)[1][0] == 1.0


def test_trace_arrays_read_only():
    tr = evolve(P313, t_max=1.0)
    with pytest.raises(ValueError):
        tr.times[0] = 1.0
    with pytest.raises(ValueError):
        tr.amplitudes[SiteIndex.parse("0")][0] = 0.0


def test_lattice_doubling_does_not_change_trace():
    p = P313.with_gamma(2.5)
    a = evolve(p, t_max=15.0, verify=False)
    b = evolve(p, n_cells=2 * a.n_cells, t_max=15.0, verify=False)
    pa, pb = initial_state_measure(a)[1], initial_state_measure(b)[1]
    assert np.max(np.abs(pa - pb)) < 1e-10


@pytest.mark.skipif("compiled" not in kernels.BACKENDS, reason="extension not built")
def test_backends_agree_on_trace():
    p = P313.with_gamma(4.0)
    a = evolve(p, t_max=5.0, backend="compiled", verify=False)
    b = evolve(p, t_max=5.0, backend="python", verify=False)
    assert a.backend == "compiled" and b.backend == "python"
    for s in a.sites:
        assert np.allclose(a.amplitudes[s], b.amplitudes[s], rtol=1e-10, atol=1e-12)


def test_step_is_halved_when_coarse():
    p = P313.with_gamma(1.0)
    tr = evolve(p, t_max=4.0, dt_out=0.2, h=0.2)
    assert tr.h < 0.2 and tr.step_change < 1e-6


def test_integrator_error_carries_history():
    with pytest.raises(IntegratorError) as exc:
        evolve(P313, t_max=0.5, dt_out=0.5, h=0.5, tol=1e-300)
    assert len(exc.value.diagnostics["history"]) >= 2


def test_renormalization_keeps_growth_finite():
    """Exponential growth is tracked in ``log_scale`` instead of overflowing."""
    p = P313.with_gamma(4.6)
    tr = evolve(p, t_max=30.0, verify=False)
    assert tr.log_scale[-1] > 0
    _, lp = log_measure(tr)
    assert np.all(np.isfinite(lp))
    assert growth_rate(initial_state_measure(tr), (15.0, 30.0)) == pytest.approx(1.95, rel=0.05)


def test_ric_state_stays_bounded():
    tr = evolve(P313.with_gamma(3.0), t_max=40.0)
    t, prob = initial_state_measure(tr)
    # the envelope neither grows nor decays: beat maxima repeat
    peaks = [prob[(t >= a) & (t < a + 10.0)].max() for a in (10.0, 20.0, 30.0)]
    assert max(peaks) < 10.0
    assert max(peaks) - min(peaks) < 1e-3 * max(peaks)


def test_default_step_scaling():
    assert default_step(P313) == pytest.approx(0.02 / 7.0)


# ---------------------------------------------------------------------------
# Fits on synthetic data


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 10.0), st.floats(-3.0, 3.0))
def test_power_law_fit_exact(slope, log_a):
    t = np.linspace(1.0, 80.0, 400)
    fit = fit_power_law((t, np.exp(log_a) * t ** slope), (10.0, 80.0))
    assert fit.slope == pytest.approx(slope, abs=1e-9)
    assert fit.intercept == pytest.approx(log_a, abs=1e-7)
    assert fit.is_power_law and fit.residual < 1e-9
    assert fit.implied_ep_order == pytest.approx((slope + 2) / 2)


def test_oscillation_flagged_as_not_power_law():
    t = np.linspace(0.0, 80.0, 1601)
    fit = fit_power_law((t, 0.5 + 0.49 * np.cos(3.0 * t)))
    assert not fit.is_power_law


@settings(max_examples=30, deadline=None)
@given(st.floats(-2.0, 3.0))
def test_growth_rate_exact(rate):
    t = np.linspace(0.0, 30.0, 301)
    assert growth_rate((t, 1e-3 * np.exp(rate * t)), (5.0, 25.0)) == pytest.approx(rate, abs=1e-9)


def test_decay_fit_recovers_parameters():
    truth = DecayFit((5.0, 40.0), 0.2, 0.6, 4.1, 0.7, 0.25, 0.0)
    t = np.linspace(0.0, 50.0, 1001)
    fit = fit_decay((t, truth.model(t)))
    assert fit.rate == pytest.approx(0.25, rel=1e-4)
    assert fit.plateau == pytest.approx(0.2, rel=1e-4)
    assert fit.energy == pytest.approx(4.1, rel=1e-4)
    assert fit.residual < 1e-6


def test_fits_reject_nonpositive_p():
    t = np.linspace(0.0, 50.0, 101)
    p = np.ones_like(t)
    p[40] = 0.0
    for fn in (fit_power_law, growth_rate, fit_decay):
        with pytest.raises(DomainError):
            fn((t, p), (10.0, 40.0))


def test_fit_window_validation():
    t = np.linspace(0.0, 10.0, 11)
    with pytest.raises(ParameterError):
        fit_power_law((t, t + 1), (5.0, 5.0))
    with pytest.raises(ParameterError):
        fit_power_law((t, t + 1), (5.1, 5.9))


def test_hermitian_growth_rate_zero():
    tr = evolve(P313, t_max=40.0, verify=False)
    t, prob = initial_state_measure(tr)
    assert abs(growth_rate((t, prob), (10.0, 36.0))) < 0.05
    assert not fit_power_law((t, prob)).is_power_law or abs(fit_power_law((t, prob)).slope) < 0.5
