"""Time evolution of single-site initial states and fits of the resulting measures.

``evolve`` integrates ``dpsi/dt = -i H psi`` on the truncated lattice with
fixed-step classical RK4 (compiled kernel when available).  The step is
verified by step halving.  The state is rescaled whenever its norm leaves
``[1e-6, 1e6]`` and the accumulated ``log`` of the rescalings is kept, so
strongly growing or decaying runs stay in range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import kernels
from .errors import DomainError, IntegratorError, ParameterError
from .model import CENTER, ModelParams, SiteIndex, reflection_bound, tridiagonal_bands

__all__ = [
    "DEFAULT_RECORD",
    "EvolutionTrace",
    "default_step",
    "evolve",
    "initial_state_measure",
    "log_measure",
    "PowerLawFit",
    "fit_power_law",
    "growth_rate",
    "DecayFit",
    "fit_decay",
    "default_window",
]

NORM_LOW = 1e-6
NORM_HIGH = 1e6
# P values below this fraction of the running maximum count as zero when
# comparing step sizes.
REL_FLOOR = 1e-8
MAX_HALVINGS = 6
# RMS scatter of log P about the fitted line above which a power law is not credible.
POWER_LAW_RESIDUAL_MAX = 0.1

DEFAULT_RECORD = tuple(
    SiteIndex.parse(s) for s in ("0", "1A", "-1A", "1B", "-1B")
)


@dataclass(frozen=True)
class EvolutionTrace:
    """Recorded amplitudes of one evolution.

    The true amplitude is ``amplitudes[site] * exp(log_scale)``.
    ``log_norm2`` is ``log`` of the true squared norm of the whole state.
    ``step_change`` is the largest relative change of any recorded ``P``
    when the step ``h`` was halved (``nan`` if verification was skipped).
    """

    times: np.ndarray
    amplitudes: dict
    log_scale: np.ndarray
    log_norm2: np.ndarray
    params: ModelParams
    n_cells: int
    initial_site: SiteIndex
    h: float
    step_change: float = math.nan
    backend: str = ""

    @property
    def sites(self) -> tuple:
        return tuple(self.amplitudes)

    def true_amplitude(self, site) -> np.ndarray:
        site = SiteIndex.parse(site)
        return self.amplitudes[site] * np.exp(self.log_scale)

    def total_probability(self) -> np.ndarray:
        return np.exp(self.log_norm2)


def default_step(params: ModelParams) -> float:
    """Default internal step ``0.02 / (t1 + t2 + g + gamma)``."""
    return 0.02 / (params.t1 + params.t2 + params.g + params.gamma)


def _run(diag, off, n_cells, start, idx, n_out, n_sub, h, propagate):
    dim = diag.shape[0]
    psi = np.zeros(dim, dtype=np.complex128)
    psi[start] = 1.0
    amps = np.empty((n_out + 1, len(idx)), dtype=np.complex128)
    log_scale = np.zeros(n_out + 1)
    log_norm2 = np.zeros(n_out + 1)
    amps[0] = psi[idx]
    acc = 0.0
    for i in range(1, n_out + 1):
        propagate(diag, off, psi, h, n_sub)
        nrm = float(np.linalg.norm(psi))
        if not math.isfinite(nrm) or nrm == 0.0:
            raise IntegratorError(
                "state norm became non-finite or zero",
                {"output_index": i, "h": h, "norm": nrm},
            )
        if nrm < NORM_LOW or nrm > NORM_HIGH:
            psi /= nrm
            acc += math.log(nrm)
            nrm = 1.0
        amps[i] = psi[idx]
        log_scale[i] = acc
        log_norm2[i] = 2.0 * (math.log(nrm) + acc)
    return amps, log_scale, log_norm2


def _log_p(amps, log_scale):
    with np.errstate(divide="ignore"):
        return 2.0 * (np.log(np.abs(amps)) + log_scale[:, None])


def _step_change(run_a, run_b) -> float:
    la = _log_p(run_a[0], run_a[1])
    lb = _log_p(run_b[0], run_b[1])
    # Denominator: the finer P, floored at REL_FLOOR times the running maximum
    # over all recorded sites (sites other than the initial one start at P = 0).
    ref = np.maximum.accumulate(lb.max(axis=1)) + math.log(REL_FLOOR)
    den = np.maximum(lb, ref[:, None])
    diff = np.abs(np.exp(la - den) - np.exp(lb - den))
    return float(np.max(diff))


def evolve(
    params: ModelParams,
    n_cells: Optional[int] = None,
    initial_site=CENTER,
    t_max: float = 50.0,
    dt_out: float = 0.05,
    tol: float = 1e-6,
    h: Optional[float] = None,
    record_sites: Optional[Iterable] = None,
    backend: Optional[str] = None,
    verify: bool = True,
) -> EvolutionTrace:
    """Evolve the unit vector at ``initial_site`` up to ``t_max``.

    Parameters
    ----------
    params : ModelParams
    n_cells : int, optional
        Lead length.  Defaults to the reflection bound for ``t_max``; smaller
        values are rejected.
    initial_site : SiteIndex or str
    t_max, dt_out : float
        Final time and output spacing.  The internal step divides ``dt_out``.
    tol : float
        Required relative agreement of every recorded ``P`` between step
        ``h`` and ``h/2``.  ``h`` is halved (at most ``MAX_HALVINGS`` times)
        until this holds.
    h : float, optional
        Initial internal step; defaults to :func:`default_step`.
    record_sites : iterable, optional
        Sites to record; default is the center, ``+-1A`` and ``+-1B``.  The
        initial site is always added.
    backend : {"compiled", "python"}, optional
    verify : bool
        Skip the step-halving check when False.

    Returns
    -------
    EvolutionTrace

    Raises
    ------
    ParameterError
        Bad inputs, including ``n_cells`` below the reflection bound.
    IntegratorError
        If step halving does not reach ``tol``.
    """
    if not (t_max > 0 and dt_out > 0 and tol > 0):
        raise ParameterError("t_max, dt_out and tol must be positive")
    bound = reflection_bound(params, t_max)
    if n_cells is None:
        n_cells = bound
    elif int(n_cells) != n_cells or n_cells < bound:
        raise ParameterError(
            f"n_cells = {n_cells} is below the reflection bound {bound} for t_max = {t_max}"
        )
    n_cells = int(n_cells)
    initial_site = SiteIndex.parse(initial_site)
    sites = list(DEFAULT_RECORD if record_sites is None else (SiteIndex.parse(s) for s in record_sites))
    if initial_site not in sites:
        sites.insert(0, initial_site)
    idx = np.array([s.to_index(n_cells) for s in sites])
    start = initial_site.to_index(n_cells)

    n_out = int(round(t_max / dt_out))
    if abs(n_out * dt_out - t_max) > 1e-9 * t_max:
        raise ParameterError("t_max must be a multiple of dt_out")
    h0 = default_step(params) if h is None else float(h)
    if not h0 > 0:
        raise ParameterError("h must be positive")
    n_sub = max(1, math.ceil(dt_out / h0 - 1e-9))
    propagate = kernels.get_propagator(backend)
    name = backend or kernels.BACKEND
    diag, off = tridiagonal_bands(params, n_cells)

    coarse = _run(diag, off, n_cells, start, idx, n_out, n_sub, dt_out / n_sub, propagate)
    change = math.nan
    if verify:
        history = []
        for _ in range(MAX_HALVINGS + 1):
            fine = _run(diag, off, n_cells, start, idx, n_out, 2 * n_sub, dt_out / (2 * n_sub), propagate)
            change = _step_change(coarse, fine)
            history.append((dt_out / n_sub, change))
            if change < tol:
                break
            coarse, n_sub = fine, 2 * n_sub
        else:
            raise IntegratorError(
                f"step halving did not reach tol = {tol:g}",
                {"history": history, "n_cells": n_cells},
            )
    amps, log_scale, log_norm2 = coarse
    times = np.arange(n_out + 1) * dt_out
    for arr in (times, log_scale, log_norm2):
        arr.setflags(write=False)
    table = {}
    for j, s in enumerate(sites):
        col = np.ascontiguousarray(amps[:, j])
        col.setflags(write=False)
        table[s] = col
    return EvolutionTrace(
        times, table, log_scale, log_norm2, params, n_cells, initial_site,
        dt_out / n_sub, change, name,
    )


def log_measure(trace: EvolutionTrace, site=None) -> tuple[np.ndarray, np.ndarray]:
    """``(t, log P)`` at ``site`` (default: the initial site)."""
    site = trace.initial_site if site is None else SiteIndex.parse(site)
    try:
        amp = trace.amplitudes[site]
    except KeyError:
        raise KeyError(f"site {site} was not recorded; have {[str(s) for s in trace.sites]}") from None
    with np.errstate(divide="ignore"):
        return trace.times, 2.0 * (np.log(np.abs(amp)) + trace.log_scale)


def initial_state_measure(trace: EvolutionTrace, site=None) -> tuple[np.ndarray, np.ndarray]:
    """``(t, P)`` with ``P = |<site| exp(-iHt) |initial>|^2``.

    For ``site`` equal to the initial site (the default) this is the initial
    state measure; other recorded sites give transfer probabilities.

    Raises
    ------
    KeyError
        If ``site`` was not recorded.
    """
    t, lp = log_measure(trace, site)
    return t, np.exp(lp)


def default_window(times: np.ndarray) -> tuple[float, float]:
    """Drop ``t < 10`` transients and the last 10% of the run."""
    return 10.0, 0.9 * float(times[-1])


def _windowed(series, window):
    t, p = (np.asarray(a, dtype=float) for a in series)
    lo, hi = default_window(t) if window is None else window
    if not lo < hi:
        raise ParameterError(f"empty fit window {window}")
    mask = (t >= lo) & (t <= hi)
    if mask.sum() < 3:
        raise ParameterError(f"fewer than 3 samples in window ({lo}, {hi})")
    p = p[mask]
    if np.any(~(p > 0)):
        raise DomainError("P must be positive inside the fit window")
    return (lo, hi), t[mask], p


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares line ``log P = slope * log t + intercept``.

    ``residual`` is the RMS deviation of ``log P`` from the line.  An EP of
    order ``N`` gives ``P ~ t^(2N - 2)``, hence ``implied_ep_order``.
    """

    window: tuple
    slope: float
    intercept: float
    residual: float

    @property
    def implied_ep_order(self) -> float:
        return (self.slope + 2.0) / 2.0

    @property
    def is_power_law(self) -> bool:
        return self.residual <= POWER_LAW_RESIDUAL_MAX

    def as_dict(self) -> dict:
        return {
            "window": list(self.window),
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "implied_ep_order": self.implied_ep_order,
            "is_power_law": self.is_power_law,
        }


def fit_power_law(series: Sequence, window: Optional[tuple] = None) -> PowerLawFit:
    """Fit ``P ~ t**slope`` on ``window`` (default :func:`default_window`).

    ``series`` is a ``(t, P)`` pair as returned by :func:`initial_state_measure`.
    """
    window, t, p = _windowed(series, window)
    if t[0] <= 0:
        raise DomainError("power-law window must start at t > 0")
    x, y = np.log(t), np.log(p)
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    rms = math.sqrt(float(res[0]) / len(x)) if len(res) else 0.0
    return PowerLawFit(tuple(map(float, window)), float(slope), float(intercept), rms)


def growth_rate(series: Sequence, window: Optional[tuple] = None) -> float:
    """Slope of ``ln P`` against ``t`` on ``window``."""
    _, t, p = _windowed(series, window)
    slope, _ = np.polyfit(t, np.log(p), 1)
    return float(slope)


@dataclass(frozen=True)
class DecayFit:
    """Fit of ``P = P_inf (1 + 2 D cos(E t + theta) exp(-Gamma t / 2))^2``.

    This is the two-pole form of a state that keeps weight ``P_inf`` on a
    stationary mode and leaks the rest through a resonance at ``E - i Gamma/2``.
    """

    window: tuple
    plateau: float
    amplitude: float
    energy: float
    phase: float
    rate: float
    residual: float

    def model(self, t):
        t = np.asarray(t, dtype=float)
        osc = 2.0 * self.amplitude * np.cos(self.energy * t + self.phase) * np.exp(-0.5 * self.rate * t)
        return self.plateau * (1.0 + osc) ** 2

    def as_dict(self) -> dict:
        return {
            "window": list(self.window),
            "plateau": self.plateau,
            "amplitude": self.amplitude,
            "energy": self.energy,
            "phase": self.phase,
            "rate": self.rate,
            "residual": self.residual,
        }


def fit_decay(series: Sequence, window: Optional[tuple] = (5.0, 40.0),
              energy_guess: Optional[float] = None) -> DecayFit:
    """Least-squares fit of the damped-beat form on ``window``.

    The oscillation frequency is seeded from the dominant peak of the
    spectrum of ``P`` (or ``energy_guess``) and the phase from several
    starts; the best fit by residual is kept.
    """
    window, t, p = _windowed(series, window)
    plateau0 = float(np.median(p[len(p) // 2:]))
    if energy_guess is None:
        dev = p - p.mean()
        freqs = np.fft.rfftfreq(len(t), t[1] - t[0]) * 2.0 * math.pi
        spec = np.abs(np.fft.rfft(dev * np.hanning(len(dev))))
        spec[0] = 0.0
        energy_guess = float(freqs[int(np.argmax(spec))])

    def resid(x):
        pinf, d, e, th, gam = x
        osc = 2.0 * d * np.cos(e * t + th) * np.exp(-0.5 * gam * t)
        return (pinf * (1.0 + osc) ** 2 - p) / max(plateau0, 1e-300)

    best = None
    for th0 in np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False):
        x0 = [plateau0, 0.5, energy_guess, th0, 0.2]
        sol = least_squares(
            resid, x0,
            bounds=([0.0, 0.0, 0.0, -np.inf, 0.0], [np.inf, np.inf, np.inf, np.inf, np.inf]),
        )
        if best is None or sol.cost < best.cost:
            best = sol
    pinf, d, e, th, gam = best.x
    rms = math.sqrt(2.0 * best.cost / len(t))
    return DecayFit(tuple(map(float, window)), float(pinf), float(d), float(e),
                    float(math.remainder(th, 2.0 * math.pi)), float(gam), rms)
