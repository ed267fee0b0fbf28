"""Exceptional points, PT regions, the gap phase diagram and Puiseux expansions.

All closed forms are written for general ``t2``; the phase diagram works in
units of ``t2 = 1``.
"""
from __future__ import annotations

import cmath
import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ClassificationError, DomainError, ExpansionError, ParameterError
from .model import ModelParams
from .spectrum import GAMMA_FLOOR, KAPPA_TOL, DiscreteSpectrum, LocClass, band_edges, discrete_spectrum

__all__ = [
    "EPS_Z",
    "EPS_GAMMA",
    "EpCatalog",
    "ep_catalog",
    "discriminant",
    "discriminant_scale",
    "Region",
    "RegionLabel",
    "classify_region",
    "sweep_regions",
    "region_sequence",
    "PhaseDiagram",
    "phase_label",
    "phase_diagram",
    "z2_pm",
    "ep4_condition_residual",
    "puiseux_epII",
    "puiseux_gap1",
    "root_exponent",
]

EPS_Z = 1e-9
EPS_GAMMA = 1e-6
# Relative tolerance for "g lies on an analytic curve".
CURVE_TOL = 1e-9


# ---------------------------------------------------------------------------
# Catalog


@dataclass(frozen=True)
class EpCatalog:
    """Closed-form exceptional points and thresholds at fixed ``(t1, t2, g)``.

    Fields are ``None`` where the formula does not apply (for instance
    ``gamma_II`` and both gap couplings when ``t1 <= t2``).
    """

    t1: float
    t2: float
    g: float
    gamma_I_minus: Optional[float]
    gamma_I_plus: Optional[float]
    gamma_II: Optional[float]
    gamma_ric: float
    ric_exists: bool
    g_gap1: Optional[float]
    g_gap2: Optional[float]
    gamma_gap_plus: Optional[float]
    gamma_gap_minus: Optional[float]

    @property
    def on_gap1(self) -> bool:
        return self.g_gap1 is not None and abs(self.g - self.g_gap1) <= CURVE_TOL * max(1.0, self.g)

    @property
    def on_gap2(self) -> bool:
        return self.g_gap2 is not None and abs(self.g - self.g_gap2) <= CURVE_TOL * max(1.0, self.g)

    @property
    def gapped(self) -> bool:
        """True when a PT gap separates Regions I and II."""
        return (
            self.g_gap1 is not None
            and self.g_gap2 is not None
            and self.g_gap2 < self.g < self.g_gap1
            and not (self.on_gap1 or self.on_gap2)
        )

    def boundary_values(self) -> dict:
        """EP values of gamma that mark region boundaries at this ``(t1, t2, g)``."""
        out = {}
        if self.gamma_I_minus is not None and self.gamma_I_minus > 0:
            out["gamma_I_minus"] = self.gamma_I_minus
        if self.gamma_I_plus is not None:
            out["gamma_I_plus"] = self.gamma_I_plus
        if self.gamma_II is not None:
            out["gamma_II"] = self.gamma_II
        if self.on_gap1 or self.on_gap2:
            if self.gamma_gap_minus is not None:
                out["gamma_gap_minus"] = self.gamma_gap_minus
            if self.gamma_gap_plus is not None:
                out["gamma_gap_plus"] = self.gamma_gap_plus
        return out

    def as_dict(self) -> dict:
        keys = (
            "t1 t2 g gamma_I_minus gamma_I_plus gamma_II gamma_ric ric_exists "
            "g_gap1 g_gap2 gamma_gap_plus gamma_gap_minus"
        ).split()
        return {k: getattr(self, k) for k in keys}


def ep_catalog(t1: float, t2: float, g: float) -> EpCatalog:
    """Evaluate every closed-form EP and gap threshold at ``(t1, t2, g)``."""
    p = ModelParams(t1, t2, g)
    t1, t2, g = p.t1, p.t2, p.g
    t1s, t2s, gs = t1 * t1, t2 * t2, g * g

    rad = 2.0 * gs + t2s - t1s
    if rad >= 0.0:
        r = math.sqrt(rad)
        gi_minus = abs(-t2 + r)
        gi_plus = t2 + r
    else:
        gi_minus = gi_plus = None

    if t1 > t2:
        d = t1s - t2s
        gamma_ii = math.sqrt(2.0) * g * t1 / math.sqrt(d)
        g_gap1 = t1 * math.sqrt(d) / (math.sqrt(2.0) * t2)
        g_gap2 = math.sqrt(d / 2.0)
    else:
        gamma_ii = g_gap1 = g_gap2 = None

    # Roots of P_s''(0) = 0 in gamma^2.  Like the gap lines they are only
    # reported for t1 > t2; for t1 <= t2 the bands never open a gap.
    base = t2s + gs
    disc = base * base + t1s * (2.0 * gs - t1s)
    gap_plus = gap_minus = None
    if t1 > t2 and disc >= 0.0:
        sq = math.sqrt(disc)
        wp = base + sq
        # Product form avoids cancellation in the smaller root.
        wm = (t1s * t1s - 2.0 * gs * t1s) / wp if wp != 0 else base - sq
        if wp >= 0.0:
            gap_plus = math.sqrt(wp)
        if wm >= 0.0:
            gap_minus = math.sqrt(wm)

    ric_exists = math.sqrt(t1 * max(t1 - t2, 0.0)) < g < math.sqrt(t1 * (t1 + t2))
    return EpCatalog(
        t1, t2, g, gi_minus, gi_plus, gamma_ii, t1, ric_exists, g_gap1, g_gap2, gap_plus, gap_minus
    )


# ---------------------------------------------------------------------------
# Discriminant


def discriminant(params: ModelParams) -> float:
    """Discriminant of ``P_s`` up to a positive overall constant.

    ``(t1^2 - gamma^2)^4 (2 g^2 t1^2 + (t2^2 - t1^2) gamma^2) Q^2`` with
    ``Q = (t1^2 - 2g^2)^2 - 2 (2g^2 - t1^2 + 2 t2^2) gamma^2 + gamma^4``.

    The full discriminant also carries ``(t1^2 - t2^2 - 2 g^2)``, whose zero
    (``g = g_gap2``) is a double root at ``z = 0`` that this expression does
    not vanish on.
    """
    t1s, t2s, gs = params.t1 ** 2, params.t2 ** 2, params.g ** 2
    gms = params.gamma ** 2
    q = (t1s - 2.0 * gs) ** 2 - 2.0 * (2.0 * gs - t1s + 2.0 * t2s) * gms + gms * gms
    return (t1s - gms) ** 4 * (2.0 * gs * t1s + (t2s - t1s) * gms) * q * q


def discriminant_scale(params: ModelParams) -> float:
    """Magnitude scale of :func:`discriminant` (same factors with absolute-valued terms)."""
    t1s, t2s, gs = params.t1 ** 2, params.t2 ** 2, params.g ** 2
    gms = params.gamma ** 2
    q = (t1s + 2.0 * gs) ** 2 + 2.0 * (2.0 * gs + t1s + 2.0 * t2s) * gms + gms * gms
    return (t1s + gms) ** 4 * (2.0 * gs * t1s + (t2s + t1s) * gms) * q * q


# ---------------------------------------------------------------------------
# Region classification


class Region(enum.Enum):
    PT_LOW = "PTLow"
    IA = "IA"
    IB = "IB"
    RIC = "RIC"
    GAP = "Gap"
    II = "II"
    BOUNDARY_EP = "BoundaryEP"


@dataclass(frozen=True)
class RegionLabel:
    """Region of one parameter point.

    ``ep`` names the catalog entry for ``BoundaryEP``; ``complex_modes`` lists
    the energies with nonzero imaginary part.
    """

    value: Region
    ep: Optional[str] = None
    complex_modes: tuple = field(default=())

    def __str__(self) -> str:
        return self.value.value


def _is_real(z: complex) -> bool:
    return abs(z.imag) <= EPS_Z * max(1.0, abs(z))


def _has_ric(params: ModelParams, spec: DiscreteSpectrum, kappa_tol: float) -> bool:
    bands = band_edges(params)
    for m in spec:
        if abs(m.k.imag) <= kappa_tol and _is_real(m.z) and any(b.contains(m.z.real) for b in bands):
            return True
    return False


def classify_region(params: ModelParams, kappa_tol: float = KAPPA_TOL,
                    eps_gamma: float = EPS_GAMMA) -> RegionLabel:
    """Assign one of PTLow, IA, IB, RIC, Gap, II or BoundaryEP.

    Order of the tests:

    1. ``gamma`` within ``eps_gamma`` of a catalog EP (the RIC value is not an
       EP) gives ``BoundaryEP``.
    2. All energies real: ``RIC`` if some mode is delocalized with its energy
       strictly inside a band; ``PTLow`` below ``gamma_I_minus`` when
       ``g > t1/sqrt(2)`` (or at ``gamma = 0``); otherwise ``Gap``.
    3. Some energy complex: ``II`` above ``gamma_II``, otherwise ``IA``/``IB``
       from the sign of ``Im k`` of the complex modes.

    Below ``g = t1/sqrt(2)`` a pair of roots enters from infinity as complex
    for any ``gamma > 0``, so ``gamma = 0`` there is reported as a boundary.

    Raises
    ------
    ClassificationError
        If the complex modes disagree on the sign of ``Im k`` or have
        ``|Im k| <= kappa_tol``.
    """
    cat = ep_catalog(params.t1, params.t2, params.g)
    gam = params.gamma
    for name, value in cat.boundary_values().items():
        if abs(gam - value) <= eps_gamma:
            spec = discrete_spectrum(params, kappa_tol)
            return RegionLabel(Region.BOUNDARY_EP, name, tuple(m.z for m in spec if not _is_real(m.z)))

    below_blue = params.g < params.t1 / math.sqrt(2.0)
    spec = discrete_spectrum(params, kappa_tol)
    cplx = tuple(m for m in spec if not _is_real(m.z))

    if gam < GAMMA_FLOOR:
        if below_blue:
            return RegionLabel(Region.BOUNDARY_EP, "gamma_zero")
        return RegionLabel(Region.PT_LOW)

    if not cplx:
        if _has_ric(params, spec, kappa_tol):
            return RegionLabel(Region.RIC)
        if not below_blue and cat.gamma_I_minus is not None and gam < cat.gamma_I_minus:
            return RegionLabel(Region.PT_LOW)
        return RegionLabel(Region.GAP)

    energies = tuple(m.z for m in cplx)
    if cat.gamma_II is not None and gam > cat.gamma_II:
        return RegionLabel(Region.II, complex_modes=energies)
    kappas = [m.k.imag for m in cplx]
    if all(k < -kappa_tol for k in kappas):
        return RegionLabel(Region.IA, complex_modes=energies)
    if all(k > kappa_tol for k in kappas):
        return RegionLabel(Region.IB, complex_modes=energies)
    raise ClassificationError(
        f"complex modes at {params} have Im k = {kappas}; cannot separate IA from IB",
        spectrum=spec,
    )


def sweep_regions(params: ModelParams, gammas) -> list[RegionLabel]:
    """Classify every ``gamma`` in ``gammas`` at fixed ``(t1, t2, g)``."""
    return [classify_region(params.with_gamma(float(x))) for x in gammas]


def region_sequence(gammas, labels) -> list[tuple[Region, float, float]]:
    """Collapse a sweep into ``(region, first gamma, last gamma)`` runs.

    ``BoundaryEP`` points are skipped so that an EP landing on a grid point
    does not split the sequence.
    """
    runs: list[list] = []
    for x, lab in zip(gammas, labels):
        if lab.value is Region.BOUNDARY_EP:
            continue
        if runs and runs[-1][0] is lab.value:
            runs[-1][2] = float(x)
        else:
            runs.append([lab.value, float(x), float(x)])
    return [tuple(r) for r in runs]


# ---------------------------------------------------------------------------
# Phase diagram (t2 = 1)

GAPPED = "gapped"
UNGAPPED = "ungapped"
NO_LOW_PT = "no-low-PT"
BOUNDARY = "boundary"


def _phase_labels(t1, g):
    t1 = np.asarray(t1, dtype=float)
    g = np.asarray(g, dtype=float)
    with np.errstate(invalid="ignore"):
        d = t1 * t1 - 1.0
        g1 = np.where(d > 0, t1 * np.sqrt(np.abs(d)) / math.sqrt(2.0), np.nan)
        g2 = np.where(d > 0, np.sqrt(np.abs(d) / 2.0), np.nan)
    tol = CURVE_TOL * np.maximum(1.0, g)
    on_curve = (np.abs(g - g1) <= tol) | (np.abs(g - g2) <= tol)
    gapped = (g > g2) & (g < g1) & ~on_curve
    below_blue = g < t1 / math.sqrt(2.0)
    labels = np.where(below_blue, NO_LOW_PT, UNGAPPED).astype(object)
    labels[gapped] = GAPPED
    labels[on_curve] = BOUNDARY
    return labels


def phase_label(t1: float, g: float) -> str:
    """Gap phase of one point of the ``(t1/t2, g/t2)`` plane.

    ``gapped`` for ``g_gap2 < g < g_gap1``, ``boundary`` on either curve,
    otherwise ``no-low-PT`` below ``g = t1/sqrt(2)`` (PT broken for any
    ``gamma > 0``) and ``ungapped`` above it.
    """
    if t1 <= 0 or g < 0:
        raise ParameterError("t1 must be positive and g non-negative")
    return str(_phase_labels(t1, g)[()])


@dataclass(frozen=True)
class PhaseDiagram:
    """Labels on a ``(g, t1)`` grid: ``labels[i, j]`` is at ``g[i]``, ``t1[j]``.

    ``curves`` holds ``g_gap1``, ``g_gap2`` and ``g_blue = t1/sqrt(2)``
    sampled on ``t1`` (NaN where a curve is undefined).
    """

    t1: np.ndarray
    g: np.ndarray
    labels: np.ndarray
    curves: dict

    def cells(self):
        """Yield ``(t1, g, label)`` in row-major order."""
        for i, gv in enumerate(self.g):
            for j, tv in enumerate(self.t1):
                yield float(tv), float(gv), self.labels[i, j]


def phase_diagram(t1_range=(0.0, 4.0), g_range=(0.0, 4.0), resolution=201) -> PhaseDiagram:
    """Tabulate :func:`phase_label` on a regular grid (vectorized).

    ``resolution`` is the number of points per axis, or a pair
    ``(n_t1, n_g)``.  The lower ends of the ranges may be zero, in which case
    the first row/column is skipped where a label is undefined (``t1 = 0``).
    """
    if np.ndim(resolution) == 0:
        n_t1 = n_g = int(resolution)
    else:
        n_t1, n_g = (int(r) for r in resolution)
    if n_t1 < 2 or n_g < 2:
        raise ParameterError("resolution must be at least 2 per axis")
    (a, b), (c, d) = t1_range, g_range
    if not (0 <= a < b and 0 <= c < d):
        raise ParameterError("ranges must be increasing and non-negative")
    t1 = np.linspace(a, b, n_t1)
    if t1[0] == 0.0:
        t1 = t1[1:]
    g = np.linspace(c, d, n_g)
    tt, gg = np.meshgrid(t1, g)
    labels = _phase_labels(tt, gg)
    with np.errstate(invalid="ignore"):
        dd = t1 * t1 - 1.0
        curves = {
            "g_gap1": np.where(dd > 0, t1 * np.sqrt(np.abs(dd)) / math.sqrt(2.0), np.nan),
            "g_gap2": np.where(dd > 0, np.sqrt(np.abs(dd) / 2.0), np.nan),
            "g_blue": t1 / math.sqrt(2.0),
        }
    return PhaseDiagram(t1, g, labels, curves)


# ---------------------------------------------------------------------------
# Gap-closing conditions


def z2_pm(params: ModelParams) -> tuple[complex, complex]:
    """The two non-zero energies on the ``g = g_gap2`` line.

    ``z_{2,+-} = +- i sqrt((t1^2 - gamma^2)(t2^2 - gamma^2)) / gamma`` with the
    principal square root: real for ``t2 < gamma < t1``, imaginary outside.
    A ``UserWarning`` is issued when ``g`` is off the line.
    """
    t1, t2, gam = params.t1, params.t2, params.gamma
    if gam == 0.0:
        raise DomainError("z2_pm is singular at gamma = 0")
    cat = ep_catalog(t1, t2, params.g)
    if not cat.on_gap2:
        warnings.warn(
            f"z2_pm is exact only on g = g_gap2 (g = {params.g}, g_gap2 = {cat.g_gap2})",
            UserWarning,
            stacklevel=2,
        )
    root = cmath.sqrt(complex((t1 * t1 - gam * gam) * (t2 * t2 - gam * gam)))
    zp = 1j * root / gam
    return zp, -zp


def ep4_condition_residual(params: ModelParams) -> tuple[float, float]:
    """Factors ``(2g^2 - t1^2 + t2^2, 2 g^2 t2^2 - t1^2 (t1^2 - t2^2))``.

    The first vanishes on the ``g_gap2`` family, the second on ``g_gap1``.
    """
    t1s, t2s, gs = params.t1 ** 2, params.t2 ** 2, params.g ** 2
    return 2.0 * gs - t1s + t2s, 2.0 * gs * t2s - t1s * (t1s - t2s)


# ---------------------------------------------------------------------------
# Puiseux expansions


def puiseux_epII(params: ModelParams, gamma: Optional[float] = None) -> complex:
    """Leading square-root term of the pair of roots that meet at ``z = 0`` at ``gamma_II``.

    Returns the ``+`` member; the pair is ``+-`` the returned value.
    ``gamma`` defaults to ``params.gamma``.
    """
    t1, t2, g = params.t1, params.t2, params.g
    gam = params.gamma if gamma is None else float(gamma)
    if t1 <= t2:
        raise DomainError("gamma_II exists only for t1 > t2")
    d = t1 * t1 - t2 * t2
    denom = 2.0 * g * g * t2 * t2 - t1 * t1 * d
    if abs(denom) <= 1e-12 * t1 * t1 * d:
        raise ExpansionError("leading Puiseux coefficient diverges on g = g_gap1 (higher-order EP)")
    gamma_ii = math.sqrt(2.0) * g * t1 / math.sqrt(d)
    coef = cmath.sqrt(complex(d ** 3 / denom)) / t1
    return complex(coef * cmath.sqrt(complex(gam * gam - gamma_ii * gamma_ii)))


_GAP1_A = (8.0 / 9.0) ** 0.25
_GAP1_B = (5.0 / 18.0) * (9.0 / 8.0) ** 0.25


def puiseux_gap1(gamma: float) -> tuple[complex, complex, complex, complex]:
    """Two-term expansions of the four roots near the gap closing at ``t1 = g = sqrt(3)``, ``t2 = 1``.

    With ``x = gamma^2 - 9`` and principal fractional powers::

        z_1 = +-[A x^(1/4) - B x^(3/4)],   z_2 = +-i [A x^(1/4) + B x^(3/4)]

    where ``A = (8/9)^(1/4)`` and ``B = (5/18)(9/8)^(1/4)``.  Returned as
    ``(z_1+, z_1-, z_2+, z_2-)``.
    """
    x = complex(float(gamma) ** 2 - 9.0)
    q1 = x ** 0.25 if x != 0 else 0j
    q3 = q1 ** 3
    z1 = _GAP1_A * q1 - _GAP1_B * q3
    z2 = 1j * (_GAP1_A * q1 + _GAP1_B * q3)
    return z1, -z1, z2, -z2


def root_exponent(params: ModelParams, gamma_ep: float, offsets, n_roots: int = 2) -> float:
    """Local Puiseux exponent of the roots that vanish at ``gamma_ep``.

    Fits ``log |z|`` against ``log |gamma - gamma_ep|`` by least squares,
    where ``|z|`` is the mean modulus of the ``n_roots`` smallest roots at
    ``gamma = gamma_ep + offset``.
    """
    offsets = np.asarray(offsets, dtype=float)
    if np.any(offsets == 0):
        raise ParameterError("offsets must be non-zero")
    mags = []
    for off in offsets:
        z = np.sort(np.abs(discrete_spectrum(params.with_gamma(gamma_ep + off)).energies))
        mags.append(z[:n_roots].mean())
    slope, _ = np.polyfit(np.log(np.abs(offsets)), np.log(mags), 1)
    return float(slope)
