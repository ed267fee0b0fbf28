"""Closed-form discrete spectrum, continuum bands, zero modes and eigenfunctions.

Discrete states obey the outgoing-wave ansatz ``psi_{n,x} = lambda**|n| C_x``
on the right lead (``B_x`` on the left) with ``lambda = exp(ik)``.  Their
energies are the four roots of the biquadratic

    P_s(z) = gamma^2 z^4 + b z^2 + c

and each root is paired with one of the two roots ``lambda_+-`` of

    gamma^2 t2 lambda^2 + t1 (t1^2 + gamma^2 - 2 g^2) lambda + t1^2 t2 = 0.

Branch conventions: principal ``sqrt`` and ``log`` throughout, so
``Re k = arg(lambda)`` lies in ``(-pi, pi]`` and ``Im k = -log|lambda|``.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLimitError, DomainError, NormalizationError, ParameterError
from .model import CENTER, ModelParams, SiteIndex, Sublattice, build_hamiltonian

__all__ = [
    "KAPPA_TOL",
    "LocClass",
    "LambdaBranch",
    "ContinuumBand",
    "DiscreteMode",
    "DiscreteSpectrum",
    "ZeroFlavor",
    "ZeroMode",
    "EigenfunctionProfile",
    "continuum_dispersion",
    "band_edges",
    "ps_coefficients",
    "ps_polynomial",
    "w_discriminant",
    "quartic_coefficients",
    "lambda_pm",
    "ds_residual",
    "discrete_spectrum",
    "zero_modes",
    "zero_mode_weight",
    "eigenfunction",
    "profile_residual",
]

KAPPA_TOL = 1e-8
# below this gamma the escaping pair of roots would overflow; treat as gamma = 0
GAMMA_FLOOR = 1e-150
DEGENERACY_TOL = 1e-8


class LocClass(enum.Enum):
    LOCALIZED = "localized"
    ANTI_LOCALIZED = "antilocalized"
    DELOCALIZED = "delocalized"


class LambdaBranch(enum.Enum):
    PLUS = "+"
    MINUS = "-"


def _locclass(k: complex, kappa_tol: float = KAPPA_TOL) -> LocClass:
    if k.imag > kappa_tol:
        return LocClass.LOCALIZED
    if k.imag < -kappa_tol:
        return LocClass.ANTI_LOCALIZED
    return LocClass.DELOCALIZED


def _wavenumber(lam: complex) -> complex:
    return -1j * cmath.log(lam)


# ---------------------------------------------------------------------------
# Continuum


@dataclass(frozen=True)
class ContinuumBand:
    sign: int
    lower: float
    upper: float

    @property
    def edges(self) -> tuple[float, float]:
        return self.lower, self.upper

    def contains(self, energy: float, strict: bool = True) -> bool:
        if strict:
            return self.lower < energy < self.upper
        return self.lower <= energy <= self.upper


def continuum_dispersion(params: ModelParams, k: float, sign: int = 1) -> float:
    """Lead dispersion ``+-sqrt(t1^2 + t2^2 + 2 t1 t2 cos k)`` for ``k`` in ``[0, pi]``."""
    if not 0.0 <= k <= math.pi:
        raise DomainError(f"k must lie in [0, pi], got {k}")
    if sign not in (1, -1):
        raise ParameterError("sign must be +1 or -1")
    t1, t2 = params.t1, params.t2
    return sign * math.sqrt(t1 * t1 + t2 * t2 + 2.0 * t1 * t2 * math.cos(k))


def band_edges(params: ModelParams) -> tuple[ContinuumBand, ContinuumBand]:
    lo = abs(params.t1 - params.t2)
    hi = params.t1 + params.t2
    return ContinuumBand(+1, lo, hi), ContinuumBand(-1, -hi, -lo)


def _inside_band(params: ModelParams, energy: float) -> bool:
    return any(b.contains(energy) for b in band_edges(params))


# ---------------------------------------------------------------------------
# Polynomials


def ps_coefficients(params: ModelParams) -> tuple[float, float, float]:
    """Coefficients ``(a, b, c)`` of ``P_s`` as a quadratic in ``w = z**2``."""
    t1, t2, g, gam = params.t1, params.t2, params.g, params.gamma
    t1s, t2s, gs, gms = t1 * t1, t2 * t2, g * g, gam * gam
    a = gms
    b = gms * gms - 2.0 * gms * (t2s + gs) + t1s * t1s - 2.0 * gs * t1s
    c = (t1s - t2s - 2.0 * gs) * (gms * (t1s - t2s) - 2.0 * gs * t1s)
    return a, b, c


def quartic_coefficients(params: ModelParams) -> list[float]:
    """``P_s`` coefficients in ``z``, highest power first."""
    a, b, c = ps_coefficients(params)
    return [a, 0.0, b, 0.0, c]


def ps_polynomial(params: ModelParams, z):
    a, b, c = ps_coefficients(params)
    w = z * z
    return (a * w + b) * w + c


def lambda_pm(params: ModelParams) -> tuple[complex, complex]:
    """The two roots ``(lambda_+, lambda_-)`` of the bracketed factor of ``D_s``.

    ``lambda_+`` takes ``+sqrt`` (principal branch) of the discriminant.  The
    smaller-magnitude root is recovered from the product ``t1^2 / gamma^2``
    to avoid cancellation.
    """
    gam = params.gamma
    if gam < GAMMA_FLOOR:
        raise DegenerateLimitError(
            "lambda_pm is singular at gamma = 0; one root escapes to infinity. "
            "Use discrete_spectrum, which handles the gamma = 0 branch."
        )
    t1, t2, g = params.t1, params.t2, params.g
    q = gam * gam * t2
    p = t1 * (t1 * t1 + gam * gam - 2.0 * g * g)
    r = t1 * t1 * t2
    s = cmath.sqrt(complex(p * p - 4.0 * q * r))
    num_plus, num_minus = -p + s, -p - s
    product = r / q
    if abs(num_plus) >= abs(num_minus):
        lp = num_plus / (2.0 * q)
        lm = product / lp if lp != 0 else num_minus / (2.0 * q)
    else:
        lm = num_minus / (2.0 * q)
        lp = product / lm if lm != 0 else num_plus / (2.0 * q)
    return complex(lp), complex(lm)


def ds_residual(params: ModelParams, lam: complex) -> complex:
    """Bracketed factor of ``D_s``: ``t1^2 (t2 + t1 lam)/lam^2 + gamma^2 (t2 + t1/lam) - 2 g^2 t1/lam``."""
    t1, t2, g, gam = params.t1, params.t2, params.g, params.gamma
    lam = complex(lam)
    if lam == 0:
        raise DomainError("ds_residual has a pole at lambda = 0")
    if abs(t2 + t1 / lam) <= 1e-14 * (t2 + t1 / abs(lam)):
        raise DomainError("ds_residual is undefined where t2 + t1/lambda = 0")
    return t1 * t1 * (t2 + t1 * lam) / (lam * lam) + gam * gam * (t2 + t1 / lam) - 2.0 * g * g * t1 / lam


def _shell_energy_sq(params: ModelParams, lam: complex) -> complex:
    return (params.t2 + params.t1 * lam) * (params.t2 + params.t1 / lam)


# ---------------------------------------------------------------------------
# Discrete spectrum


@dataclass(frozen=True)
class DiscreteMode:
    """One discrete solution of the outgoing-wave problem."""

    z: complex
    lam: complex
    k: complex
    locclass: LocClass
    branch: LambdaBranch
    sign: int

    def is_real(self, eps_rel: float = 1e-9) -> bool:
        return abs(self.z.imag) <= eps_rel * max(1.0, abs(self.z))


@dataclass(frozen=True)
class DiscreteSpectrum:
    """The discrete modes at one parameter point.

    ``escaped`` is set at ``gamma = 0`` where one pair of roots has moved
    off to infinity and only two finite modes remain.
    """

    params: ModelParams
    modes: tuple[DiscreteMode, ...]
    escaped: bool = False

    def __iter__(self):
        return iter(self.modes)

    def __len__(self):
        return len(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    @property
    def energies(self) -> np.ndarray:
        return np.array([m.z for m in self.modes], dtype=complex)

    def max_imag(self) -> float:
        return max((m.z.imag for m in self.modes), default=0.0)


def _polish_w(a: float, b: float, c: float, w):
    """One guarded Newton step on ``a w^2 + b w + c``; kept only if it lowers the residual."""
    q = (a * w + b) * w + c
    dq = 2.0 * a * w + b
    scale = abs(a) * abs(w) * abs(w) + abs(b) * abs(w) + abs(c)
    if q == 0 or abs(dq) <= 1e-8 * max(scale, 1e-300) / max(abs(w), 1e-300):
        return w
    w_new = w - q / dq
    if abs((a * w_new + b) * w_new + c) < abs(q):
        return w_new
    return w


def w_discriminant(params: ModelParams) -> float:
    """``b^2 - 4ac`` of ``P_s`` in ``w``, in the factored form ``(t1^2 - gamma^2)^2 Q``.

    ``Q = (t1^2 - 2g^2)^2 - 2(2g^2 - t1^2 + 2t2^2) gamma^2 + gamma^4``.  The
    factored form is exactly zero at the resonance in continuum
    (``gamma = t1``), where the expanded one suffers cancellation.
    """
    t1s, t2s, gs = params.t1 ** 2, params.t2 ** 2, params.g ** 2
    gms = params.gamma ** 2
    q = (t1s - 2.0 * gs) ** 2 - 2.0 * (2.0 * gs - t1s + 2.0 * t2s) * gms + gms * gms
    return (t1s - gms) ** 2 * q


def _w_roots(a: float, b: float, c: float, disc: float | None = None) -> tuple:
    """Roots of ``a w^2 + b w + c`` (real ``a > 0``); real roots stay real."""
    if disc is None:
        disc = b * b - 4.0 * a * c
    if disc >= 0.0:
        sq = math.sqrt(disc)
        qq = -0.5 * (b + math.copysign(sq, b))
        if qq == 0.0:
            return 0.0, 0.0
        w1, w2 = qq / a, c / qq
        return _polish_w(a, b, c, w1), _polish_w(a, b, c, w2)
    w1 = complex(-b / (2.0 * a), math.sqrt(-disc) / (2.0 * a))
    w1 = _polish_w(a, b, c, w1)
    return w1, w1.conjugate()


def _sqrt_w(w):
    if isinstance(w, complex):
        return cmath.sqrt(w)
    if w >= 0.0:
        return complex(math.sqrt(w), 0.0)
    return complex(0.0, math.sqrt(-w))


def _make_modes(params, w_list, lam_list, branches, kappa_tol):
    modes = []
    for w, lam, br in zip(w_list, lam_list, branches):
        root = _sqrt_w(w)
        k = _wavenumber(lam)
        loc = _locclass(k, kappa_tol)
        for sgn in (1, -1):
            z = root if sgn == 1 else -root
            modes.append(DiscreteMode(complex(z), lam, k, loc, br, sgn))
    modes.sort(key=lambda m: (-m.z.real, -m.z.imag))
    return tuple(modes)


def discrete_spectrum(params: ModelParams, kappa_tol: float = KAPPA_TOL) -> DiscreteSpectrum:
    """The four roots of ``P_s`` with their ``lambda`` and ``k``.

    Roots are computed from the quadratic in ``w = z**2`` (so ``z`` and ``-z``
    pair exactly) and polished by one Newton step.  Each ``w`` root is paired
    with the ``lambda`` root that best satisfies ``w = (t2 + t1 lam)(t2 + t1/lam)``;
    the pairing is solved jointly so that coincident energies with distinct
    wavenumbers (the resonance in continuum) get distinct ``lambda``.

    At ``gamma = 0`` the quartic degenerates to a quadratic in ``z``: two
    finite modes are returned and ``escaped`` is set.  The same branch is
    taken for ``0 < gamma < GAMMA_FLOOR``, where the escaping pair would lie
    beyond the float range.
    """
    t1, t2, g, gam = params.t1, params.t2, params.g, params.gamma
    if gam < GAMMA_FLOOR:
        denom = t1 * t1 - 2.0 * g * g
        if denom == 0.0:
            return DiscreteSpectrum(params, (), escaped=True)
        w = 2.0 * g * g * (t1 * t1 - t2 * t2 - 2.0 * g * g) / denom
        lam = complex(-t1 * t2 / denom)
        if lam == 0:
            return DiscreteSpectrum(params, (), escaped=True)
        modes = _make_modes(params, [w], [lam], [LambdaBranch.PLUS], kappa_tol)
        return DiscreteSpectrum(params, modes, escaped=True)

    a, b, c = ps_coefficients(params)
    w1, w2 = _w_roots(a, b, c, w_discriminant(params))
    lp, lm = lambda_pm(params)
    e_pp = abs(w1 - _shell_energy_sq(params, lp)) + abs(w2 - _shell_energy_sq(params, lm))
    e_pm = abs(w1 - _shell_energy_sq(params, lm)) + abs(w2 - _shell_energy_sq(params, lp))
    if e_pp <= e_pm:
        lams, branches = [lp, lm], [LambdaBranch.PLUS, LambdaBranch.MINUS]
    else:
        lams, branches = [lm, lp], [LambdaBranch.MINUS, LambdaBranch.PLUS]
    return DiscreteSpectrum(params, _make_modes(params, [w1, w2], lams, branches, kappa_tol))


# ---------------------------------------------------------------------------
# Zero modes


class ZeroFlavor(enum.Enum):
    A_TYPE = "a"
    B_TYPE = "b"


@dataclass(frozen=True)
class ZeroMode:
    """An exact ``z = 0`` eigenstate.

    A-type lives on the a-sublattice (odd in ``n``), B-type on the
    b-sublattice (even in ``n``); both carry weight on the center site.
    """

    params: ModelParams
    flavor: ZeroFlavor
    lam: complex
    k: complex
    locclass: LocClass
    z: complex = 0j

    def center(self, seed: complex = 1.0) -> complex:
        p = self.params
        if self.flavor is ZeroFlavor.A_TYPE:
            return -1j * p.gamma * p.t2 / (p.g * p.t1) * seed
        return p.t1 / p.g * seed

    def amplitude(self, site: SiteIndex, seed: complex = 1.0) -> complex:
        """Amplitude at ``site`` given the lead coefficient ``C_a`` (A-type) or ``C_b`` (B-type)."""
        if site.is_center:
            return self.center(seed)
        n = site.cell
        if self.flavor is ZeroFlavor.A_TYPE:
            if site.sublattice is Sublattice.B:
                return 0j
            return (1 if n > 0 else -1) * self.lam ** abs(n) * seed
        if site.sublattice is Sublattice.A:
            return 0j
        return self.lam ** abs(n) * seed


def zero_modes(params: ModelParams) -> tuple[ZeroMode, ZeroMode]:
    """The localized/anti-localized pair of zero-energy states.

    A-type: ``lambda = -t2/t1``, ``k = pi + i log(t1/t2)``.
    B-type: ``lambda = -t1/t2``, ``k = pi + i log(t2/t1)``.
    """
    if params.g == 0.0:
        raise ParameterError("zero modes need g > 0 (the center amplitude is fixed by g)")
    t1, t2 = params.t1, params.t2
    la, lb = complex(-t2 / t1), complex(-t1 / t2)
    ka = complex(math.pi, math.log(t1 / t2))
    kb = complex(math.pi, math.log(t2 / t1))
    return (
        ZeroMode(params, ZeroFlavor.A_TYPE, la, ka, _locclass(ka)),
        ZeroMode(params, ZeroFlavor.B_TYPE, lb, kb, _locclass(kb)),
    )


def zero_mode_weight(params: ModelParams, site: SiteIndex = CENTER) -> complex:
    """Biorthogonal projection ``<site|P_a|site>`` onto the localized A-type zero mode.

    H is complex symmetric, so its left eigenvectors are the transposes of the
    right ones and the projector is ``psi psi^T / (psi^T psi)``.  In Region IA
    every other discrete state decays and ``|weight|**2`` is the long-time
    plateau of the initial-state measure.  Requires ``t1 > t2``.
    """
    if params.t1 <= params.t2:
        raise DomainError("the A-type zero mode is normalizable only for t1 > t2")
    za, _ = zero_modes(params)
    r = (params.t2 / params.t1) ** 2
    norm = za.center() ** 2 + 2.0 * r / (1.0 - r)
    if abs(norm) < 1e-14:
        raise DomainError("A-type zero mode is self-orthogonal here (exceptional point)")
    return za.amplitude(site) ** 2 / norm


# ---------------------------------------------------------------------------
# Eigenfunctions


@dataclass(frozen=True)
class EigenfunctionProfile:
    mode: object
    n_max: int
    amplitudes: dict = field(repr=False)
    normalization: str = "phi0"
    degenerate: bool = False

    def __getitem__(self, site) -> complex:
        return self.amplitudes[SiteIndex.parse(site) if isinstance(site, str) else site]

    def vector(self) -> np.ndarray:
        """Amplitudes in dense chain order for ``n_cells = n_max``."""
        vec = np.zeros(4 * self.n_max + 1, dtype=complex)
        for site, value in self.amplitudes.items():
            vec[site.to_index(self.n_max)] = value
        return vec

    def lead(self, side: int, sublattice: str = "A") -> np.ndarray:
        """Amplitudes ``psi_{side*n, x}`` for ``n = 1..n_max``."""
        return np.array(
            [self.amplitudes[SiteIndex.lead(side * n, sublattice)] for n in range(1, self.n_max + 1)]
        )


def _null_vector_3x3(m: np.ndarray) -> np.ndarray:
    """Null direction of a rank-2 3x3 matrix: the largest column of its adjugate."""
    adj = np.empty((3, 3), dtype=complex)
    for i in range(3):
        for j in range(3):
            rows = [r for r in range(3) if r != j]
            cols = [cc for cc in range(3) if cc != i]
            minor = m[rows[0], cols[0]] * m[rows[1], cols[1]] - m[rows[0], cols[1]] * m[rows[1], cols[0]]
            adj[i, j] = (-1) ** (i + j) * minor
    norms = np.abs(adj).sum(axis=0)
    j = int(np.argmax(norms))
    if norms[j] == 0:
        raise DomainError("3x3 matching system has rank < 2; no unique eigenvector")
    return adj[:, j]


def _tabulate(params, n_max, phi0, ca, cb, ba, bb, lam):
    amps = {CENTER: complex(phi0)}
    power = 1.0 + 0j
    for n in range(1, n_max + 1):
        power = power * lam
        amps[SiteIndex.lead(n, "A")] = complex(power * ca)
        amps[SiteIndex.lead(n, "B")] = complex(power * cb)
        amps[SiteIndex.lead(-n, "A")] = complex(power * ba)
        amps[SiteIndex.lead(-n, "B")] = complex(power * bb)
    return amps


def _normalize(amps: dict, normalization: str) -> dict:
    if normalization == "phi0":
        phi0 = amps[CENTER]
        # Compare against the first cell only: lead amplitudes grow like |lambda|^n.
        near = [CENTER] + [SiteIndex.lead(s, x) for s in (1, -1) for x in ("A", "B")]
        peak = max(abs(amps[s]) for s in near)
        if abs(phi0) <= 1e-12 * peak:
            raise NormalizationError(
                "center amplitude vanishes for this mode; use normalization='max'"
            )
        scale = 1.0 / phi0
    elif normalization == "max":
        peak_site = max(amps, key=lambda s: abs(amps[s]))
        scale = 1.0 / amps[peak_site]
    elif normalization == "none":
        return amps
    else:
        raise ParameterError(f"unknown normalization {normalization!r}")
    return {s: v * scale for s, v in amps.items()}


def _zero_mode_profile(mode: ZeroMode, n_max: int, normalization: str, degenerate=False):
    amps = {CENTER: mode.center()}
    for n in range(1, n_max + 1):
        for side in (1, -1):
            for sub in ("A", "B"):
                site = SiteIndex.lead(side * n, sub)
                amps[site] = mode.amplitude(site)
    return EigenfunctionProfile(mode, n_max, _normalize(amps, normalization), normalization, degenerate)


def eigenfunction(params: ModelParams, mode, n_max: int, normalization: str = "phi0",
                  residual_tol: float = 1e-6) -> EigenfunctionProfile:
    """Tabulate the eigenfunction of ``mode`` on ``|n| <= n_max``.

    The trimer coefficients ``(C_a, phi0, B_a)`` are the null vector of the
    3x3 matching system; ``C_b`` and ``B_b`` follow from the lead equations.
    ``normalization`` is ``"phi0"`` (``|phi0|^2 = 1``), ``"max"`` or ``"none"``.
    ``degenerate`` is set when another mode shares both ``z`` and ``lambda``
    (an exceptional point); the single coalesced profile is returned.
    """
    if n_max < 1:
        raise ParameterError("n_max must be >= 1")
    if isinstance(mode, ZeroMode):
        return _zero_mode_profile(mode, n_max, normalization)

    t1, t2, g, gam = params.t1, params.t2, params.g, params.gamma
    z, lam = mode.z, mode.lam
    scale = max(1.0, abs(z) ** 4, abs(ps_coefficients(params)[2]))
    if abs(ps_polynomial(params, z)) > residual_tol * scale:
        raise DomainError(f"z = {z} is not a root of P_s (residual {abs(ps_polynomial(params, z)):.3e})")

    degenerate = False
    if gam > 0:
        for other in discrete_spectrum(params):
            if other is mode or (other.z == mode.z and other.lam == mode.lam and other.sign == mode.sign):
                continue
            if abs(other.z - z) < DEGENERACY_TOL and abs(other.lam - lam) < DEGENERACY_TOL * max(1.0, abs(lam)):
                degenerate = True

    inner = t2 + t1 / lam
    outer = t2 + t1 * lam
    if abs(z) < 1e-10 * (t1 + t2) and abs(inner) < 1e-8 * (t1 + t2):
        # Coalesced with the B-type zero mode: C_a = B_a = 0, the matching system is 0/0.
        return _zero_mode_profile(zero_modes(params)[1], n_max, normalization, degenerate=True)
    # t2*C_b expressed through C_a; both forms agree on the energy shell.
    if abs(inner) >= abs(z):
        hop = t2 * z / inner
    else:
        hop = t2 * outer / z
    m = np.array(
        [
            [hop - 1j * gam - z, g / lam, 0.0],
            [g * lam, -z, g * lam],
            [0.0, g / lam, hop + 1j * gam - z],
        ],
        dtype=complex,
    )
    ca, phi0, ba = _null_vector_3x3(m)
    if abs(inner) >= abs(z):
        cb, bb = z * ca / inner, z * ba / inner
    else:
        cb, bb = outer * ca / z, outer * ba / z
    amps = _tabulate(params, n_max, phi0, ca, cb, ba, bb, lam)
    return EigenfunctionProfile(mode, n_max, _normalize(amps, normalization), normalization, degenerate)


def profile_residual(params: ModelParams, profile: EigenfunctionProfile, n_check: int | None = None) -> float:
    """``max |(H psi - z psi)_j|`` over sites with ``|n| <= n_check`` (default ``n_max - 1``).

    Uses the truncated matrix with ``n_cells = n_max``; rows at the outermost
    cell are excluded because their outward neighbour is missing.
    """
    n_check = profile.n_max - 1 if n_check is None else n_check
    if not 0 <= n_check < profile.n_max:
        raise ParameterError("n_check must be smaller than the profile's n_max")
    ham = build_hamiltonian(params, profile.n_max)
    vec = profile.vector()
    res = ham.apply(vec) - profile.mode.z * vec
    c = 2 * profile.n_max
    window = res[c - 2 * n_check: c + 2 * n_check + 1]
    return float(np.max(np.abs(window)))
