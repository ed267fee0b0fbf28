"""Model parameters, lattice sites and the truncated Hamiltonian.

The system is a three-site PT-symmetric trimer ``(-1,a) - 0 - (1,a)`` whose
outer sites carry the gain/loss potentials ``+i*gamma`` and ``-i*gamma`` and
start two semi-infinite SSH leads.  Along each lead the intracell hopping
``t2`` joins ``(n,a)`` and ``(n,b)`` and the intercell hopping ``t1`` joins
``(n,b)`` to the next cell outward.

Every site therefore lies on one open chain::

    ... (-2,b) (-2,a) (-1,b) (-1,a)  0  (1,a) (1,b) (2,a) (2,b) ...

and the Hamiltonian is tridiagonal when sites are stored in that order.  The
dense index of a site is its position along the chain, with the center at
``2 * n_cells``.
"""
from __future__ import annotations

import cmath
import enum
import math
import re
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import ParameterError

__all__ = [
    "ModelParams",
    "SiteKind",
    "Sublattice",
    "SiteIndex",
    "CENTER",
    "TruncatedHamiltonian",
    "build_hamiltonian",
    "tridiagonal_bands",
    "isolated_trimer_eigenvalues",
    "site_equation",
    "reflection_bound",
]


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the open PT-symmetric SSH model (energy units).

    Parameters
    ----------
    t1 : float
        Intercell hopping of the SSH leads.
    t2 : float
        Intracell hopping of the SSH leads.
    g : float
        Coupling between the center site and the two gain/loss sites.
    gamma : float
        Gain/loss strength; ``+i*gamma`` sits on ``(-1,a)``, ``-i*gamma`` on ``(1,a)``.
    """

    t1: float
    t2: float
    g: float
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("t1", "t2", "g", "gamma"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ParameterError(f"{name} must be a real number, got {value!r}") from None
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.t1 <= 0 or self.t2 <= 0:
            raise ParameterError(
                f"hoppings must be positive (t1={self.t1}, t2={self.t2}); "
                "the fully dimerized limits are not supported"
            )
        if self.g < 0 or self.gamma < 0:
            raise ParameterError(f"g and gamma must be non-negative (g={self.g}, gamma={self.gamma})")

    def with_gamma(self, gamma: float) -> "ModelParams":
        return replace(self, gamma=gamma)

    def normalized(self) -> "ModelParams":
        """Return the same point in units of ``t2 = 1``."""
        s = self.t2
        return ModelParams(self.t1 / s, 1.0, self.g / s, self.gamma / s)

    def as_dict(self) -> dict:
        return {"t1": self.t1, "t2": self.t2, "g": self.g, "gamma": self.gamma}


class SiteKind(enum.Enum):
    CENTER = "center"
    LEAD = "lead"


class Sublattice(enum.Enum):
    A = "A"
    B = "B"


_SITE_RE = re.compile(r"^\s*([+-]?\d+)\s*[,:]?\s*([abAB])\s*$")


@dataclass(frozen=True)
class SiteIndex:
    """A lattice site: the center, or ``(cell, sublattice)`` on a lead (``cell != 0``)."""

    kind: SiteKind
    cell: int | None = None
    sublattice: Sublattice | None = None

    def __post_init__(self):
        if self.kind is SiteKind.CENTER:
            if self.cell is not None or self.sublattice is not None:
                raise ParameterError("the center site has no cell or sublattice")
        else:
            if self.cell is None or int(self.cell) == 0 or self.sublattice is None:
                raise ParameterError("lead sites need a nonzero cell and a sublattice")
            object.__setattr__(self, "cell", int(self.cell))
            object.__setattr__(self, "sublattice", Sublattice(self.sublattice))

    @classmethod
    def center(cls) -> "SiteIndex":
        return cls(SiteKind.CENTER)

    @classmethod
    def lead(cls, cell: int, sublattice) -> "SiteIndex":
        if isinstance(sublattice, str):
            sublattice = Sublattice(sublattice.upper())
        return cls(SiteKind.LEAD, cell, sublattice)

    @classmethod
    def parse(cls, text: str) -> "SiteIndex":
        """Parse ``"0"``/``"center"`` or labels such as ``"1A"``, ``"-2b"``, ``"3,a"``."""
        if isinstance(text, SiteIndex):
            return text
        s = str(text).strip()
        if s.lower() in ("0", "c", "center"):
            return cls.center()
        m = _SITE_RE.match(s)
        if not m or int(m.group(1)) == 0:
            raise ParameterError(f"cannot parse site label {text!r}")
        return cls.lead(int(m.group(1)), m.group(2))

    @property
    def is_center(self) -> bool:
        return self.kind is SiteKind.CENTER

    @property
    def label(self) -> str:
        if self.is_center:
            return "0"
        return f"{self.cell}{self.sublattice.value}"

    def __str__(self) -> str:
        return self.label

    def to_index(self, n_cells: int) -> int:
        c = 2 * n_cells
        if self.is_center:
            return c
        n = abs(self.cell)
        if n > n_cells:
            raise ParameterError(f"site {self} lies outside a lattice of {n_cells} cells")
        offset = 2 * n - 1 if self.sublattice is Sublattice.A else 2 * n
        return c + offset if self.cell > 0 else c - offset

    @classmethod
    def from_index(cls, index: int, n_cells: int) -> "SiteIndex":
        c = 2 * n_cells
        if not 0 <= index <= 4 * n_cells:
            raise ParameterError(f"index {index} outside 0..{4 * n_cells}")
        d = index - c
        if d == 0:
            return cls.center()
        n = (abs(d) + 1) // 2
        sub = Sublattice.A if abs(d) % 2 == 1 else Sublattice.B
        return cls(SiteKind.LEAD, n if d > 0 else -n, sub)


CENTER = SiteIndex.center()


def reflection_bound(params: ModelParams, t_max: float) -> int:
    """Smallest lead length (cells) that keeps the hard-wall echo away from the trimer up to ``t_max``."""
    return int(math.ceil((params.t1 + params.t2) * t_max / 2.0)) + 16


def tridiagonal_bands(params: ModelParams, n_cells: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal (complex) and off-diagonal (real) bands of the chain-ordered Hamiltonian.

    ``off[i]`` couples dense indices ``i`` and ``i + 1``.
    """
    if int(n_cells) != n_cells or n_cells < 1:
        raise ParameterError(f"n_cells must be a positive integer, got {n_cells}")
    n_cells = int(n_cells)
    dim = 4 * n_cells + 1
    c = 2 * n_cells
    diag = np.zeros(dim, dtype=np.complex128)
    diag[c - 1] = 1j * params.gamma
    diag[c + 1] = -1j * params.gamma

    # Right lead read outward from the center: g, t2, t1, t2, t1, ...
    right = np.empty(2 * n_cells)
    right[0] = params.g
    right[1::2] = params.t2
    right[2::2] = params.t1
    off = np.empty(dim - 1)
    off[c:] = right
    off[:c] = right[::-1]
    return diag, off


@dataclass(frozen=True)
class TruncatedHamiltonian:
    """Hamiltonian restricted to ``|n| <= n_cells`` with hard walls beyond."""

    params: ModelParams
    n_cells: int
    diag: np.ndarray
    off: np.ndarray

    @property
    def dim(self) -> int:
        return 4 * self.n_cells + 1

    @cached_property
    def entries(self) -> np.ndarray:
        m = np.diag(self.diag)
        m += np.diag(self.off.astype(np.complex128), 1)
        m += np.diag(self.off.astype(np.complex128), -1)
        return m

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """``H @ vec`` using the bands (works on the last axis)."""
        vec = np.asarray(vec)
        out = self.diag * vec
        out[..., :-1] += self.off * vec[..., 1:]
        out[..., 1:] += self.off * vec[..., :-1]
        return out

    def index(self, site: SiteIndex) -> int:
        return site.to_index(self.n_cells)

    def site(self, index: int) -> SiteIndex:
        return SiteIndex.from_index(index, self.n_cells)


def build_hamiltonian(params: ModelParams, n_cells: int) -> TruncatedHamiltonian:
    diag, off = tridiagonal_bands(params, n_cells)
    return TruncatedHamiltonian(params, int(n_cells), diag, off)


def isolated_trimer_eigenvalues(params: ModelParams) -> tuple[complex, complex, complex]:
    """Eigenvalues ``(0, +sqrt(2g^2 - gamma^2), -sqrt(2g^2 - gamma^2))`` of the bare trimer."""
    # Factored so the radicand is exactly zero at gamma == sqrt(2)*g in floating point.
    s = math.sqrt(2.0) * params.g
    root = cmath.sqrt(complex((s - params.gamma) * (s + params.gamma)))
    return 0j, root, -root


def site_equation(params: ModelParams, amp: Callable[[SiteIndex], complex], site: SiteIndex) -> complex:
    """``(H psi)`` at one site, written out from the coupled site equations.

    ``amp`` returns the amplitude at any site.  This is independent of the
    matrix assembly and is used to cross-check it, and to verify closed-form
    eigenvectors that cannot be stored on a finite lattice.
    """
    t1, t2, g, gam = params.t1, params.t2, params.g, params.gamma
    L = SiteIndex.lead
    if site.is_center:
        return g * amp(L(1, "A")) + g * amp(L(-1, "A"))
    n = site.cell
    s = 1 if n > 0 else -1
    if site.sublattice is Sublattice.A:
        if abs(n) == 1:
            pot = -1j * gam if n > 0 else 1j * gam
            return g * amp(CENTER) + t2 * amp(L(n, "B")) + pot * amp(site)
        return t2 * amp(L(n, "B")) + t1 * amp(L(n - s, "B"))
    return t2 * amp(L(n, "A")) + t1 * amp(L(n + s, "A"))
