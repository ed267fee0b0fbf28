"""Open PT-symmetric SSH model: spectra, exceptional points and dynamics."""
from .errors import (
    ClassificationError,
    DegenerateLimitError,
    DomainError,
    ExpansionError,
    IntegratorError,
    NormalizationError,
    ParameterError,
    PTSSHError,
)
from .model import CENTER, ModelParams, SiteIndex, build_hamiltonian, isolated_trimer_eigenvalues
from .spectrum import band_edges, discrete_spectrum, eigenfunction, lambda_pm, zero_modes
from .eps import Region, classify_region, discriminant, ep_catalog, phase_diagram
from .dynamics import evolve, fit_power_law, growth_rate, initial_state_measure

__version__ = "0.1.0"
