"""Bloch bands, Berry geometry and semiclassical transport experiments."""

__version__ = "0.1.0"

from .lattice import CellPoint, DegenerateLatticeError, Lattice, dual_basis, square_lattice  # noqa: F401
from .bloch import (  # noqa: F401
    BlochSpectrum, ConvergenceError, DegenerateBandError, PeriodicPotential,
    PlaneWaveBasis, band_project, gap_check, make_kgrid, solve_bands,
    zak_forward, zak_inverse,
)
from .fields import ExternalFields, preset, zero_fields  # noqa: F401
from .series import TrigPoly, fit_periodic_grid  # noqa: F401
from .effective import BandModel, EffectiveModel  # noqa: F401
from .fitting import fit_order  # noqa: F401
