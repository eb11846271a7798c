"""bubble-tower-lab: numerics for sign-changing bubble towers in perforated
domains -- projections, reduced-energy critical points, energy expansions,
and a radial shooting cross-check."""

__version__ = "0.1.0"

from .constants import DimConstants, dim_constants, log_gamma  # noqa: F401
