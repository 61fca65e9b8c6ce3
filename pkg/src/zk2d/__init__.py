"""Pseudospectral solver and blow-up diagnostics for the 2D generalized
Zakharov-Kuznetsov equation u_t + (u_xx + u_yy + u^p)_x = 0, p = 2, 3, 4."""

__version__ = "0.1.0"

from zk2d.grid import Field, GridSpec, SpectralField, forward, inverse
from zk2d.soliton import NewtonOptions, SolitonProfile, solve_ground_state

__all__ = [
    "Field",
    "GridSpec",
    "SpectralField",
    "forward",
    "inverse",
    "NewtonOptions",
    "SolitonProfile",
    "solve_ground_state",
    "__version__",
]
