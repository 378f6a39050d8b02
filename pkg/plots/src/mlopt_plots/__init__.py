"""Figure rendering for mlopt benchmark outputs (trace CSV + PGM formats)."""

from .convergence import plot_convergence
from .grid import plot_reconstruction_grid
from .pgm import read_pgm
from .traces import (TraceFormatError, TraceFrame, load_trace,
                     relative_objective)

__version__ = "0.1.0"
