"""quintlab: spectral solvers, few-body quantum dynamics, hierarchy
combinatorics, and inequality probes for the quintic NLS on the torus."""

__version__ = "0.1.0"
