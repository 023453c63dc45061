"""Nonequilibrium steady states of oscillator lattices coupled to heat reservoirs."""
from .lattice import (FPUBeta, Harmonic, LatticeSpec, PinnedQuadratic, QuarticOnsite, Rotator,
                      SystemState, forces, local_energies, local_energy, sample_gibbs, total_energy)
from .thermostats import Extended, GaussianIso, Isolated, Langevin, NoseHoover
from .dynamics import IntegratorSpec, SimulationError, simulate, step, advance

__version__ = "0.1.0"
