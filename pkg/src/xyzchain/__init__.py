"""Spectra, eigenvalue zeros and thermodynamic limits of the XYZ spin chain
with periodic and twisted boundaries."""

from .elliptic import EllipticParams, sigma, sigma_prime, theta, zeta_fn
from .model import SpinChainModel, Twist, couplings, hamiltonian, transfer_matrix
from .spectrum import LambdaEvaluator, diagonalize, ground_tower, select_states
from .zeros import ZeroSet, classify, energy_from_zeros, find_zeros
from .thermo import energy_density, excitation_gap, surface_energy

__version__ = "0.1.0"

__all__ = [
    "EllipticParams",
    "SpinChainModel",
    "Twist",
    "LambdaEvaluator",
    "ZeroSet",
    "theta",
    "sigma",
    "sigma_prime",
    "zeta_fn",
    "couplings",
    "hamiltonian",
    "transfer_matrix",
    "diagonalize",
    "ground_tower",
    "select_states",
    "find_zeros",
    "classify",
    "energy_from_zeros",
    "energy_density",
    "surface_energy",
    "excitation_gap",
]
