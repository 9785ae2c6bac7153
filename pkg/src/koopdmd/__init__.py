"""Koopman operator approximation with DMD and EDMD."""

from .dmd import DmdModel, amplitudes, fit_dmd, mode_coefficients, reconstruct, truncated_svd
from .dynamics import CartPoleParams, PendulumParams, Trajectory, simulate
from .edmd import Dictionary, EdmdModel, fit_edmd, koopman_eigenfunctions, linearity_residual
from .snapshots import SnapshotPair, build_snapshots

__version__ = "0.1.0"
