"""Exact dynamic mode decomposition.

Pipeline: truncated SVD of ``X``, reduced operator
``A_tilde = U^T X' V S^-1``, its eigendecomposition ``A_tilde W = W Lambda``,
exact modes ``Phi = X' V S^-1 W``, amplitudes from the first snapshot, and
continuous-time reconstruction ``x(t) = Phi exp(Omega t) b``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .snapshots import SnapshotPair

SV_RTOL = 1e-10
ZERO_EIG_TOL = 1e-12
IMAG_RTOL = 1e-6

Rank = Union[int, str, None]


@dataclass(frozen=True)
class SvdFactors:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def r(self) -> int:
        return self.S.size


@dataclass(frozen=True)
class LstsqFit:
    """Least-squares coefficients with their residual norm."""

    coef: np.ndarray
    residual: float
    rank_deficient: bool = False


@dataclass(eq=False)
class DmdModel:
    r: int
    A_tilde: np.ndarray
    Lambda: np.ndarray
    W: np.ndarray
    Phi: np.ndarray
    Omega: np.ndarray
    b: np.ndarray
    dt: float
    U: np.ndarray
    S: np.ndarray
    rank_requested: Optional[int] = None
    b_residual: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.Phi.shape[0]

    @property
    def valid(self) -> np.ndarray:
        """Modes with a defined continuous-time eigenvalue."""
        return np.isfinite(self.Omega)


def _parse_rank(rank: Rank) -> Optional[int]:
    if rank is None or rank == "auto":
        return None
    r = int(rank)
    if r < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    return r


def truncated_svd(X, rank: Rank = "auto", rtol: float = SV_RTOL) -> SvdFactors:
    """Thin SVD of ``X`` keeping singular values above ``rtol * sigma_1``.

    An explicit ``rank`` caps the number of retained values; values below the
    relative threshold are dropped even then.
    """
    X = np.asarray(X)
    r_req = _parse_rank(rank)
    if r_req is not None and r_req > min(X.shape):
        raise ValueError(f"rank {r_req} exceeds min(n, m-1) = {min(X.shape)}")
    U, S, Vh = np.linalg.svd(X, full_matrices=False)
    if S.size == 0 or S[0] == 0.0:
        raise ValueError("cannot decompose an all-zero snapshot matrix")
    r = int(np.sum(S > rtol * S[0]))
    if r_req is not None:
        r = min(r, r_req)
    return SvdFactors(U=U[:, :r], S=S[:r], V=Vh[:r].conj().T)


def _sort_order(lam: np.ndarray) -> np.ndarray:
    # descending |lambda|, ties broken by descending imaginary part
    mag = np.round(np.abs(lam), 12)
    return np.lexsort((-lam.imag, -mag))


def _normalize_modes(Phi: np.ndarray) -> np.ndarray:
    Phi = Phi.copy()
    for k in range(Phi.shape[1]):
        col = Phi[:, k]
        norm = np.linalg.norm(col)
        col = col / norm
        i = np.argmax(np.abs(col))
        col = col * (np.abs(col[i]) / col[i])
        col[i] = col[i].real  # drop rounding residue so the pivot is exactly real
        Phi[:, k] = col
    return Phi


def lstsq_coefficients(Phi, x, rcond: float = SV_RTOL) -> LstsqFit:
    """Minimum-norm least-squares solution of ``Phi c = x``."""
    Phi = np.asarray(Phi, dtype=complex)
    x = np.asarray(x, dtype=complex)
    coef, _, rank, _ = np.linalg.lstsq(Phi, x, rcond=rcond)
    residual = float(np.linalg.norm(Phi @ coef - x))
    return LstsqFit(coef=coef, residual=residual, rank_deficient=rank < Phi.shape[1])


def amplitudes(Phi, x1) -> LstsqFit:
    """Mode amplitudes ``b`` expanding the first snapshot ``x1``."""
    fit = lstsq_coefficients(Phi, x1)
    if fit.rank_deficient:
        warnings.warn("mode matrix is rank deficient; using minimum-norm amplitudes", RuntimeWarning)
    return fit


def fit_dmd(snap: SnapshotPair, rank: Rank = "auto") -> DmdModel:
    svd = truncated_svd(snap.X, rank)
    U, S, V = svd.U, svd.S, svd.V
    XpVSinv = snap.Xp @ V / S
    A_tilde = U.conj().T @ XpVSinv

    lam, W = np.linalg.eig(A_tilde)
    lam, W = lam.astype(complex), W.astype(complex)
    order = _sort_order(lam)
    lam, W = lam[order], W[:, order]

    notes = []
    Phi = XpVSinv @ W
    for k in range(Phi.shape[1]):
        # exact modes vanish for zero eigenvalues; fall back to projected modes
        if np.linalg.norm(Phi[:, k]) <= ZERO_EIG_TOL * max(1.0, np.linalg.norm(XpVSinv)):
            Phi[:, k] = U @ W[:, k]
            notes.append(f"mode {k}: exact mode vanished, projected mode used")
    Phi = _normalize_modes(Phi)

    zero = np.abs(lam) < ZERO_EIG_TOL
    if np.all(zero):
        raise ValueError("all DMD eigenvalues are zero")
    Omega = np.full(lam.shape, np.nan + 0j)
    Omega[~zero] = np.log(lam[~zero]) / snap.dt
    if np.any(zero):
        notes.append(f"modes {np.flatnonzero(zero).tolist()} have zero eigenvalue; excluded from reconstruction")

    fit = lstsq_coefficients(Phi, snap.X[:, 0])
    if fit.rank_deficient:
        notes.append("mode matrix rank deficient; minimum-norm amplitudes")

    r_req = _parse_rank(rank)
    if r_req is not None and svd.r < r_req:
        notes.append(f"rank {r_req} requested, {svd.r} singular values above threshold retained")

    return DmdModel(
        r=svd.r,
        A_tilde=A_tilde,
        Lambda=lam,
        W=W,
        Phi=Phi,
        Omega=Omega,
        b=fit.coef,
        dt=snap.dt,
        U=U,
        S=S,
        rank_requested=r_req,
        b_residual=fit.residual,
        notes=notes,
    )


def reconstruct(model: DmdModel, times) -> np.ndarray:
    """States ``sum_k phi_k exp(omega_k t) b_k`` at each time (``t = 0`` is the first snapshot).

    Returns a real ``(n, len(times))`` array.
    """
    valid = model.valid
    if not np.any(valid):
        raise ValueError("no mode with a defined continuous-time eigenvalue")
    t = np.atleast_1d(np.asarray(times, dtype=float))
    Phi, omega, b = model.Phi[:, valid], model.Omega[valid], model.b[valid]
    dynamics = np.exp(np.outer(omega, t)) * b[:, None]
    states = Phi @ dynamics
    residue = np.abs(states.imag) / (1.0 + np.abs(states.real))
    if np.any(residue >= IMAG_RTOL):
        warnings.warn(
            f"reconstruction has imaginary residue up to {residue.max():.3g}; discarded",
            RuntimeWarning,
        )
    return states.real


def mode_coefficients(model: DmdModel, x) -> np.ndarray:
    """Coordinates of ``x`` in the mode basis (least squares)."""
    return lstsq_coefficients(model.Phi, x).coef


def one_step_residual(model: DmdModel, snap: SnapshotPair) -> float:
    """``||X' - Phi diag(Lambda) C||_F`` with ``C`` the mode coordinates of ``X``."""
    C = lstsq_coefficients(model.Phi, snap.X).coef
    return float(np.linalg.norm(snap.Xp - model.Phi @ (model.Lambda[:, None] * C)))
