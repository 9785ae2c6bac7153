"""Linearization at equilibria and continuous-time LQR design."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .dynamics import CartPoleParams, PendulumParams, system_deriv

EQUILIBRIUM_TOL = 1e-8


class CareError(ValueError):
    """The Riccati equation has no stabilizing solution or did not converge."""


@dataclass(frozen=True)
class LinearizedModel:
    A: np.ndarray
    B: np.ndarray
    x_eq: np.ndarray

    def __post_init__(self):
        A, B = np.atleast_2d(self.A), np.atleast_2d(self.B)
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if B.shape[0] != A.shape[0]:
            raise ValueError("B must have as many rows as A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "x_eq", np.asarray(self.x_eq, dtype=float))


@dataclass(frozen=True)
class LqrWeights:
    """Diagonal state and input weights."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q, R = np.atleast_2d(np.asarray(self.Q, float)), np.atleast_2d(np.asarray(self.R, float))
        if np.any(np.diag(Q) < 0):
            raise ValueError("Q diagonal entries must be >= 0")
        if np.any(np.diag(R) <= 0):
            raise ValueError("R diagonal entries must be > 0")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @classmethod
    def from_diagonals(cls, q, r) -> "LqrWeights":
        return cls(np.diag(np.atleast_1d(q).astype(float)), np.diag(np.atleast_1d(r).astype(float)))


@dataclass(frozen=True)
class LqrController:
    """State feedback ``u = -K (x - x_ref)``."""

    K: np.ndarray
    x_ref: np.ndarray
    P: np.ndarray = None
    closed_loop_eigs: np.ndarray = None

    def __call__(self, x) -> float:
        u = -self.K @ (np.asarray(x, dtype=float) - self.x_ref)
        return float(u[0]) if u.size == 1 else u


def linearize(system: str, params, x_eq) -> LinearizedModel:
    """Analytic Jacobians of ``system`` at the equilibrium ``x_eq`` (zero input)."""
    x_eq = np.asarray(x_eq, dtype=float)
    f = system_deriv(system, params)
    residual = np.max(np.abs(f(x_eq, 0.0)))
    if residual > EQUILIBRIUM_TOL:
        raise ValueError(f"{x_eq.tolist()} is not an equilibrium of {system} (residual {residual:.3g})")

    if system == "pendulum":
        p: PendulumParams = params
        theta = x_eq[0]
        A = np.array([[0.0, 1.0], [p.g / p.L * np.cos(theta), 0.0]])
        B = np.array([[0.0], [1.0 / (p.m * p.L**2)]])
    else:
        p: CartPoleParams = params
        c = np.cos(x_eq[2])
        # at an equilibrium sin(theta) = theta_dot = 0, so every D-derivative term drops out
        A = np.array(
            [
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, p.m * p.g / p.M, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [0.0, 0.0, -(p.m + p.M) * p.g * c / (p.L * p.M), 0.0],
            ]
        )
        B = np.array([[0.0], [1.0 / p.M], [0.0], [-c / (p.L * p.M)]])
    return LinearizedModel(A, B, x_eq)


def care_residual(A, B, Q, R, P) -> np.ndarray:
    return A.T @ P + P @ A - P @ B @ np.linalg.solve(R, B.T @ P) + Q


def _pbh_defective(A, C, transpose=False, tol=1e-9):
    """Eigenvalues of A in the closed right half-plane that fail the PBH rank test."""
    n = A.shape[0]
    bad = []
    for lam in np.linalg.eigvals(A):
        if lam.real < -tol:
            continue
        M = A - lam * np.eye(n)
        M = np.vstack([M, C]) if transpose else np.hstack([M, C])
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] <= tol * max(1.0, s[0]):
            bad.append(lam)
    return bad


def solve_care(A, B, Q, R, tol: float = 1e-8, max_newton: int = 30) -> np.ndarray:
    """Stabilizing solution of ``A'P + PA - P B R^-1 B' P + Q = 0``.

    The stable invariant subspace of the Hamiltonian matrix gives a first
    estimate; Newton-Kleinman iterations then polish it until the residual
    satisfies ``||res||_F < tol * (1 + ||P||_F)``.
    """
    A, B = np.atleast_2d(np.asarray(A, float)), np.atleast_2d(np.asarray(B, float))
    Q, R = np.atleast_2d(np.asarray(Q, float)), np.atleast_2d(np.asarray(R, float))
    n = A.shape[0]

    bad = _pbh_defective(A, B)
    if bad:
        raise CareError(f"(A, B) is not stabilizable: uncontrollable modes {np.round(bad, 6).tolist()}")
    Q_half = sla.sqrtm(Q).real
    bad = _pbh_defective(A, Q_half, transpose=True)
    if bad:
        raise CareError(f"(A, Q^1/2) is not detectable: unobservable modes {np.round(bad, 6).tolist()}")

    G = B @ np.linalg.solve(R, B.T)
    H = np.block([[A, -G], [-Q, -A.T]])
    _, Z, sdim = sla.schur(H, output="real", sort="lhp")
    if sdim != n:
        raise CareError(f"Hamiltonian has {sdim} stable eigenvalues, expected {n}")
    U1, U2 = Z[:n, :n], Z[n:, :n]
    P = np.linalg.solve(U1.T, U2.T).T
    P = 0.5 * (P + P.T)

    def scaled_residual(P):
        return np.linalg.norm(care_residual(A, B, Q, R, P)) / (1.0 + np.linalg.norm(P))

    for _ in range(max_newton):
        if scaled_residual(P) < 0.1 * tol:
            break
        K = np.linalg.solve(R, B.T @ P)
        Acl = A - B @ K
        P_next = sla.solve_continuous_lyapunov(Acl.T, -(Q + K.T @ R @ K))
        P_next = 0.5 * (P_next + P_next.T)
        if scaled_residual(P_next) >= scaled_residual(P):
            break
        P = P_next

    if not scaled_residual(P) < tol:
        raise CareError(f"Riccati iteration did not converge (scaled residual {scaled_residual(P):.3g})")
    return P


def lqr_gain(model: LinearizedModel, weights: LqrWeights, x_ref=None) -> LqrController:
    """Infinite-horizon LQR gain about ``model``; regulates toward ``x_ref``."""
    x_ref = model.x_eq if x_ref is None else np.asarray(x_ref, dtype=float)
    P = solve_care(model.A, model.B, weights.Q, weights.R)
    K = np.linalg.solve(weights.R, model.B.T @ P)
    eigs = np.linalg.eigvals(model.A - model.B @ K)
    if not np.max(eigs.real) < 0:
        raise CareError(f"closed loop is not Hurwitz: max Re(eig) = {np.max(eigs.real):.3g}")
    return LqrController(K=K, x_ref=x_ref, P=P, closed_loop_eigs=eigs)
