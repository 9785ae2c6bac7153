"""Extended DMD: observable dictionaries, lifted fits and Koopman eigenfunctions."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import dmd
from .dynamics import Trajectory
from .snapshots import SnapshotPair, build_snapshots

BASIS_KINDS = ("polynomial", "fourier")
_ALIASES = {"poly": "polynomial", "polynomial": "polynomial", "fourier": "fourier"}


@dataclass(frozen=True)
class Dictionary:
    """Lifting basis ``x -> Theta(x)``.

    ``polynomial``: constant, then all monomials of total degree ``1..order``
    in graded-lexicographic order (raw states at rows ``1..n``).
    ``fourier``: raw states, then ``sin(h x_i), cos(h x_i)`` for each
    coordinate ``i`` and harmonic ``h = 1..order``.

    ``constant=False`` drops the constant observable of a polynomial basis;
    with ``order=1`` this gives the states-only dictionary.
    """

    kind: str
    order: int
    n: int
    constant: bool = True

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis {self.kind!r}; supported: {', '.join(BASIS_KINDS)}")
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"basis order must be a positive integer, got {self.order}")
        if self.n < 1:
            raise ValueError(f"state dimension must be >= 1, got {self.n}")
        if self.kind == "fourier" and not self.constant:
            raise ValueError("the Fourier basis has no constant observable to drop")

    @classmethod
    def parse(cls, spec: str, n: int) -> "Dictionary":
        """Parse ``"poly:2"`` / ``"fourier:1"`` / ``"states"`` style strings."""
        if spec == "states":
            return cls.states_only(n)
        kind, _, order = spec.partition(":")
        if kind not in _ALIASES:
            raise ValueError(f"unknown basis {kind!r}; supported: {', '.join(BASIS_KINDS)}")
        try:
            order = int(order)
        except ValueError:
            raise ValueError(f"basis spec {spec!r} needs an integer order, e.g. poly:2") from None
        return cls(_ALIASES[kind], order, n)

    @classmethod
    def states_only(cls, n: int) -> "Dictionary":
        return cls("polynomial", 1, n, constant=False)

    @property
    def p(self) -> int:
        if self.kind == "polynomial":
            return comb(self.n + self.order, self.order) - (0 if self.constant else 1)
        return self.n + 2 * self.order * self.n

    @property
    def state_rows(self) -> np.ndarray:
        start = 1 if (self.kind == "polynomial" and self.constant) else 0
        return np.arange(start, start + self.n)

    def _monomials(self):
        first = 0 if self.constant else 1
        for degree in range(first, self.order + 1):
            yield from itertools.combinations_with_replacement(range(self.n), degree)

    def to_json(self) -> dict:
        d = {"kind": self.kind, "order": self.order}
        if not self.constant:
            d["constant"] = False
        return d

    @classmethod
    def from_json(cls, d: dict, n: int) -> "Dictionary":
        kind = d.get("kind")
        if kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis {kind!r}; supported: {', '.join(BASIS_KINDS)}")
        return cls(kind, int(d["order"]), n, constant=d.get("constant", True))

    def __call__(self, X) -> np.ndarray:
        """Lift a state vector (``n``) or a matrix of state columns (``n x k``)."""
        X = np.asarray(X, dtype=float)
        vector = X.ndim == 1
        cols = X[:, None] if vector else X
        if cols.shape[0] != self.n:
            raise ValueError(f"dictionary expects {self.n} states, got {cols.shape[0]}")
        if not np.all(np.isfinite(cols)):
            raise ValueError("cannot lift non-finite states")
        if self.kind == "polynomial":
            rows = [np.prod(cols[list(idx)], axis=0) for idx in self._monomials()]
        else:
            rows = list(cols)
            for i in range(self.n):
                for h in range(1, self.order + 1):
                    rows.append(np.sin(h * cols[i]))
                    rows.append(np.cos(h * cols[i]))
        Y = np.vstack(rows)
        # raw-state rows copied verbatim so projection back is exact
        Y[self.state_rows] = cols
        return Y[:, 0] if vector else Y


def lift(dictionary: Dictionary, x) -> np.ndarray:
    return dictionary(x)


def lift_snapshots(dictionary: Dictionary, snap: SnapshotPair) -> SnapshotPair:
    if snap.n != dictionary.n:
        raise ValueError(f"snapshots have {snap.n} states, dictionary expects {dictionary.n}")
    return SnapshotPair(X=dictionary(snap.X), Xp=dictionary(snap.Xp), dt=snap.dt)


@dataclass(eq=False)
class EdmdModel:
    dictionary: Dictionary
    inner: dmd.DmdModel
    notes: list = field(default_factory=list)

    @property
    def state_rows(self) -> np.ndarray:
        return self.dictionary.state_rows

    @property
    def n(self) -> int:
        return self.dictionary.n

    @property
    def dt(self) -> float:
        return self.inner.dt


@dataclass(frozen=True)
class KoopmanEigenpair:
    """Eigenvalue and coefficients of ``phi(x) = Theta(x) . xi`` (``||xi|| = 1``)."""

    lam: complex
    xi: np.ndarray

    def __call__(self, dictionary: Dictionary, X) -> np.ndarray:
        return dictionary(X).T @ self.xi


def fit_edmd(traj: Trajectory, dictionary: Dictionary, rank: dmd.Rank = "auto") -> EdmdModel:
    """DMD on lifted snapshots. ``rank`` applies in the lifted space."""
    if traj.m - 1 < 2:
        raise ValueError(f"EDMD needs at least 3 samples, got {traj.m}")
    lifted = lift_snapshots(dictionary, build_snapshots(traj))
    notes = []
    if dictionary.p > traj.m - 1:
        notes.append(f"lifted dimension {dictionary.p} exceeds snapshot count {traj.m - 1}; ill-conditioned")
    inner = dmd.fit_dmd(lifted, rank)
    return EdmdModel(dictionary=dictionary, inner=inner, notes=notes)


def lifted_operator(model: EdmdModel) -> np.ndarray:
    """The ``p x p`` operator ``Phi diag(Lambda) Phi^+`` acting on lifted states."""
    inner = model.inner
    return inner.Phi @ np.diag(inner.Lambda) @ np.linalg.pinv(inner.Phi)


def reconstruct_states(model: EdmdModel, times) -> np.ndarray:
    """Reconstruct in the lifted space, then read off the raw-state rows."""
    return dmd.reconstruct(model.inner, times)[model.state_rows]


def koopman_eigenfunctions(traj: Trajectory, dictionary: Dictionary, rcond: float = dmd.SV_RTOL):
    """Eigenpairs of ``pinv(Theta(X)) Theta(X')`` sorted by descending ``|lambda|``.

    ``Theta(X)`` has one row per sample. Returns ``(pairs, rank_deficient)``.
    """
    snap = lift_snapshots(dictionary, build_snapshots(traj))
    ThX, ThXp = snap.X.T, snap.Xp.T
    pinv = np.linalg.pinv(ThX, rcond=rcond)
    rank = np.linalg.matrix_rank(ThX, tol=rcond * np.linalg.norm(ThX, 2))
    rank_deficient = bool(rank < dictionary.p)
    if rank_deficient:
        warnings.warn("lifted data is rank deficient; minimum-norm pseudoinverse used", RuntimeWarning)
    lam, xi = np.linalg.eig(pinv @ ThXp)
    lam, xi = lam.astype(complex), xi.astype(complex)
    order = dmd._sort_order(lam)
    pairs = [KoopmanEigenpair(lam[k], xi[:, k] / np.linalg.norm(xi[:, k])) for k in order]
    return pairs, rank_deficient


def linearity_residual(pair: KoopmanEigenpair, dictionary: Dictionary, traj: Trajectory) -> float:
    """Relative violation of ``phi(x_{k+1}) = lambda phi(x_k)`` over ``traj``."""
    snap = build_snapshots(traj)
    now, nxt = pair(dictionary, snap.X), pair(dictionary, snap.Xp)
    return float(np.linalg.norm(nxt - pair.lam * now) / max(np.linalg.norm(now), 1e-300))
