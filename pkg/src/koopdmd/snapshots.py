"""Paired snapshot matrices built from a trajectory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory


@dataclass(frozen=True)
class SnapshotPair:
    """``X`` holds samples ``0..m-2`` as columns, ``Xp`` samples ``1..m-1``."""

    X: np.ndarray
    Xp: np.ndarray
    dt: float

    def __post_init__(self):
        if self.X.shape != self.Xp.shape:
            raise ValueError(f"X {self.X.shape} and Xp {self.Xp.shape} differ in shape")
        if self.X.ndim != 2 or self.X.shape[1] < 1:
            raise ValueError("snapshot matrices must be 2-D with at least one column")

    @property
    def n(self) -> int:
        return self.X.shape[0]


def build_snapshots(traj: Trajectory) -> SnapshotPair:
    """Split ``traj`` into the current/next snapshot matrices. Inputs are ignored."""
    if traj.m < 2:
        raise ValueError(f"need at least 2 samples to build snapshots, got {traj.m}")
    data = np.ascontiguousarray(traj.states.T)
    return SnapshotPair(X=data[:, :-1].copy(), Xp=data[:, 1:].copy(), dt=traj.dt)
