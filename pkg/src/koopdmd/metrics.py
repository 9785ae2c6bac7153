"""Reconstruction error statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory


@dataclass(frozen=True)
class ErrorReport:
    per_state_rmse: np.ndarray
    relative_rmse: np.ndarray
    pointwise: np.ndarray
    max_abs: np.ndarray

    def to_json(self) -> dict:
        return {
            "per_state_rmse": self.per_state_rmse.tolist(),
            "relative_rmse": self.relative_rmse.tolist(),
            "pointwise": self.pointwise.tolist(),
            "max_abs": self.max_abs.tolist(),
        }


def compare(reference, reconstruction) -> ErrorReport:
    """Error of ``reconstruction`` (n x m) against ``reference``.

    ``reference`` is a Trajectory or an ``(n, m)`` array. Relative RMSE divides
    by the per-state RMS of the reference over the whole window and is 0
    where that RMS is below 1e-300.
    """
    ref = reference.states.T if isinstance(reference, Trajectory) else np.asarray(reference, float)
    rec = np.asarray(reconstruction, dtype=float)
    if ref.shape != rec.shape:
        raise ValueError(f"shape mismatch: reference {ref.shape}, reconstruction {rec.shape}")
    err = rec - ref
    rmse = np.sqrt(np.mean(err**2, axis=1))
    ref_rms = np.sqrt(np.mean(ref**2, axis=1))
    safe = ref_rms >= 1e-300
    rel = np.zeros_like(rmse)
    rel[safe] = rmse[safe] / ref_rms[safe]
    return ErrorReport(
        per_state_rmse=rmse,
        relative_rmse=rel,
        pointwise=err,
        max_abs=np.max(np.abs(err), axis=1),
    )
