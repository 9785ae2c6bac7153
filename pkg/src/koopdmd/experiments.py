"""Run configurations and the benchmark sweep.

A :class:`RunSpec` collects everything needed to simulate one scenario and
fit one model. :func:`run_sweep` evaluates the grid
``{pendulum, cartpole} x {uncontrolled, lqr} x {dmd, poly:2, poly:3, fourier:1, fourier:2}``.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import dmd, edmd, fileio
from .control import LqrWeights, lqr_gain, linearize
from .dynamics import (
    DEFAULT_DT,
    DEFAULT_HORIZON,
    SYSTEMS,
    CartPoleParams,
    PendulumParams,
    Trajectory,
    simulate,
    state_dim,
)
from .metrics import compare
from .snapshots import build_snapshots

SCENARIOS = {
    "pendulum": {"x0": [np.pi / 4, 0.0], "x_ref": [0.0, 0.0], "q": [0.0, 10.0], "r": [1.0]},
    "cartpole": {"x0": [-1.0, 0.0, np.pi, 0.0], "x_ref": [1.0, 0.0, np.pi, 0.0], "q": [5.0, 10.0, 0.0, 0.0], "r": [1.0]},
}
METHODS = ("dmd", "poly:2", "poly:3", "fourier:1", "fourier:2")
# "no truncation" for the cubic basis
FULL_RANK_METHODS = ("poly:3",)


@dataclass
class RunSpec:
    system: str = "pendulum"
    params: dict = field(default_factory=dict)
    x0: Optional[list] = None
    dt: float = DEFAULT_DT
    steps: int = int(round(DEFAULT_HORIZON / DEFAULT_DT))
    control: str = "none"
    q: Optional[list] = None
    r: Optional[list] = None
    x_ref: Optional[list] = None
    method: str = "dmd"
    basis: Optional[str] = None
    rank: str = "auto"

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}; supported: {', '.join(SYSTEMS)}")
        defaults = SCENARIOS[self.system]
        n = state_dim(self.system)
        for name in ("x0", "x_ref", "q", "r"):
            if getattr(self, name) is None:
                setattr(self, name, list(defaults[name]))
        for name, size in (("x0", n), ("x_ref", n), ("q", n), ("r", 1)):
            vals = [float(v) for v in getattr(self, name)]
            if len(vals) != size:
                raise ValueError(f"{name} needs {size} values for {self.system}, got {len(vals)}")
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"{name} must be finite")
            setattr(self, name, vals)
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.steps) < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.control not in ("none", "lqr"):
            raise ValueError(f"control must be 'none' or 'lqr', got {self.control!r}")
        if self.method not in ("dmd", "edmd"):
            raise ValueError(f"method must be 'dmd' or 'edmd', got {self.method!r}")
        if self.method == "edmd":
            edmd.Dictionary.parse(self.basis or "", n)
        if self.rank not in ("auto", "full"):
            dmd._parse_rank(self.rank)
        self.system_params()

    def system_params(self):
        cls = PendulumParams if self.system == "pendulum" else CartPoleParams
        try:
            return cls(**{k: float(v) for k, v in self.params.items()})
        except TypeError:
            raise ValueError(f"unknown {self.system} parameter in {sorted(self.params)}") from None

    @classmethod
    def from_json(cls, path) -> "RunSpec":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown RunSpec keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def controller(self):
        if self.control != "lqr":
            return None
        params = self.system_params()
        model = linearize(self.system, params, self.x_ref)
        return lqr_gain(model, LqrWeights.from_diagonals(self.q, self.r), self.x_ref)

    def simulate(self) -> Trajectory:
        return simulate(self.system, self.system_params(), self.x0, self.dt, int(self.steps), self.controller())

    def dictionary(self, n: int) -> Optional[edmd.Dictionary]:
        return edmd.Dictionary.parse(self.basis, n) if self.method == "edmd" else None


def resolve_rank(rank, dictionary: Optional[edmd.Dictionary], n: int):
    if rank == "full":
        return dictionary.p if dictionary is not None else n
    return rank


def fit(traj: Trajectory, method: str, basis: Optional[str] = None, rank="auto"):
    """Fit a DMD or EDMD model to ``traj``."""
    if method == "dmd":
        return dmd.fit_dmd(build_snapshots(traj), resolve_rank(rank, None, traj.n))
    dictionary = edmd.Dictionary.parse(basis, traj.n)
    return edmd.fit_edmd(traj, dictionary, resolve_rank(rank, dictionary, traj.n))


def reconstruct(model, times) -> np.ndarray:
    if isinstance(model, edmd.EdmdModel):
        return edmd.reconstruct_states(model, times)
    return dmd.reconstruct(model, times)


def cell_name(system: str, control: str, method: str) -> str:
    return f"{system}_{control}_{method.replace(':', '')}"


def _run_cell(system: str, control: str, method: str, out_dir: str) -> dict:
    spec = RunSpec(
        system=system,
        control=control,
        method="dmd" if method == "dmd" else "edmd",
        basis=None if method == "dmd" else method,
        rank="full" if method in FULL_RANK_METHODS else "auto",
    )
    cell = cell_name(system, control, method)
    row = {"cell": cell, "system": system, "control": control, "method": method}
    path = Path(out_dir) / cell
    path.mkdir(parents=True, exist_ok=True)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            traj = spec.simulate()
            model = fit(traj, spec.method, spec.basis, spec.rank)
            rec = reconstruct(model, traj.times)
        report = compare(traj, rec)
        fileio.save_trajectory(traj, path / "trajectory.csv")
        fileio.save_trajectory(Trajectory(dt=traj.dt, states=rec.T, state_names=traj.state_names), path / "reconstruction.csv")
        fileio.save_model(model, path / "model.json")
        (path / "metrics.json").write_text(json.dumps(report.to_json()) + "\n", encoding="utf-8")
        inner = model.inner if isinstance(model, edmd.EdmdModel) else model
        row.update(
            ok=True,
            rank=inner.r,
            relative_rmse=report.relative_rmse.tolist(),
            max_relative_rmse=float(np.max(report.relative_rmse)),
            warnings=[str(w.message) for w in caught],
        )
    except Exception as exc:  # a failed cell is recorded, not fatal
        row.update(ok=False, error=f"{type(exc).__name__}: {exc}")
    return row


def run_sweep(out_dir, jobs: int = 1, systems=SYSTEMS, controls=("none", "lqr"), methods=METHODS) -> list:
    """Run every cell, writing per-cell artifacts plus ``summary.md``/``summary.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = [(s, c, m, str(out_dir)) for s in systems for c in controls for m in methods]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, *zip(*cells)))
    else:
        rows = [_run_cell(*cell) for cell in cells]
    (out_dir / "summary.json").write_text(json.dumps(rows, indent=1) + "\n", encoding="utf-8")
    (out_dir / "summary.md").write_text(summary_markdown(rows), encoding="utf-8")
    return rows


def summary_markdown(rows) -> str:
    lines = [
        "| system | control | method | rank | relative RMSE per state | max |",
        "|---|---|---|---|---|---|",
    ]
    for row in rows:
        if row["ok"]:
            per_state = ", ".join(f"{v:.4g}" for v in row["relative_rmse"])
            lines.append(
                f"| {row['system']} | {row['control']} | {row['method']} | {row['rank']} "
                f"| {per_state} | {row['max_relative_rmse']:.4g} |"
            )
        else:
            lines.append(f"| {row['system']} | {row['control']} | {row['method']} | - | FAILED: {row['error']} | - |")
    return "\n".join(lines) + "\n"


def find_cell(rows, system, control, method) -> dict:
    for row in rows:
        if (row["system"], row["control"], row["method"]) == (system, control, method):
            return row
    raise KeyError((system, control, method))

