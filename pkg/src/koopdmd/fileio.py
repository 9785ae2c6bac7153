"""Trajectory CSV and model JSON persistence.

Trajectory CSV: header ``t,<state names>[,u]``, one row per sample, values
written with 17 significant digits. Model JSON: a versioned object with
complex arrays stored as row-major lists of ``[re, im]`` pairs.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from .dmd import DmdModel
from .dynamics import STATE_NAMES, Trajectory
from .edmd import Dictionary, EdmdModel

SCHEMA_VERSION = 1
DT_TOL = 1e-9
_INPUT_COL = re.compile(r"^u\d*$")


class FileFormatError(ValueError):
    pass


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_trajectory(traj: Trajectory, path) -> None:
    header = ["t", *traj.state_names]
    columns = [traj.times[:, None], traj.states]
    if traj.inputs is not None:
        l = traj.inputs.shape[1]
        header += ["u"] if l == 1 else [f"u{i + 1}" for i in range(l)]
        columns.append(traj.inputs)
    rows = np.hstack(columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([_fmt(v) for v in row] for row in rows)


def _check_known_columns(state_cols, system):
    known = {system: STATE_NAMES[system]} if system else STATE_NAMES
    for name, expected in known.items():
        overlap = set(state_cols) & set(expected)
        if system or overlap:
            missing = [c for c in expected if c not in state_cols]
            if missing:
                raise FileFormatError(f"line 1: missing column {missing[0]!r} for {name} trajectory")
            extra = [c for c in state_cols if c not in expected]
            if extra and system:
                raise FileFormatError(f"line 1: unexpected column {extra[0]!r} for {name} trajectory")
            if not extra:
                return name
    return None


def load_trajectory(path, system=None) -> Trajectory:
    """Read a trajectory CSV, validating header, shape and sampling.

    ``system`` (optional) pins the expected state columns.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FileFormatError("line 1: empty file, expected a header")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "t":
        raise FileFormatError("line 1: missing column 't' (first column must be time)")
    if len(set(header)) != len(header):
        raise FileFormatError("line 1: duplicate column names")
    names = header[1:]
    input_idx = [i for i, h in enumerate(names) if _INPUT_COL.match(h)]
    state_names = [h for h in names if not _INPUT_COL.match(h)]
    if input_idx and input_idx != list(range(len(names) - len(input_idx), len(names))):
        raise FileFormatError("line 1: input columns must follow the state columns")
    if not state_names:
        raise FileFormatError("line 1: no state columns")
    detected = _check_known_columns(state_names, system)

    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FileFormatError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        try:
            data.append([float(c) for c in row])
        except ValueError as exc:
            raise FileFormatError(f"line {lineno}: non-numeric cell ({exc})") from None
    if len(data) < 2:
        raise FileFormatError(f"line {len(rows)}: need at least 2 samples, got {len(data)}")
    data = np.array(data)
    if not np.all(np.isfinite(data)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(data), axis=1))[0])
        raise FileFormatError(f"line {bad + 2}: non-finite value")

    t = data[:, 0]
    dt = t[1] - t[0]
    drift = np.abs(t - t[0] - np.arange(len(t)) * dt)
    if not dt > 0 or abs(t[0]) > DT_TOL or np.max(drift) > DT_TOL:
        bad = int(np.argmax(drift)) if dt > 0 else 1
        raise FileFormatError(f"line {bad + 2}: time column is not uniformly sampled from 0")
    n = len(state_names)
    inputs = data[:, 1 + n :] if input_idx else None
    return Trajectory(
        dt=float(dt),
        states=data[:, 1 : 1 + n],
        inputs=inputs,
        state_names=tuple(state_names),
        system=detected,
    )


def _pack(a) -> dict:
    a = np.asarray(a)
    if np.iscomplexobj(a) or a.dtype.kind == "f":
        flat = np.asarray(a, dtype=complex).ravel()
        data = [None if not np.isfinite(z) else [float(z.real), float(z.imag)] for z in flat]
    else:
        raise TypeError(f"cannot pack array of dtype {a.dtype}")
    return {"shape": list(a.shape), "data": data}


def _unpack(d: dict) -> np.ndarray:
    vals = [complex(np.nan, np.nan) if z is None else complex(z[0], z[1]) for z in d["data"]]
    return np.array(vals, dtype=complex).reshape(d["shape"])


def _real_if_exact(a: np.ndarray) -> np.ndarray:
    return a.real.copy() if not np.any(a.imag) else a


def _dmd_fields(m: DmdModel) -> dict:
    return {
        "rank_requested": m.rank_requested,
        "b_residual": m.b_residual,
        "notes": list(m.notes),
        "S": [float(s) for s in m.S],
        "U": _pack(m.U),
        "A_tilde": _pack(m.A_tilde),
        "Lambda": _pack(m.Lambda),
        "W": _pack(m.W),
        "Phi": _pack(m.Phi),
        "Omega": _pack(m.Omega),
        "b": _pack(m.b),
    }


def model_to_json(model) -> dict:
    if isinstance(model, EdmdModel):
        inner = model.inner
        head = {"kind": "edmd", "n": model.n, "p": model.dictionary.p, "basis": model.dictionary.to_json()}
        extra = {"edmd_notes": list(model.notes)}
    elif isinstance(model, DmdModel):
        inner = model
        head = {"kind": "dmd", "n": model.n, "p": model.n, "basis": None}
        extra = {}
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return {"schema_version": SCHEMA_VERSION, **head, "r": inner.r, "dt": inner.dt, **_dmd_fields(inner), **extra}


def model_from_json(d: dict):
    version = d.get("schema_version")
    if version != SCHEMA_VERSION:
        raise FileFormatError(f"schema version mismatch: file has {version}, expected {SCHEMA_VERSION}")
    kind = d.get("kind")
    if kind not in ("dmd", "edmd"):
        raise FileFormatError(f"unknown model kind {kind!r}; expected 'dmd' or 'edmd'")
    Omega = _unpack(d["Omega"])
    Omega[np.isnan(Omega.real)] = complex(np.nan, 0.0)
    inner = DmdModel(
        r=int(d["r"]),
        A_tilde=_real_if_exact(_unpack(d["A_tilde"])),
        Lambda=_unpack(d["Lambda"]),
        W=_unpack(d["W"]),
        Phi=_unpack(d["Phi"]),
        Omega=Omega,
        b=_unpack(d["b"]),
        dt=float(d["dt"]),
        U=_real_if_exact(_unpack(d["U"])),
        S=np.array(d["S"], dtype=float),
        rank_requested=d.get("rank_requested"),
        b_residual=float(d.get("b_residual", 0.0)),
        notes=list(d.get("notes", [])),
    )
    if kind == "dmd":
        return inner
    try:
        dictionary = Dictionary.from_json(d["basis"] or {}, int(d["n"]))
    except ValueError as exc:
        raise FileFormatError(str(exc)) from None
    if dictionary.p != d.get("p", dictionary.p) or inner.Phi.shape[0] != dictionary.p:
        raise FileFormatError(f"lifted dimension mismatch: basis gives {dictionary.p}, modes have {inner.Phi.shape[0]}")
    return EdmdModel(dictionary=dictionary, inner=inner, notes=list(d.get("edmd_notes", [])))


def dumps_model(model) -> str:
    return json.dumps(model_to_json(model), indent=1, allow_nan=False) + "\n"


def save_model(model, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"line {exc.lineno}: invalid JSON ({exc.msg})") from None
    return model_from_json(d)
