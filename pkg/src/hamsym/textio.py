"""Plain-text CSV interchange: matrices, vectors, column tables and ensembles.

Every file may open with metadata comment lines ``# key: value``. Complex
arrays are written with ``# dtype: complex`` and each entry as an ``re,im``
pair of columns. Floats use the shortest round-trip repr, so writing is a
pure function of the data.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .integrable import ActionAngleEnsemble


class TextFormatError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def _meta_lines(meta: Optional[Mapping]) -> list[str]:
    lines = []
    for k, v in (meta or {}).items():
        text = str(v).replace("\n", " ")
        lines.append(f"# {k}: {text}\n")
    return lines


def _split(text: str) -> tuple[dict, list[str]]:
    meta, body = {}, []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            key, sep, val = s[1:].partition(":")
            if sep:
                meta[key.strip()] = val.strip()
            continue
        body.append(s)
    return meta, body


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"input file not found: {path}") from exc


def dumps_array(a, meta: Optional[Mapping] = None) -> str:
    a = np.asarray(a)
    if a.ndim > 2:
        raise ValueError("only vectors and matrices are supported")
    rows = a.reshape(1, -1) if a.ndim <= 1 else a
    is_complex = np.iscomplexobj(a)
    head = {"dtype": "complex" if is_complex else "real",
            "shape": "x".join(str(s) for s in a.shape) or "scalar"}
    head.update(meta or {})
    out = _meta_lines(head)
    for row in rows:
        if is_complex:
            cells = [c for z in row for c in (fmt(z.real), fmt(z.imag))]
        else:
            cells = [fmt(x) for x in row]
        out.append(",".join(cells) + "\n")
    return "".join(out)


def loads_array(text: str) -> tuple[np.ndarray, dict]:
    meta, body = _split(text)
    if not body:
        raise TextFormatError("no numeric rows")
    try:
        rows = [[float(c) for c in line.split(",")] for line in body]
    except ValueError as exc:
        raise TextFormatError(f"non-numeric entry: {exc}") from exc
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise TextFormatError(f"ragged rows with widths {sorted(width)}")
    a = np.array(rows)
    if meta.get("dtype") == "complex":
        if a.shape[1] % 2:
            raise TextFormatError("complex rows need an even number of columns")
        a = a[:, 0::2] + 1j * a[:, 1::2]
    shape = meta.get("shape", "")
    if shape and shape != "scalar" and "x" not in shape:
        a = a.reshape(-1)
    return a, meta


def write_array(path, a, meta: Optional[Mapping] = None):
    Path(path).write_text(dumps_array(a, meta))


def read_array(path) -> tuple[np.ndarray, dict]:
    return loads_array(_read_text(path))


class Table(NamedTuple):
    columns: list
    data: np.ndarray
    meta: dict

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(f"unknown column {name!r}; have {', '.join(self.columns)}")
        return self.data[:, self.columns.index(name)]


def dumps_table(columns: Sequence[str], rows, meta: Optional[Mapping] = None) -> str:
    buf = io.StringIO()
    buf.writelines(_meta_lines(meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} cells for {len(columns)} columns")
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def loads_table(text: str) -> Table:
    meta, body = _split(text)
    if not body:
        raise TextFormatError("missing header row")
    reader = csv.reader(body)
    header = [h.strip() for h in next(reader)]
    rows = []
    for n, r in enumerate(reader, start=2):
        if len(r) != len(header):
            raise TextFormatError(f"row {n} has {len(r)} cells for {len(header)} columns")
        try:
            rows.append([float(c) for c in r])
        except ValueError as exc:
            raise TextFormatError(f"row {n}: {exc}") from exc
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return Table(header, data, meta)


def write_table(path, columns, rows, meta: Optional[Mapping] = None):
    Path(path).write_text(dumps_table(columns, rows, meta))


def read_table(path) -> Table:
    return loads_table(_read_text(path))


def data_section(text: str) -> str:
    """The file body with metadata comments removed."""
    return "".join(line + "\n" for line in text.splitlines() if not line.startswith("#"))


ENSEMBLE_COLUMNS = ("j", "k", "I", "theta")


def dumps_ensemble(ens: ActionAngleEnsemble, meta: Optional[Mapping] = None) -> str:
    rows = [(j, k, ens.actions[j, k], ens.angles[j, k])
            for j in range(ens.n_traj) for k in range(ens.n_modes)]
    return dumps_table(ENSEMBLE_COLUMNS, rows, meta)


def loads_ensemble(text: str) -> ActionAngleEnsemble:
    tab = loads_table(text)
    missing = [c for c in ENSEMBLE_COLUMNS if c not in tab.columns]
    if missing:
        raise TextFormatError(f"ensemble file lacks columns: {', '.join(missing)}")
    if tab.data.shape[0] == 0:
        raise TextFormatError("ensemble file has no rows")
    j = tab.column("j").astype(int)
    k = tab.column("k").astype(int)
    n_s, n = j.max() + 1, k.max() + 1
    if j.min() < 0 or k.min() < 0 or len(set(zip(j, k))) != j.size or j.size != n_s * n:
        raise TextFormatError("ensemble rows must cover every (j, k) exactly once")
    actions = np.empty((n_s, n))
    angles = np.empty((n_s, n))
    actions[j, k] = tab.column("I")
    angles[j, k] = tab.column("theta")
    return ActionAngleEnsemble(actions, angles)


def write_ensemble(path, ens: ActionAngleEnsemble, meta: Optional[Mapping] = None):
    Path(path).write_text(dumps_ensemble(ens, meta))


def read_ensemble(path) -> ActionAngleEnsemble:
    return loads_ensemble(_read_text(path))
