"""Plain-text file formats.

Matrix block::

    rows cols
    v11 v12 ...
    ...

Keyed documents (systems, fits) are sequences of ``key value`` lines for
scalars and ``key`` lines followed by a matrix block for arrays. Vectors are
written as 1 x k matrices. Floats use 17 significant digits so every value
round-trips exactly.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .dynamics import LatentLinearSystem, SupportMatrix, Trajectory
from .infotheory import CmiEstimate, SampleSet
from .varfit import VarFit


class FormatError(ValueError):
    pass


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


# -- matrices --------------------------------------------------------------

def matrix_lines(mat) -> list[str]:
    M = np.asarray(mat, dtype=float)
    if M.ndim == 1:
        M = M[None, :]
    rows, cols = M.shape
    return [f"{rows} {cols}"] + [" ".join(fmt_float(v) for v in row) for row in M]


def dump_matrix(mat) -> str:
    return "\n".join(matrix_lines(mat)) + "\n"


def _read_matrix(lines: list[str], pos: int) -> tuple[np.ndarray, int]:
    try:
        rows, cols = (int(tok) for tok in lines[pos].split())
    except (IndexError, ValueError):
        raise FormatError(f"line {pos + 1}: expected 'rows cols' header") from None
    if rows < 0 or cols < 0:
        raise FormatError(f"line {pos + 1}: negative dimensions")
    M = np.empty((rows, cols))
    for r in range(rows):
        idx = pos + 1 + r
        if idx >= len(lines):
            raise FormatError("matrix ends early")
        toks = lines[idx].split()
        if len(toks) != cols:
            raise FormatError(f"line {idx + 1}: expected {cols} values, got {len(toks)}")
        try:
            M[r] = [float(tok) for tok in toks]
        except ValueError as exc:
            raise FormatError(f"line {idx + 1}: {exc}") from None
    return M, pos + 1 + rows


def load_matrix(text: str) -> np.ndarray:
    lines = text.splitlines()
    M, end = _read_matrix(lines, 0)
    if any(line.strip() for line in lines[end:]):
        raise FormatError("trailing content after matrix")
    return M


# -- keyed documents -------------------------------------------------------

def _dump_keyed(items: list[tuple[str, object]]) -> str:
    out = []
    for key, val in items:
        if isinstance(val, np.ndarray):
            out.append(key)
            out.extend(matrix_lines(val))
        else:
            out.append(f"{key} {val}")
    return "\n".join(out) + "\n"


def _parse_keyed(text: str, matrix_keys) -> dict:
    lines = text.splitlines()
    doc = {}
    pos = 0
    while pos < len(lines):
        line = lines[pos].strip()
        if not line:
            pos += 1
            continue
        key, _, rest = line.partition(" ")
        if key in doc:
            raise FormatError(f"line {pos + 1}: duplicate key {key!r}")
        if matrix_keys(key):
            if rest:
                raise FormatError(f"line {pos + 1}: matrix key {key!r} takes no inline value")
            doc[key], pos = _read_matrix(lines, pos + 1)
        else:
            doc[key] = rest.strip()
            pos += 1
    return doc


def _require(doc: dict, key: str):
    if key not in doc:
        raise FormatError(f"missing key {key!r}")
    return doc[key]


_SYSTEM_MATRICES = ("a11", "a12", "a21", "a22", "noise_var", "z0")


def dump_system(system: LatentLinearSystem) -> str:
    return _dump_keyed([
        ("n", system.n),
        ("m", system.m),
        ("a11", system.a11),
        ("a12", system.a12),
        ("a21", system.a21),
        ("a22", system.a22),
        ("noise_var", system.noise_var[None, :]),
        ("z0", system.z0[None, :]),
    ])


def load_system(text: str) -> LatentLinearSystem:
    doc = _parse_keyed(text, lambda k: k in _SYSTEM_MATRICES)
    try:
        n, m = int(_require(doc, "n")), int(_require(doc, "m"))
    except ValueError:
        raise FormatError("n and m must be integers") from None
    try:
        system = LatentLinearSystem(
            a11=_require(doc, "a11"), a12=_require(doc, "a12"),
            a21=_require(doc, "a21"), a22=_require(doc, "a22"),
            noise_var=_require(doc, "noise_var").reshape(-1),
            z0=_require(doc, "z0").reshape(-1),
        )
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    if (system.n, system.m) != (n, m):
        raise FormatError(f"declared n={n}, m={m} disagree with matrix shapes")
    return system


def dump_fit(fit: VarFit) -> str:
    items = [
        ("lag", fit.lag),
        ("sample_count", fit.sample_count),
        ("drop_prefix", fit.drop_prefix),
        ("degenerate", int(fit.degenerate)),
    ]
    items += [(f"coeffs[{k}]", c) for k, c in enumerate(fit.coeffs)]
    items.append(("residual_var", fit.residual_var[None, :]))
    return _dump_keyed(items)


def load_fit(text: str) -> VarFit:
    doc = _parse_keyed(text, lambda k: k.startswith("coeffs[") or k == "residual_var")
    try:
        lag = int(_require(doc, "lag"))
        coeffs = [_require(doc, f"coeffs[{k}]") for k in range(lag)]
        return VarFit(
            lag=lag,
            coeffs=tuple(coeffs),
            residual_var=_require(doc, "residual_var").reshape(-1),
            sample_count=int(_require(doc, "sample_count")),
            drop_prefix=int(doc.get("drop_prefix", lag)),
            degenerate=bool(int(doc.get("degenerate", 0))),
        )
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def dump_support(support: SupportMatrix) -> str:
    return "".join("".join(str(int(v)) for v in row) + "\n" for row in support.entries)


def load_support(text: str) -> SupportMatrix:
    rows = [line.strip() for line in text.splitlines() if line.strip()]
    if not rows or any(set(r) - {"0", "1"} for r in rows):
        raise FormatError("support rows must be nonempty strings of 0/1")
    if len({len(r) for r in rows}) != 1:
        raise FormatError("support rows differ in length")
    return SupportMatrix(np.array([[int(c) for c in r] for r in rows], dtype=np.int8))


# -- CSV -------------------------------------------------------------------

def dump_trajectory(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x{c + 1}" for c in range(traj.n)])
    for t, row in enumerate(traj.data):
        w.writerow([t] + [fmt_float(v) for v in row])
    return buf.getvalue()


def load_trajectory(text: str) -> Trajectory:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header or header[0] != "t":
        raise FormatError("trajectory CSV must start with a 't,x1,...' header")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"line {lineno}: expected {len(header)} fields")
        if int(row[0]) != len(rows):
            raise FormatError(f"line {lineno}: time index out of sequence")
        rows.append([float(v) for v in row[1:]])
    if not rows:
        raise FormatError("trajectory has no rows")
    return Trajectory(np.array(rows, dtype=float), seed=0)


def dump_samples(samples: SampleSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(samples.column_labels)
    for row in samples.points:
        w.writerow([fmt_float(v) for v in row])
    return buf.getvalue()


def load_samples(text: str) -> SampleSet:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header:
        raise FormatError("sample CSV needs a header row")
    try:
        rows = [[float(v) for v in row] for row in reader if row]
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    if any(len(r) != len(header) for r in rows):
        raise FormatError("row length differs from header")
    return SampleSet(np.array(rows, dtype=float).reshape(-1, len(header)), tuple(header))


CMI_FIELDS = ("value", "k", "n_samples", "h_xz", "h_yz", "h_z", "h_xyz")


def cmi_row(est: CmiEstimate) -> list[str]:
    return [fmt_float(est.value), str(est.k), str(est.n_samples),
            fmt_float(est.h_xz), fmt_float(est.h_yz), fmt_float(est.h_z),
            fmt_float(est.h_xyz)]


def dump_cmi(est: CmiEstimate) -> str:
    return ",".join(CMI_FIELDS) + "\n" + ",".join(cmi_row(est)) + "\n"


def load_cmi(text: str) -> CmiEstimate:
    lines = [line for line in text.splitlines() if line.strip()]
    if lines and lines[0].split(",") == list(CMI_FIELDS):
        lines = lines[1:]
    if len(lines) != 1:
        raise FormatError("expected exactly one CMI row")
    vals = lines[0].split(",")
    if len(vals) != len(CMI_FIELDS):
        raise FormatError(f"expected {len(CMI_FIELDS)} fields")
    v, k, ns, *hs = vals
    return CmiEstimate(float(v), int(k), int(ns), *(float(h) for h in hs))


# -- atomic output ---------------------------------------------------------

def write_atomic(path, text: str) -> None:
    """Write ``text`` via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
