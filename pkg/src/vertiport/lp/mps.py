"""Fixed-format MPS export of linear and mixed-binary programs.

Names are synthesised (``R0000001``, ``C0000001``) to fit the 8-character
fields; numbers are written with as many significant digits as fit in the
12-character value fields.
"""
from __future__ import annotations

from typing import Iterable, Optional, TextIO

import numpy as np
import scipy.sparse as sp

from .model import LinearProgram


def _num(v: float) -> str:
    for digits in range(12, 0, -1):
        s = f"{v:.{digits}g}"
        if len(s) <= 12:
            return s
    raise ValueError(f"cannot fit {v!r} in an MPS field")


def _line(f1: str = "", f2: str = "", f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    s = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        s += f"   {f5:<8}  {f6:>12}"
    return s.rstrip()


def write_mps(lp: LinearProgram, out: TextIO, binaries: Optional[Iterable[int]] = None, name: str = "VERTIPRT") -> None:
    n = lp.n
    rows = [f"R{i + 1:07d}" for i in range(lp.m_eq + lp.m_le)]
    cols = [f"C{j + 1:07d}" for j in range(n)]
    bins = set() if binaries is None else {int(b) for b in binaries}
    A = sp.vstack([lp.A_eq, lp.A_le]).tocsc()
    out.write(f"NAME          {name}\n")
    out.write("ROWS\n")
    out.write(" N  OBJ\n")
    for i, r in enumerate(rows):
        out.write(f" {'E' if i < lp.m_eq else 'L'}  {r}\n")
    out.write("COLUMNS\n")
    in_int = False
    marker = 0
    for j in range(n):
        if (j in bins) != in_int:
            tag = "'INTORG'" if not in_int else "'INTEND'"
            out.write(f"    M{marker:07d}  'MARKER'                 {tag}\n")
            marker += 1
            in_int = not in_int
        entries = []
        if lp.c[j] != 0.0:
            entries.append(("OBJ", lp.c[j]))
        s, e = A.indptr[j], A.indptr[j + 1]
        entries.extend((rows[i], v) for i, v in zip(A.indices[s:e], A.data[s:e]))
        if not entries:
            entries.append(("OBJ", 0.0))
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            if len(pair) == 2:
                out.write(_line("", cols[j], pair[0][0], _num(pair[0][1]), pair[1][0], _num(pair[1][1])) + "\n")
            else:
                out.write(_line("", cols[j], pair[0][0], _num(pair[0][1])) + "\n")
    if in_int:
        out.write(f"    M{marker:07d}  'MARKER'                 'INTEND'\n")
    out.write("RHS\n")
    b = np.concatenate([lp.b_eq, lp.b_le])
    for i in np.flatnonzero(b):
        out.write(_line("", "RHS", rows[i], _num(b[i])) + "\n")
    out.write("BOUNDS\n")
    for j in range(n):
        lo, up = lp.lb[j], lp.ub[j]
        if j in bins and lo == 0.0 and up == 1.0:
            out.write(_line("BV", "BND", cols[j]) + "\n")
            continue
        if lo == up:
            out.write(_line("FX", "BND", cols[j], _num(lo)) + "\n")
            continue
        if lo == -np.inf and up == np.inf:
            out.write(_line("FR", "BND", cols[j]) + "\n")
            continue
        if lo == -np.inf:
            out.write(_line("MI", "BND", cols[j]) + "\n")
        elif lo != 0.0:
            out.write(_line("LO", "BND", cols[j], _num(lo)) + "\n")
        if up != np.inf:
            out.write(_line("UP", "BND", cols[j], _num(up)) + "\n")
    out.write("ENDATA\n")


def read_mps(src: TextIO) -> tuple[LinearProgram, list[int]]:
    """Read back a file produced by :func:`write_mps` (``E``/``L`` rows only)."""
    section = None
    row_kind: dict[str, str] = {}
    row_order: list[str] = []
    col_index: dict[str, int] = {}
    entries: list[tuple[str, int, float]] = []
    rhs: dict[str, float] = {}
    bounds: list[tuple[str, int, float]] = []
    bins: list[int] = []
    in_int = False
    for raw in src:
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw.startswith(" "):
            section = raw.split()[0]
            continue
        tok = raw.split()
        if section == "ROWS":
            row_kind[tok[1]] = tok[0]
            if tok[0] != "N":
                row_order.append(tok[1])
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                in_int = tok[2] == "'INTORG'"
                continue
            j = col_index.setdefault(tok[0], len(col_index))
            if in_int and j not in bins:
                bins.append(j)
            for k in range(1, len(tok) - 1, 2):
                entries.append((tok[k], j, float(tok[k + 1])))
        elif section == "RHS":
            for k in range(1, len(tok) - 1, 2):
                rhs[tok[k]] = float(tok[k + 1])
        elif section == "BOUNDS":
            val = float(tok[3]) if len(tok) > 3 else 0.0
            bounds.append((tok[0], col_index[tok[2]], val))
    n = len(col_index)
    eq_rows = [r for r in row_order if row_kind[r] == "E"]
    le_rows = [r for r in row_order if row_kind[r] == "L"]
    eq_pos = {r: i for i, r in enumerate(eq_rows)}
    le_pos = {r: i for i, r in enumerate(le_rows)}
    c = np.zeros(n)
    Aeq = sp.lil_matrix((len(eq_rows), n))
    Ale = sp.lil_matrix((len(le_rows), n))
    for r, j, v in entries:
        if row_kind[r] == "N":
            c[j] = v
        elif r in eq_pos:
            Aeq[eq_pos[r], j] = v
        else:
            Ale[le_pos[r], j] = v
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    for kind, j, v in bounds:
        if kind == "UP":
            ub[j] = v
        elif kind == "LO":
            lb[j] = v
        elif kind == "FX":
            lb[j] = ub[j] = v
        elif kind == "FR":
            lb[j], ub[j] = -np.inf, np.inf
        elif kind == "MI":
            lb[j] = -np.inf
        elif kind == "BV":
            lb[j], ub[j] = 0.0, 1.0
    b_eq = np.array([rhs.get(r, 0.0) for r in eq_rows])
    b_le = np.array([rhs.get(r, 0.0) for r in le_rows])
    return LinearProgram.build(c, Aeq, b_eq, Ale, b_le, lb, ub), bins
