"""Free-format MPS export and import for MilpModel.

The emitted dialect is plain free MPS: NAME / ROWS / COLUMNS (with
INTORG/INTEND integrality markers) / RHS / BOUNDS / ENDATA, one coefficient
per line, names as written by the model builder. Binary variables carry BV
bounds. An objective constant is encoded as minus the RHS entry of the
objective row, the convention shared by common solvers. Output is
byte-deterministic for a given model.

The reader accepts the same dialect plus the usual bound codes (UP, LO, FX,
MI, PL, BV, UI, LI) and comment lines starting with '*'. RANGES sections are
not supported.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator

import numpy as np

from .model import SENSE_EQ, SENSE_GE, SENSE_LE, MilpModel

_SENSE_TO_CODE = {SENSE_LE: "L", SENSE_GE: "G", SENSE_EQ: "E"}
_CODE_TO_SENSE = {v: k for k, v in _SENSE_TO_CODE.items()}

OBJECTIVE_ROW = "obj"
RHS_SET = "rhs"
BOUND_SET = "bnd"


class MpsFormatError(ValueError):
    """Malformed or unsupported MPS content."""


def _fmt(value: float) -> str:
    return repr(float(value))


def iter_mps_lines(model: MilpModel, name: str = "nbsopt") -> Iterator[str]:
    """Yield the MPS file lines (without newlines) for a model."""
    yield f"NAME {name}"
    yield "ROWS"
    yield f" N {OBJECTIVE_ROW}"
    for con in model.constraints:
        yield f" {_SENSE_TO_CODE[con.sense]} {con.name}"

    # Gather all coefficients as (column, emission order, row name, value) and
    # sort by column, keeping objective entries first within each column.
    n_entries = sum(len(c.indices) for c in model.constraints) + len(
        model.objective_indices
    )
    cols = np.empty(n_entries, dtype=np.int64)
    order = np.empty(n_entries, dtype=np.int64)
    vals = np.empty(n_entries, dtype=float)
    rows: list[str] = [""] * (len(model.constraints) + 1)
    rows[0] = OBJECTIVE_ROW
    pos = len(model.objective_indices)
    cols[:pos] = model.objective_indices
    order[:pos] = 0
    vals[:pos] = model.objective_coeffs
    for k, con in enumerate(model.constraints):
        rows[k + 1] = con.name
        nxt = pos + len(con.indices)
        cols[pos:nxt] = con.indices
        order[pos:nxt] = k + 1
        vals[pos:nxt] = con.coeffs
        pos = nxt

    covered = np.zeros(model.n_variables, dtype=bool)
    covered[cols] = True
    if not covered.all():
        missing = model.variable_names[int(np.argmin(covered))]
        raise MpsFormatError(f"variable {missing!r} appears in no row; cannot export")

    perm = np.lexsort((order, cols))
    cols = cols[perm]
    order = order[perm]
    vals = vals[perm]

    yield "COLUMNS"
    in_integer = False
    marker = 0
    current = -1
    names = model.variable_names
    is_integer = model.is_integer
    for k in range(n_entries):
        c = int(cols[k])
        if c != current:
            want = bool(is_integer[c])
            if want != in_integer:
                kind = "INTORG" if want else "INTEND"
                yield f" M{marker} 'MARKER' '{kind}'"
                marker += 1
                in_integer = want
            current = c
        yield f" {names[c]} {rows[int(order[k])]} {_fmt(vals[k])}"
    if in_integer:
        yield f" M{marker} 'MARKER' 'INTEND'"

    yield "RHS"
    if model.objective_constant != 0.0:
        yield f" {RHS_SET} {OBJECTIVE_ROW} {_fmt(-model.objective_constant)}"
    for con in model.constraints:
        if con.rhs != 0.0:
            yield f" {RHS_SET} {con.name} {_fmt(con.rhs)}"

    yield "BOUNDS"
    for c in range(model.n_variables):
        if is_integer[c] and model.lower[c] == 0.0 and model.upper[c] == 1.0:
            yield f" BV {BOUND_SET} {names[c]}"
        else:
            if model.lower[c] != 0.0:
                yield f" LO {BOUND_SET} {names[c]} {_fmt(model.lower[c])}"
            if np.isfinite(model.upper[c]):
                yield f" UP {BOUND_SET} {names[c]} {_fmt(model.upper[c])}"
    yield "ENDATA"


def export_interchange(model: MilpModel, path: str | Path, name: str = "nbsopt") -> None:
    """Write the model as a free-format MPS file (byte-deterministic)."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for line in iter_mps_lines(model, name=name):
            fh.write(line)
            fh.write("\n")


@dataclass
class MpsData:
    """Parsed MPS content, sufficient to rebuild the arrays a solver needs."""

    name: str
    row_names: list[str]
    row_senses: list[str]
    column_names: list[str]
    entry_rows: np.ndarray
    entry_cols: np.ndarray
    entry_vals: np.ndarray
    objective: dict[int, float]
    objective_constant: float
    rhs: dict[int, float]
    lower: np.ndarray
    upper: np.ndarray
    is_integer: np.ndarray

    @property
    def n_rows(self) -> int:
        """Constraint rows (the objective row is not counted)."""
        return len(self.row_names)

    @property
    def n_columns(self) -> int:
        return len(self.column_names)

    def constraint_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-row (lower, upper) bounds from sense and RHS."""
        lb = np.full(self.n_rows, -np.inf)
        ub = np.full(self.n_rows, np.inf)
        for r, sense in enumerate(self.row_senses):
            rhs = self.rhs.get(r, 0.0)
            if sense == SENSE_LE:
                ub[r] = rhs
            elif sense == SENSE_GE:
                lb[r] = rhs
            else:
                lb[r] = ub[r] = rhs
        return lb, ub

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_columns)
        for col, val in self.objective.items():
            c[col] = val
        return c


class _MpsParser:
    def __init__(self) -> None:
        self.name = ""
        self.row_names: list[str] = []
        self.row_senses: list[str] = []
        self.row_index: dict[str, int] = {}
        self.objective_row: str | None = None
        self.column_names: list[str] = []
        self.col_index: dict[str, int] = {}
        self.entries: list[tuple[int, int, float]] = []
        self.objective: dict[int, float] = {}
        self.objective_constant = 0.0
        self.rhs: dict[int, float] = {}
        self.bounds: list[tuple[str, str, float | None]] = []
        self.integer_cols: set[int] = set()
        self._in_integer = False

    def _col(self, name: str) -> int:
        if name not in self.col_index:
            self.col_index[name] = len(self.column_names)
            self.column_names.append(name)
        return self.col_index[name]

    def handle_row(self, tokens: list[str]) -> None:
        code, name = tokens[0].upper(), tokens[1]
        if code == "N":
            if self.objective_row is None:
                self.objective_row = name
            return
        if code not in _CODE_TO_SENSE:
            raise MpsFormatError(f"unknown row sense {code!r}")
        self.row_index[name] = len(self.row_names)
        self.row_names.append(name)
        self.row_senses.append(_CODE_TO_SENSE[code])

    def handle_column(self, tokens: list[str]) -> None:
        if len(tokens) >= 3 and tokens[1] == "'MARKER'":
            marker = tokens[2].strip("'")
            if marker == "INTORG":
                self._in_integer = True
            elif marker == "INTEND":
                self._in_integer = False
            else:
                raise MpsFormatError(f"unknown marker {marker!r}")
            return
        if len(tokens) not in (3, 5):
            raise MpsFormatError(f"bad COLUMNS line: {' '.join(tokens)}")
        col = self._col(tokens[0])
        if self._in_integer:
            self.integer_cols.add(col)
        for k in range(1, len(tokens), 2):
            row, val = tokens[k], float(tokens[k + 1])
            if row == self.objective_row:
                self.objective[col] = self.objective.get(col, 0.0) + val
            elif row in self.row_index:
                self.entries.append((self.row_index[row], col, val))
            else:
                raise MpsFormatError(f"COLUMNS references unknown row {row!r}")

    def handle_rhs(self, tokens: list[str]) -> None:
        if len(tokens) not in (3, 5):
            raise MpsFormatError(f"bad RHS line: {' '.join(tokens)}")
        for k in range(1, len(tokens), 2):
            row, val = tokens[k], float(tokens[k + 1])
            if row == self.objective_row:
                self.objective_constant = -val
            elif row in self.row_index:
                self.rhs[self.row_index[row]] = val
            else:
                raise MpsFormatError(f"RHS references unknown row {row!r}")

    def handle_bound(self, tokens: list[str]) -> None:
        code = tokens[0].upper()
        if code in ("BV", "MI", "PL", "FR"):
            if len(tokens) != 3:
                raise MpsFormatError(f"bad BOUNDS line: {' '.join(tokens)}")
            self.bounds.append((code, tokens[2], None))
        else:
            if len(tokens) != 4:
                raise MpsFormatError(f"bad BOUNDS line: {' '.join(tokens)}")
            self.bounds.append((code, tokens[2], float(tokens[3])))

    def finish(self) -> MpsData:
        n_cols = len(self.column_names)
        lower = np.zeros(n_cols)
        upper = np.full(n_cols, np.inf)
        is_integer = np.zeros(n_cols, dtype=bool)
        for col in self.integer_cols:
            is_integer[col] = True
        for code, name, value in self.bounds:
            if name not in self.col_index:
                raise MpsFormatError(f"BOUNDS references unknown column {name!r}")
            col = self.col_index[name]
            if code == "BV":
                lower[col], upper[col] = 0.0, 1.0
                is_integer[col] = True
            elif code == "UP" or code == "UI":
                upper[col] = value
            elif code == "LO" or code == "LI":
                lower[col] = value
            elif code == "FX":
                lower[col] = upper[col] = value
            elif code == "MI":
                lower[col] = -np.inf
            elif code in ("PL", "FR"):
                upper[col] = np.inf
                if code == "FR":
                    lower[col] = -np.inf
            else:
                raise MpsFormatError(f"unknown bound code {code!r}")
        if self.entries:
            rows, cols, vals = zip(*self.entries)
        else:
            rows, cols, vals = (), (), ()
        return MpsData(
            name=self.name,
            row_names=self.row_names,
            row_senses=self.row_senses,
            column_names=self.column_names,
            entry_rows=np.asarray(rows, dtype=np.int64),
            entry_cols=np.asarray(cols, dtype=np.int64),
            entry_vals=np.asarray(vals, dtype=float),
            objective=self.objective,
            objective_constant=self.objective_constant,
            rhs=self.rhs,
            lower=lower,
            upper=upper,
            is_integer=is_integer,
        )


def read_mps(source: str | Path | IO[str]) -> MpsData:
    """Parse a free-format MPS file into arrays."""
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        lines = Path(source).read_text(encoding="utf-8").splitlines()

    parser = _MpsParser()
    section = ""
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        tokens = line.split()
        head = tokens[0].upper()
        if not line[0].isspace():
            if head == "NAME":
                parser.name = tokens[1] if len(tokens) > 1 else ""
                continue
            if head in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
                section = head
                if head == "ENDATA":
                    break
                continue
            if head == "RANGES":
                raise MpsFormatError("RANGES sections are not supported")
            raise MpsFormatError(f"line {lineno}: unknown section {tokens[0]!r}")
        try:
            if section == "ROWS":
                parser.handle_row(tokens)
            elif section == "COLUMNS":
                parser.handle_column(tokens)
            elif section == "RHS":
                parser.handle_rhs(tokens)
            elif section == "BOUNDS":
                parser.handle_bound(tokens)
            else:
                raise MpsFormatError(f"data outside any section: {line!r}")
        except MpsFormatError:
            raise
        except (ValueError, IndexError) as exc:
            raise MpsFormatError(f"line {lineno}: {exc}")
    if parser.objective_row is None:
        raise MpsFormatError("no objective (N) row declared")
    return parser.finish()
