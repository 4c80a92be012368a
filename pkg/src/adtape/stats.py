"""Memory accounting for recorded tapes.

The model predicts the identifier-management memory of a recording from five
counters: ``s_a`` assignment statements, ``s_c`` copy statements, ``s_i``
input registrations, ``i_max`` adjoint slots, and the adjoint lane count
``d``.  With ``m_d = 8`` bytes per adjoint lane entry and ``m_i = 4`` bytes
per stored identifier:

    linear:    m_d * (s_a + s_i) * d
    reuse:     m_d * i_max * d + m_i * (s_a + s_c)
    usecount:  m_d * i_max * d + m_i * s_a + m_i * i_max

For the linear scheme ``i_max`` is reported as the peak number of
simultaneously active values (the size a reuse-style adjoint vector would
need on the same recording); for the reuse schemes it is the largest
identifier ever created, which is exactly the adjoint vector size they
allocate.

``measure_tape`` reports the actual entry counts of a tape's arrays next to
the model prediction; fixed overheads (the passive slot 0 and such) are kept
out of the comparison and reported separately.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields

from . import tape as _tape

M_D = 8  # bytes per 64-bit adjoint lane entry
M_I = 4  # bytes per 32-bit identifier


@dataclass(frozen=True)
class MemoryModelInputs:
    """Counter snapshot feeding the memory model."""

    s_a: int
    s_c: int
    s_i: int
    i_max: int
    d: int = 1

    @property
    def s(self) -> int:
        return self.s_a + self.s_c + self.s_i

    def validate(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if self.d < 1:
            raise ValueError("d must be >= 1")


def memory_model(manager_kind: str, inputs: MemoryModelInputs) -> int:
    """Bytes attributable to identifier management for one recording."""
    inputs.validate()
    if manager_kind == "linear":
        return M_D * (inputs.s_a + inputs.s_i) * inputs.d
    if manager_kind == "reuse":
        return M_D * inputs.i_max * inputs.d + M_I * (inputs.s_a + inputs.s_c)
    if manager_kind == "usecount":
        return M_D * inputs.i_max * inputs.d + M_I * inputs.s_a + M_I * inputs.i_max
    raise ValueError(f"unknown manager kind: {manager_kind!r}")


@dataclass
class TapeReport:
    """Measured tape sizes plus the model prediction for one recording."""

    manager: str
    s_a: int = 0
    s_c: int = 0
    s_i: int = 0
    i_max: int = 0
    i_live_peak: int = 0
    d: int = 1
    adjoint_entries: int = 0
    adjoint_bytes: int = 0
    statement_entries: int = 0
    statement_bytes: int = 0
    argument_entries: int = 0
    argument_bytes: int = 0
    use_count_bytes: int = 0
    model_bytes: int = 0
    overhead_bytes: int = 0
    record_seconds: float = 0.0
    reverse_seconds: float = 0.0

    @property
    def index_model_bytes(self) -> int:
        return self.model_bytes


def measure_tape(tape, record_seconds: float = 0.0, reverse_seconds: float = 0.0) -> TapeReport:
    """Snapshot entry counts and byte totals of a recorded tape."""
    manager = tape.manager
    kind = manager.kind
    c = tape.counters
    adjoint_entries = manager.identifier_upper_bound
    i_max = manager.peak_live_values if kind == "linear" else adjoint_entries
    stmt_entries = tape.statements_recorded
    stmt_entry_size = _tape.BYTES_PER_ARG_COUNT + (
        _tape.BYTES_PER_IDENTIFIER if tape._stores_lhs else 0
    )
    arg_entries = tape.arguments_recorded
    use_count_bytes = (
        M_I * manager.maximum_index if hasattr(manager, "use_count") else 0
    )
    model = memory_model(kind, MemoryModelInputs(c.s_a, c.s_c, c.s_i, i_max, tape.vector_dim))
    # Slot 0 of the adjoint vector (and of the use-count array) is passive
    # bookkeeping, not per-entry data.
    overhead = _tape.BYTES_PER_ADJOINT_LANE * tape.vector_dim
    if hasattr(manager, "use_count"):
        overhead += M_I
    return TapeReport(
        manager=kind,
        s_a=c.s_a,
        s_c=c.s_c,
        s_i=c.s_i,
        i_max=i_max,
        i_live_peak=manager.peak_live_values,
        d=tape.vector_dim,
        adjoint_entries=adjoint_entries,
        adjoint_bytes=_tape.BYTES_PER_ADJOINT_LANE * adjoint_entries * tape.vector_dim,
        statement_entries=stmt_entries,
        statement_bytes=stmt_entry_size * stmt_entries,
        argument_entries=arg_entries,
        argument_bytes=(_tape.BYTES_PER_PARTIAL + _tape.BYTES_PER_IDENTIFIER) * arg_entries,
        use_count_bytes=use_count_bytes,
        model_bytes=model,
        overhead_bytes=overhead,
        record_seconds=record_seconds,
        reverse_seconds=reverse_seconds,
    )


CSV_COLUMNS = (
    "manager",
    "s_a",
    "s_c",
    "s_i",
    "i_max",
    "d",
    "adjoint_bytes",
    "statement_bytes",
    "argument_bytes",
    "model_bytes",
    "record_seconds",
    "reverse_seconds",
)

_FLOAT_COLUMNS = ("record_seconds", "reverse_seconds")


def render_report(reports, fmt: str = "csv") -> str:
    """Render reports as CSV (stable column order) or an aligned table."""
    if fmt == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            writer.writerow(
                [
                    r.manager,
                    r.s_a,
                    r.s_c,
                    r.s_i,
                    r.i_max,
                    r.d,
                    r.adjoint_bytes,
                    r.statement_bytes,
                    r.argument_bytes,
                    r.model_bytes,
                    repr(float(r.record_seconds)),
                    repr(float(r.reverse_seconds)),
                ]
            )
        return out.getvalue()
    if fmt == "table":
        header = (
            f"{'manager':<9} {'stmts':>9} {'s_a':>9} {'s_c':>8} {'s_i':>7} "
            f"{'i_max':>8} {'adjoint':>12} {'statement':>12} {'argument':>12} "
            f"{'model':>12} {'record[s]':>10} {'reverse[s]':>10}"
        )
        lines = [header, "-" * len(header)]
        for r in reports:
            lines.append(
                f"{r.manager:<9} {r.statement_entries:>9} {r.s_a:>9} {r.s_c:>8} "
                f"{r.s_i:>7} {r.i_max:>8} {r.adjoint_bytes:>12} "
                f"{r.statement_bytes:>12} {r.argument_bytes:>12} {r.model_bytes:>12} "
                f"{r.record_seconds:>10.4f} {r.reverse_seconds:>10.4f}"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format: {fmt!r}")


def parse_report(text: str) -> list[dict]:
    """Parse ``render_report(..., fmt='csv')`` output back into rows."""
    rows = []
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
        raise ValueError("unexpected CSV header")
    for rec in reader:
        row: dict = {"manager": rec["manager"]}
        for col in CSV_COLUMNS[1:]:
            row[col] = float(rec[col]) if col in _FLOAT_COLUMNS else int(rec[col])
        rows.append(row)
    return rows
