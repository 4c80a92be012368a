"""Jacobian tape: statement recording and reverse adjoint interpretation.

The tape stores one record per assignment statement ``w = phi(v_1 .. v_n)``:
the partial derivatives of ``phi`` with respect to its active arguments,
evaluated at the primal point, plus the argument identifiers.  Reverse
evaluation walks the statements last-to-first and performs, for each one,

    vbar_j += (d phi / d v_j) * wbar    for all arguments j,   wbar = 0

lane-wise over the ``vector_dim`` adjoint lanes.  The left-hand-side
identifier is stored explicitly unless the manager hands identifiers out in
statement order, in which case it is reconstructed from a decrementing
counter.

Statements whose arguments are all passive are never recorded; input
registrations are tagged with argument count -1 so the interpreter skips
them, preserving the input adjoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .index_managers import ManagerCapabilities

# A statement stores its argument count in a signed byte.
MAX_ARGS_PER_STATEMENT = 127
INPUT_TAG = -1

# Entry sizes used by the byte accounting (stats module): a partial is a
# 64-bit float, identifiers and use counts are 32-bit ints, the argument
# count is one byte.
BYTES_PER_PARTIAL = 8
BYTES_PER_IDENTIFIER = 4
BYTES_PER_ARG_COUNT = 1
BYTES_PER_ADJOINT_LANE = 8


@dataclass
class TapeOptions:
    """Recording/evaluation switches.

    zero_adjoint_on_reverse=False skips clearing the left-hand-side adjoint
    after each statement reversal, leaving intermediate adjoints readable.
    That is only sound when identifiers are never reused, i.e. with the
    linear manager.
    """

    zero_adjoint_on_reverse: bool = True


@dataclass
class RecordingCounters:
    """Statement and argument counts of the current recording."""

    s_a: int = 0  # non-copy assignment statements
    s_c: int = 0  # copy statements (recorded or elided)
    s_i: int = 0  # input registrations
    s_out_unique: int = 0  # output-uniquification statements (use-count only)
    args_total: int = 0  # stored argument records

    def reset(self) -> None:
        self.s_a = self.s_c = self.s_i = self.s_out_unique = self.args_total = 0


class AdjointVector:
    """Growable array of d-lane adjoint slots indexed by identifier.

    Slot 0 belongs to passive values: it always reads as zero and writes to
    it are discarded.
    """

    def __init__(self, lanes: int = 1, size: int = 1):
        if lanes < 1:
            raise ValueError("lanes must be >= 1")
        self.lanes = lanes
        self._slots: list[list[float]] = [[0.0] * lanes for _ in range(max(size, 1))]

    def __len__(self) -> int:
        return len(self._slots)

    def ensure_size(self, size: int) -> None:
        lanes = self.lanes
        while len(self._slots) < size:
            self._slots.append([0.0] * lanes)

    def get(self, identifier: int, lane: int = 0) -> float:
        if lane >= self.lanes:
            raise IndexError(f"lane {lane} out of range (lanes={self.lanes})")
        if identifier == 0:
            return 0.0
        return self._slots[identifier][lane]

    def set(self, identifier: int, lane: int, value: float) -> None:
        if lane >= self.lanes:
            raise IndexError(f"lane {lane} out of range (lanes={self.lanes})")
        if identifier == 0:
            return  # passive slot swallows writes
        self._slots[identifier][lane] = value

    def clear(self) -> None:
        for row in self._slots:
            for j in range(self.lanes):
                row[j] = 0.0


class JacobianTape:
    """Records statements through an index manager and evaluates adjoints.

    One tape per thread; recording and reversal are single-threaded.  The
    manager instance is owned by the tape and survives tape resets so that
    identifiers held by live variables stay valid across recordings.

    ``record_explicit_lhs`` forces left-hand-side identifiers to be stored
    even when the manager makes them implicit; it exists to validate the
    implicit-counter reversal against explicit storage.
    """

    def __init__(
        self,
        manager,
        vector_dim: int = 1,
        options: TapeOptions | None = None,
        record_explicit_lhs: bool = False,
    ):
        options = options or TapeOptions()
        caps: ManagerCapabilities = manager.capabilities
        if not options.zero_adjoint_on_reverse and not caps.handles_lhs_implicitly:
            raise ValueError(
                "zero_adjoint_on_reverse=False requires the linear manager"
            )
        if vector_dim < 1:
            raise ValueError("vector_dim must be >= 1")
        self.manager = manager
        self.options = options
        self.vector_dim = vector_dim
        self._stores_lhs = record_explicit_lhs or not caps.handles_lhs_implicitly
        self._implicit_lhs = caps.handles_lhs_implicitly
        self.counters = RecordingCounters()
        self._arg_counts: list[int] = []
        self._lhs_ids: list[int] = []
        self._partials: list[float] = []
        self._arg_ids: list[int] = []
        self._adjoints: AdjointVector | None = None
        self._recording = False

    # -- recording -----------------------------------------------------

    @property
    def recording(self) -> bool:
        return self._recording

    def start_recording(self) -> None:
        self._recording = True

    def stop_recording(self) -> None:
        self._recording = False

    @property
    def statements_recorded(self) -> int:
        return len(self._arg_counts)

    @property
    def arguments_recorded(self) -> int:
        return len(self._partials)

    def store_statement(self, lhs_id: int, partials, rhs_ids) -> int:
        """Record one assignment statement; returns the new lhs identifier.

        Passive arguments are filtered out.  If nothing remains the statement
        is not recorded at all and the destination becomes passive.  The
        argument data is stored before the lhs identifier is assigned, so a
        destination that also appears on the right-hand side keeps its old
        identifier in the argument records.
        """
        pairs = [(p, r) for p, r in zip(partials, rhs_ids) if r != 0]
        if not pairs:
            # Activity filtering: a fully passive right-hand side makes the
            # destination passive and records nothing.
            self.manager.free_index(lhs_id)
            return 0
        # Wide statements are split through hidden temporaries so that the
        # argument count always fits in a signed byte.
        temps: list[int] = []
        while len(pairs) > MAX_ARGS_PER_STATEMENT:
            head = pairs[:MAX_ARGS_PER_STATEMENT]
            tid = self._append_statement(head, 0)
            self.counters.s_a += 1
            temps.append(tid)
            pairs = [(1.0, tid)] + pairs[MAX_ARGS_PER_STATEMENT:]
        new_lhs = self._append_statement(pairs, lhs_id)
        self.counters.s_a += 1
        for tid in temps:
            self.manager.free_index(tid)
        return new_lhs

    def store_copy(self, lhs_id: int, rhs_id: int) -> int:
        """Record a pure copy ``lhs = rhs`` with an active right-hand side."""
        if rhs_id == 0:
            raise ValueError("store_copy requires an active right-hand side")
        self.counters.s_c += 1
        if self.manager.capabilities.assign_needs_statement:
            return self._append_statement([(1.0, rhs_id)], lhs_id)
        return self.manager.copy_index(lhs_id, rhs_id)

    def register_input(self, var_id: int) -> int:
        """Give ``var_id`` an input identifier; returns the new identifier."""
        if not self._recording:
            raise RuntimeError("register_input requires an active recording")
        self.counters.s_i += 1
        if self._implicit_lhs:
            # Statements and identifiers are interlocked: the registration
            # itself must occupy one tagged statement.
            new = self.manager.assign_index(var_id)
            if self._stores_lhs:
                self._lhs_ids.append(new)
            self._arg_counts.append(INPUT_TAG)
            return new
        return self.manager.assign_unused_index(var_id)

    def register_output(self, var_id: int) -> int:
        """Ensure the output holds an unshared identifier."""
        if not self._recording:
            raise RuntimeError("register_output requires an active recording")
        if var_id == 0:
            return 0
        count_of = getattr(self.manager, "use_count_of", None)
        if count_of is not None and count_of(var_id) > 1:
            # Identity statement onto a fresh identifier; the other holders
            # keep the shared one.
            new = self._append_statement([(1.0, var_id)], var_id)
            self.counters.s_out_unique += 1
            return new
        return var_id

    def _append_statement(self, pairs, lhs_id: int) -> int:
        for p, r in pairs:
            self._partials.append(p)
            self._arg_ids.append(r)
        self.counters.args_total += len(pairs)
        new_lhs = self.manager.assign_index(lhs_id)
        if self._stores_lhs:
            self._lhs_ids.append(new_lhs)
        self._arg_counts.append(len(pairs))
        return new_lhs

    def free_variable(self, var_id: int) -> int:
        """Release a variable's identifier (destruction/explicit release)."""
        return self.manager.free_index(var_id)

    # -- adjoints ------------------------------------------------------

    @property
    def adjoints(self) -> AdjointVector:
        if self._adjoints is None:
            self._adjoints = AdjointVector(self.vector_dim)
        self._adjoints.ensure_size(self.manager.identifier_upper_bound + 1)
        return self._adjoints

    def set_adjoint(self, identifier: int, lane: int, value: float) -> None:
        self.adjoints.set(identifier, lane, value)

    def get_adjoint(self, identifier: int, lane: int = 0) -> float:
        return self.adjoints.get(identifier, lane)

    def clear_adjoints(self) -> None:
        if self._adjoints is not None:
            self._adjoints.clear()

    # -- evaluation ----------------------------------------------------

    def evaluate_reverse(self, adjoints: AdjointVector | None = None) -> None:
        """Propagate adjoints from outputs to inputs, statements reversed.

        The tape is left untouched and may be evaluated repeatedly.  Output
        adjoints must have been seeded by the caller.
        """
        if self._recording:
            raise RuntimeError("stop recording before evaluating")
        adj = adjoints if adjoints is not None else self.adjoints
        required = self.manager.identifier_upper_bound + 1
        if len(adj) < required:
            raise ValueError(
                f"adjoint vector too short: {len(adj)} slots, need {required}"
            )
        if adjoints is not None and adj.lanes != self.vector_dim:
            raise ValueError("adjoint vector lane count does not match the tape")

        slots = adj._slots
        lanes = adj.lanes
        zero_lhs = self.options.zero_adjoint_on_reverse
        arg_counts = self._arg_counts
        lhs_ids = self._lhs_ids
        partials = self._partials
        arg_ids = self._arg_ids
        cursor = len(partials)
        implicit_lhs = len(arg_counts)  # valid only for the implicit scheme

        for si in range(len(arg_counts) - 1, -1, -1):
            n = arg_counts[si]
            if n == INPUT_TAG:
                # Registration statements only occupy an identifier slot;
                # skipping them preserves the input adjoints.
                implicit_lhs -= 1
                continue
            lhs = lhs_ids[si] if self._stores_lhs else implicit_lhs
            implicit_lhs -= 1
            row = slots[lhs]
            if lanes == 1:
                w = row[0]
                if zero_lhs:
                    row[0] = 0.0
                if w != 0.0:
                    for k in range(cursor - n, cursor):
                        slots[arg_ids[k]][0] += partials[k] * w
            else:
                w = row[:]
                if zero_lhs:
                    for j in range(lanes):
                        row[j] = 0.0
                if any(w):
                    for k in range(cursor - n, cursor):
                        target = slots[arg_ids[k]]
                        p = partials[k]
                        for j in range(lanes):
                            target[j] += p * w[j]
            cursor -= n

    # -- lifecycle -------------------------------------------------------

    def reset_tape(self) -> None:
        """Clear storage and counters, zero adjoints, reset the manager.

        Identifiers held by surviving variables stay valid; the reuse
        managers reclaim them on overwrite or destruction.
        """
        self._arg_counts.clear()
        self._lhs_ids.clear()
        self._partials.clear()
        self._arg_ids.clear()
        self.counters.reset()
        if self._adjoints is not None:
            self._adjoints.clear()
        self.manager.reset()
        self._recording = False
