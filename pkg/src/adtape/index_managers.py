"""Identifier management schemes for reverse-mode AD tapes.

An identifier is a 32-bit signed integer naming a slot in the global adjoint
vector.  Identifier 0 is reserved for passive values (values that do not
depend on any registered input) and may be held by any number of variables at
once.  Nonzero identifiers obey a uniqueness discipline whose enforcement is
the job of the manager:

* ``LinearIndexManager`` hands out a fresh identifier for every assignment
  and never reclaims anything.  Statements and identifiers are interlocked
  (one identifier per recorded statement), so the tape can reconstruct
  left-hand-side identifiers by counting statements instead of storing them.
* ``ReuseIndexManager`` couples identifier lifetime to variable lifetime and
  recycles released identifiers through a free pool.  A second pool of
  never-yet-distributed identifiers makes input registration safe in the
  middle of a recording.
* ``UseCountIndexManager`` adds per-identifier reference counts on top of the
  reuse scheme, which lets pure copies share one identifier and therefore
  skip the copy statement entirely.

All managers are single-threaded: one instance per tape, no internal
synchronization.
"""

from __future__ import annotations

from dataclasses import dataclass

# Identifiers are kept inside the positive range of a 32-bit signed int.
INDEX_MAX = 2**31 - 1


class IdentifierSpaceExhausted(RuntimeError):
    """Raised when a manager would distribute an identifier beyond INDEX_MAX.

    This is fatal: the recording is beyond the supported tape size.
    """


@dataclass(frozen=True)
class ManagerCapabilities:
    """Static properties of a management scheme that the tape dispatches on.

    assign_needs_statement: pure copies must record a tape statement.
    handles_lhs_implicitly: left-hand-side identifiers are reconstructed from
        statement order and need not be stored.
    bulk_copy_safe: identifiers survive C-like bitwise duplication of
        (value, identifier) pairs.
    """

    assign_needs_statement: bool
    handles_lhs_implicitly: bool
    bulk_copy_safe: bool


class LinearIndexManager:
    """Distributes identifiers 1, 2, 3, ... one per assignment, never reused."""

    kind = "linear"
    capabilities = ManagerCapabilities(
        assign_needs_statement=False,
        handles_lhs_implicitly=True,
        bulk_copy_safe=True,
    )

    def __init__(self) -> None:
        self.last_index = 0
        self.live_values = 0
        self.peak_live_values = 0

    @property
    def identifier_upper_bound(self) -> int:
        """Largest identifier that may currently be referenced."""
        return self.last_index

    def assign_index(self, index: int) -> int:
        """Return a fresh identifier; the old one is simply abandoned."""
        if self.last_index >= INDEX_MAX:
            raise IdentifierSpaceExhausted(
                "linear identifier space exhausted at %d" % self.last_index
            )
        self.last_index += 1  # identifier 0 stays reserved for passive values
        self._note_transition(index, self.last_index)
        return self.last_index

    def assign_unused_index(self, index: int) -> int:
        # Every linear identifier is unused by construction.
        return self.assign_index(index)

    def free_index(self, index: int) -> int:
        """No-op release; the caller's identifier value is left in place."""
        self._note_transition(index, 0)
        return index

    def copy_index(self, lhs: int, rhs: int) -> int:
        """Share the right-hand identifier: the assign optimization."""
        self._note_transition(lhs, rhs)
        return rhs

    def reset(self) -> None:
        self.last_index = 0
        # Values surviving the reset still hold identifiers; only the peak
        # restarts, so it reports per-recording.
        self.peak_live_values = self.live_values

    def _note_transition(self, old: int, new: int) -> None:
        # Tracks the number of simultaneously active values, which is what a
        # reuse-style manager would need on the same recording.
        self.live_values += (new != 0) - (old != 0)
        if self.live_values > self.peak_live_values:
            self.peak_live_values = self.live_values


class ReuseIndexManager:
    """Recycles identifiers through a free pool once their holder dies.

    Two pools are kept: ``free_pool`` holds identifiers released during any
    recording (they may already appear on the current tape), ``unused_pool``
    holds identifiers never distributed since the last reset.  Input
    registration draws from the unused pool only, so a freshly registered
    input can never collide with an adjoint slot already referenced by the
    current tape.

    ``reset`` must not forget identifiers: variables surviving a reset still
    hold theirs and will release them on overwrite or destruction.  Reset
    therefore only migrates the free pool into the unused pool.
    """

    kind = "reuse"
    capabilities = ManagerCapabilities(
        assign_needs_statement=True,
        handles_lhs_implicitly=False,
        bulk_copy_safe=False,
    )

    def __init__(self, block_size: int = 256) -> None:
        if block_size < 1:
            raise ValueError("block_size must be positive")
        self.block_size = block_size
        self.maximum_index = 0
        # Pools are preallocated arrays plus a count of valid entries; they
        # grow by whole blocks and never shrink.
        self.free_pool = [0] * block_size
        self.free_count = 0
        self.unused_pool = [0] * block_size
        self.unused_count = 0
        self.live_values = 0
        self.peak_live_values = 0
        self._create_new_indices()

    @property
    def identifier_upper_bound(self) -> int:
        return self.maximum_index

    def assign_index(self, index: int) -> int:
        """Give ``index`` a valid identifier, keeping a nonzero one in place.

        The old identifier's lifecycle ends exactly when its holder is
        overwritten, so it can serve the new value without a round trip
        through the free pool.
        """
        if index != 0:
            return index
        if self.free_count == 0:
            return self.assign_unused_index(index)
        self.free_count -= 1
        new = self.free_pool[self.free_count]
        self._note_transition(index, new)
        return new

    def assign_unused_index(self, index: int) -> int:
        """Force ``index`` onto an identifier never distributed since reset."""
        old = index
        if index != 0:
            self._push_free(index)  # force the change of identifier
        if self.unused_count == 0:
            self._create_new_indices()
        self.unused_count -= 1
        new = self.unused_pool[self.unused_count]
        self._note_transition(old, new)
        return new

    def free_index(self, index: int) -> int:
        if index != 0:
            self._push_free(index)
            self._note_transition(index, 0)
        return 0

    def copy_index(self, lhs: int, rhs: int) -> int:
        # No sharing possible: ensure lhs is valid when rhs is active.
        if rhs != 0:
            return self.assign_index(lhs)
        return self.free_index(lhs)

    def reset(self) -> None:
        """Migrate the free pool into the unused pool; forget nothing."""
        total = self.free_count + self.unused_count
        if len(self.unused_pool) < total:
            self.unused_pool.extend([0] * (total - len(self.unused_pool)))
        for k in range(self.free_count):
            self.unused_pool[self.unused_count + k] = self.free_pool[k]
        self.unused_count = total
        self.free_count = 0
        self.peak_live_values = self.live_values

    def _create_new_indices(self) -> None:
        # Only called when the unused pool is empty; capacity is at least one
        # block from construction, and reset only ever grows it.
        if self.maximum_index > INDEX_MAX - self.block_size:
            raise IdentifierSpaceExhausted(
                "reuse identifier space exhausted at %d" % self.maximum_index
            )
        for k in range(self.block_size):
            self.maximum_index += 1
            self.unused_pool[k] = self.maximum_index
        self.unused_count = self.block_size

    def _push_free(self, index: int) -> None:
        if self.free_count == len(self.free_pool):
            self.free_pool.extend([0] * self.block_size)
        self.free_pool[self.free_count] = index
        self.free_count += 1

    def _note_transition(self, old: int, new: int) -> None:
        self.live_values += (new != 0) - (old != 0)
        if self.live_values > self.peak_live_values:
            self.peak_live_values = self.live_values


class UseCountIndexManager(ReuseIndexManager):
    """Reuse manager with reference counts, enabling identifier sharing.

    Copies increment the count of the shared identifier instead of recording
    a statement; an identifier returns to the free pool only when its last
    holder releases it.  ``use_count`` is a dense array indexed by identifier
    and resized whenever a new block of identifiers is created.
    """

    kind = "usecount"
    capabilities = ManagerCapabilities(
        assign_needs_statement=False,
        handles_lhs_implicitly=False,
        bulk_copy_safe=False,
    )

    def __init__(self, block_size: int = 256) -> None:
        self.use_count: list[int] = [0]
        super().__init__(block_size)

    def use_count_of(self, index: int) -> int:
        return self.use_count[index]

    def assign_index(self, index: int) -> int:
        old = index
        if index != 0:
            self.use_count[index] -= 1
            if self.use_count[index] == 0:
                # Last holder: the identifier can serve the new value.
                self.use_count[index] += 1
                return index
            index = self._next_pooled()
        else:
            index = self._next_pooled()
        self.use_count[index] += 1
        self._note_transition(old, index)
        return index

    def assign_unused_index(self, index: int) -> int:
        old = index
        if index != 0:
            self.use_count[index] -= 1
            if self.use_count[index] == 0:
                self._push_free(index)  # force the change of identifier
        if self.unused_count == 0:
            self._create_new_indices()
        self.unused_count -= 1
        new = self.unused_pool[self.unused_count]
        self.use_count[new] += 1
        self._note_transition(old, new)
        return new

    def free_index(self, index: int) -> int:
        if index != 0:
            self.use_count[index] -= 1
            if self.use_count[index] == 0:
                self._push_free(index)
            self._note_transition(index, 0)
        return 0

    def copy_index(self, lhs: int, rhs: int) -> int:
        # Skipping the aliased case avoids a pointless unuse/use pair and,
        # more importantly, the self-assignment corner where releasing the
        # left-hand side would wrongly deactivate the right-hand side too.
        if lhs == rhs:
            return lhs
        if rhs == 0:
            return self.free_index(lhs)
        old = lhs
        if lhs != 0:
            self.use_count[lhs] -= 1
            if self.use_count[lhs] == 0:
                self._push_free(lhs)
        self.use_count[rhs] += 1
        self._note_transition(old, rhs)
        return rhs

    def _next_pooled(self) -> int:
        if self.free_count != 0:
            self.free_count -= 1
            return self.free_pool[self.free_count]
        if self.unused_count == 0:
            self._create_new_indices()
        self.unused_count -= 1
        return self.unused_pool[self.unused_count]

    def _create_new_indices(self) -> None:
        super()._create_new_indices()
        # Keep the count array one past the largest identifier ever created.
        self.use_count.extend([0] * self.block_size)


MANAGER_KINDS = ("linear", "reuse", "usecount")


def make_manager(kind: str, block_size: int = 256):
    """Construct a manager by kind name ("linear", "reuse", "usecount")."""
    if kind == "linear":
        return LinearIndexManager()
    if kind == "reuse":
        return ReuseIndexManager(block_size)
    if kind == "usecount":
        return UseCountIndexManager(block_size)
    raise ValueError(f"unknown manager kind: {kind!r}")
