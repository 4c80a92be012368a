"""Shared test harness.

Two fuzzing layers:

* ``ShadowChecker`` drives a bare index manager through variable-level
  lifecycle events while mirroring every transition in an independent
  holder map, and checks the uniqueness discipline, pool disjointness,
  use-count conservation, and the fresh-identifier guarantee after every
  single operation.

* ``generate_program`` / ``replay_active`` / ``replay_passive`` build random
  straight-line programs (assignments, copies, releases, mid-stream input
  registrations, tape resets) as manager-independent event lists.  The same
  events replay once per manager through the tape and once on plain floats,
  which yields cross-manager gradient comparisons and an independent
  finite-difference oracle.
"""

from __future__ import annotations

import random
from collections import Counter

from adtape import (
    ActiveReal,
    JacobianTape,
    cos,
    make_manager,
    register_input,
    register_output,
    sin,
)

BLOCK = 4  # small pool blocks exercise block boundaries constantly


class ShadowChecker:
    """Mirror of a manager's holder state; records violations it finds.

    Variables that survive a reset keep their identifiers.  Under the linear
    manager those stale identifiers may legitimately collide with freshly
    distributed ones (the workflow requires stale variables to be rewritten
    before use), so stale holders are exempt from the hand-out conflict
    check there.  The reuse managers guarantee no such collision, stale or
    not.
    """

    def __init__(self, manager, n_slots: int = 8):
        self.m = manager
        self.slots = [0] * n_slots
        self.slot_stale = [False] * n_slots
        self.holders: Counter = Counter()
        self.stale: Counter = Counter()
        self.distributed = set()  # identifiers in use at any point since reset
        self.violations: list[str] = []

    def _held_by_current(self, identifier: int) -> int:
        return self.holders[identifier] - self.stale[identifier]

    # -- lifecycle events ------------------------------------------------

    def assign(self, k: int) -> None:
        old = self.slots[k]
        new = self.m.assign_index(old)
        if new != old and self._held_by_current(new) > 0:
            self.violations.append(f"assign handed out held identifier {new}")
        self._move(k, old, new)

    def assign_unused(self, k: int) -> None:
        old = self.slots[k]
        new = self.m.assign_unused_index(old)
        if new in self.distributed:
            self.violations.append(f"assign_unused returned used identifier {new}")
        if self._held_by_current(new) > 0:
            self.violations.append(f"assign_unused handed out held identifier {new}")
        self._move(k, old, new)

    def free(self, k: int) -> None:
        old = self.slots[k]
        self.m.free_index(old)
        # The active type zeroes its own identifier on destruction.
        self._move(k, old, 0)

    def copy(self, dst: int, src: int) -> None:
        old = self.slots[dst]
        rhs = self.slots[src]
        new = self.m.copy_index(old, rhs)
        if new not in (old, rhs) and self._held_by_current(new) > 0:
            self.violations.append(f"copy handed out held identifier {new}")
        # A copy sharing a stale variable's identifier is itself stale.
        self._move(dst, old, new, stale=new == rhs and self.slot_stale[src])
        if self.slots[src] != rhs:
            self.violations.append("copy corrupted the source identifier")

    def reset(self) -> None:
        self.m.reset()
        held = {i for i in self.slots if i != 0}
        if self.m.kind == "linear":
            # Identifier numbering restarts: survivors become stale.
            self.stale = Counter(i for i in self.slots if i != 0)
            self.slot_stale = [i != 0 for i in self.slots]
            self.distributed = set()
        else:
            self.distributed = held

    # -- bookkeeping and invariants ---------------------------------------

    def _move(self, k: int, old: int, new: int, stale: bool = False) -> None:
        if old != 0:
            self.holders[old] -= 1
            if self.slot_stale[k]:
                self.stale[old] -= 1
        self.slot_stale[k] = stale
        if new != 0:
            self.holders[new] += 1
            if stale:
                self.stale[new] += 1
            else:
                self.distributed.add(new)
        self.slots[k] = new
        self.check_invariants()

    def check_invariants(self) -> None:
        live = +self.holders  # drops zero entries
        if sum(live.values()) != self.m.live_values:
            self.violations.append(
                f"live-count drift: {sum(live.values())} held vs "
                f"{self.m.live_values} tracked"
            )
        if self.m.kind == "reuse" and live and max(live.values()) > 1:
            self.violations.append("reuse identifier held by several values")
        if hasattr(self.m, "free_pool"):
            free = self.m.free_pool[: self.m.free_count]
            unused = self.m.unused_pool[: self.m.unused_count]
            pool = free + unused
            if 0 in pool:
                self.violations.append("passive identifier pooled")
            if len(set(pool)) != len(pool):
                self.violations.append(f"duplicate pool entry in {pool}")
            held = {i for i, c in live.items() if c > 0}
            if held & set(pool):
                self.violations.append("held identifier present in a pool")
        if hasattr(self.m, "use_count"):
            for i in range(1, self.m.maximum_index + 1):
                if self.m.use_count[i] != live.get(i, 0):
                    self.violations.append(
                        f"use_count[{i}]={self.m.use_count[i]} but "
                        f"{live.get(i, 0)} holders"
                    )
                    break


def fuzz_lifecycles(kind: str, seed: int, n_ops: int = 16, n_slots: int = 6) -> ShadowChecker:
    """One randomized lifecycle sequence under shadow checking."""
    rng = random.Random(seed)
    checker = ShadowChecker(make_manager(kind, BLOCK), n_slots)
    for _ in range(n_ops):
        r = rng.random()
        k = rng.randrange(n_slots)
        if r < 0.40:
            checker.assign(k)
        elif r < 0.55:
            checker.free(k)
        elif r < 0.70:
            checker.copy(k, rng.randrange(n_slots))
        elif r < 0.85:
            checker.assign_unused(k)  # the register-input path
        else:
            checker.reset()
    return checker


# -- random straight-line programs ----------------------------------------

N_SLOTS = 6

UNARY_OPS = {
    "neg": lambda a: -a,
    "sin": sin,
    "cos": cos,
    "half": lambda a: a / 2.0,
    "shift": lambda a: 1.5 - a,
}
BINARY_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "mix": lambda a, b: 0.5 * a + b * 0.25,
}


def generate_program(seed: int, n_events: int = 50):
    """Deterministic event list plus the final input/output slot sets.

    Slots become unusable after a tape reset until rewritten, matching the
    workflow requirement that variables from an earlier recording gain a new
    identifier before use.
    """
    rng = random.Random(seed)
    events = []
    usable = [True] * N_SLOTS  # may appear on a right-hand side
    active = [False] * N_SLOTS
    inputs: dict[int, int] = {}  # slot -> index of its registration event

    def usable_slots():
        return [k for k in range(N_SLOTS) if usable[k]]

    def operand(pool):
        if pool and rng.random() < 0.8:
            return ("slot", rng.choice(pool))
        return ("const", round(rng.uniform(-2.0, 2.0), 3))

    for _ in range(n_events):
        r = rng.random()
        k = rng.randrange(N_SLOTS)
        if r < 0.10:
            events.append(("reg_input", k, round(rng.uniform(-1.5, 1.5), 3)))
            inputs[k] = len(events) - 1
            usable[k] = True
            active[k] = True
        elif r < 0.16:
            events.append(("release", k))
            inputs.pop(k, None)
            active[k] = False
            # value is retained, so the slot stays usable as a constant
        elif r < 0.24:
            pool = usable_slots()
            if not pool:
                continue
            src = rng.choice(pool)
            if src == k:
                continue
            events.append(("copy", k, src))
            inputs.pop(k, None)
            usable[k] = True
            active[k] = active[src]
        elif r < 0.28:
            events.append(("reset",))
            inputs.clear()
            usable = [False] * N_SLOTS
        elif r < 0.34:
            events.append(("const", k, round(rng.uniform(-2.0, 2.0), 3)))
            inputs.pop(k, None)
            usable[k] = True
            active[k] = False
        else:
            pool = usable_slots()
            if rng.random() < 0.4:
                name = rng.choice(sorted(UNARY_OPS))
                ops = (operand(pool),)
            else:
                name = rng.choice(sorted(BINARY_OPS))
                ops = (operand(pool), operand(pool))
            events.append(("assign", k, name, ops))
            inputs.pop(k, None)
            usable[k] = True
            active[k] = any(
                active[s] for tag, s in ops if tag == "slot"
            )

    # Guarantee at least one input feeding one active statement.
    events.append(("reg_input", 0, 0.8))
    inputs[0] = len(events) - 1
    usable[0] = True
    active[0] = True
    events.append(("assign", 1, "mul", (("slot", 0), ("slot", 0))))
    inputs.pop(1, None)
    usable[1] = True
    active[1] = True

    outputs = [k for k in range(N_SLOTS) if usable[k] and active[k]]
    return events, dict(inputs), outputs


def _apply(name, values):
    fn = UNARY_OPS.get(name) or BINARY_OPS[name]
    return fn(*values)


def replay_active(
    events,
    inputs,
    outputs,
    kind: str,
    block_size: int = BLOCK,
    vector_dim: int = 1,
    record_explicit_lhs: bool = False,
):
    """Run the program on a tape; returns (input adjoints, objective, tape)."""
    tape = JacobianTape(
        make_manager(kind, block_size),
        vector_dim=vector_dim,
        record_explicit_lhs=record_explicit_lhs,
    )
    tape.reset_tape()
    tape.start_recording()
    slots = [ActiveReal(0.0) for _ in range(N_SLOTS)]
    reg_ids = {}  # adjoint handles: the identifier given at registration
    for ev in events:
        tag = ev[0]
        if tag == "reg_input":
            _, k, value = ev
            slots[k].assign(value)
            register_input(tape, slots[k])
            reg_ids[k] = slots[k].identifier
        elif tag == "const":
            _, k, value = ev
            slots[k].assign(value)
        elif tag == "assign":
            _, k, name, ops = ev
            args = [slots[v] if t == "slot" else v for t, v in ops]
            slots[k].assign(_apply(name, args))
        elif tag == "copy":
            _, dst, src = ev
            slots[dst].assign(slots[src])
        elif tag == "release":
            slots[ev[1]].release()
        elif tag == "reset":
            tape.reset_tape()
            tape.start_recording()
    for k in outputs:
        assert slots[k].identifier != 0, "activity tracking diverged"
        register_output(tape, slots[k])
    tape.stop_recording()
    for k in outputs:
        ident = slots[k].identifier
        for lane in range(vector_dim):
            # Accumulate, not overwrite: outputs may share a slot when the
            # manager elides copies.
            tape.set_adjoint(ident, lane, tape.get_adjoint(ident, lane) + 1.0)
    tape.evaluate_reverse()
    # Read input adjoints through the identifiers handed out at
    # registration: output uniquification may have moved a variable that is
    # both input and output onto a fresh identifier.
    grads = {k: tape.get_adjoint(reg_ids[k]) for k in inputs}
    objective = sum(slots[k].value for k in outputs)
    return grads, objective, tape


def replay_passive(events, outputs, overrides=None, frozen=None):
    """Plain-float replay; returns (objective, freeze map, peak magnitude).

    ``overrides`` maps a registration event index to a value delta.  A
    released variable keeps its value but loses its derivative link, so a
    perturbed replay must pin it to the value it carried in the base replay;
    ``frozen`` maps release event indices to those base values, and the
    returned freeze map provides them.
    """
    overrides = overrides or {}
    values = [0.0] * N_SLOTS
    freeze_out = {}
    peak = 0.0
    for idx, ev in enumerate(events):
        tag = ev[0]
        if tag == "reg_input":
            _, k, value = ev
            values[k] = value + overrides.get(idx, 0.0)
        elif tag == "const":
            _, k, value = ev
            values[k] = value
        elif tag == "assign":
            _, k, name, ops = ev
            args = [values[v] if t == "slot" else v for t, v in ops]
            values[k] = _apply(name, args)
            if abs(values[k]) > peak:
                peak = abs(values[k])
        elif tag == "copy":
            _, dst, src = ev
            values[dst] = values[src]
        elif tag == "release":
            k = ev[1]
            if frozen is not None and idx in frozen:
                values[k] = frozen[idx]
            freeze_out[idx] = values[k]
        # reset does not change primal values
    return sum(values[k] for k in outputs), freeze_out, peak


def fd_input_gradients(events, inputs, outputs, eps: float = 1e-6):
    """Central finite differences of the passive replay per registered input."""
    _, frozen, _ = replay_passive(events, outputs)
    grads = {}
    for k, ev_idx in inputs.items():
        plus, _, _ = replay_passive(events, outputs, {ev_idx: eps}, frozen)
        minus, _, _ = replay_passive(events, outputs, {ev_idx: -eps}, frozen)
        grads[k] = (plus - minus) / (2.0 * eps)
    return grads


def rel_err(a: float, b: float, floor: float = 1e-12) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def gradient_scale(*gradient_dicts) -> float:
    """Common magnitude used for vector-relative adjoint comparisons."""
    scale = 0.0
    for grads in gradient_dicts:
        for value in grads.values():
            if abs(value) > scale:
                scale = abs(value)
    return scale
