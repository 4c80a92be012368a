"""Overloadable real type that drives tape recording.

An ``ActiveReal`` carries a primal value and an identifier.  Arithmetic on
active values does not record anything by itself: it builds a flat expression
(`Expr`) holding the primal result and one ``(partial, leaf)`` term per
active leaf of the right-hand side.  A statement is recorded when the
expression is assigned to a variable, either through the constructor
(``y = ActiveReal(x1 * x2 + sin(x1))``) or through an overwrite
(``y.assign(y + 1.0)``).  This keeps one tape statement per assignment, with
the leaf identifiers read only after the whole right-hand side has been
gathered, so self-referencing assignments like ``a.assign(a * a)`` record the
old identifier.

Expressions reference their leaves; consume an expression before overwriting
or releasing any leaf it was built from.

Operations on passive operands fold through to plain floats: no expression,
no manager interaction.
"""

from __future__ import annotations

import math

_INF = math.inf
_NAN = math.nan


def _div_values(a: float, b: float) -> float:
    try:
        return a / b
    except ZeroDivisionError:
        if a == 0.0 or a != a:
            return _NAN
        return math.copysign(_INF, math.copysign(1.0, a) * math.copysign(1.0, b))


def _sqrt_value(a: float) -> float:
    return math.sqrt(a) if a >= 0.0 else _NAN


def _exp_value(a: float) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        return _INF


def _parts(x):
    """Decompose an operand into (value, terms)."""
    if isinstance(x, ActiveReal):
        return x.value, ((1.0, x),)
    if isinstance(x, Expr):
        return x.value, x.terms
    return float(x), ()


def _scale(terms, factor: float):
    return tuple((factor * c, leaf) for c, leaf in terms)


def _wrap(value: float, terms):
    # Passive fold-through: no active leaves means plain data.
    if not terms:
        return value
    return Expr(value, terms)


class Operand:
    """Shared arithmetic for ActiveReal and Expr; comparisons use primals."""

    __slots__ = ()

    value: float

    def __add__(self, other):
        va, ta = _parts(self)
        vb, tb = _parts(other)
        return _wrap(va + vb, ta + tb)

    __radd__ = __add__

    def __sub__(self, other):
        va, ta = _parts(self)
        vb, tb = _parts(other)
        return _wrap(va - vb, ta + _scale(tb, -1.0))

    def __rsub__(self, other):
        va, ta = _parts(self)
        vb, tb = _parts(other)
        return _wrap(vb - va, tb + _scale(ta, -1.0))

    def __mul__(self, other):
        va, ta = _parts(self)
        vb, tb = _parts(other)
        return _wrap(va * vb, _scale(ta, vb) + _scale(tb, va))

    __rmul__ = __mul__

    def __truediv__(self, other):
        va, ta = _parts(self)
        vb, tb = _parts(other)
        value = _div_values(va, vb)
        inv = _div_values(1.0, vb)
        return _wrap(value, _scale(ta, inv) + _scale(tb, -value * inv))

    def __rtruediv__(self, other):
        va, ta = _parts(self)
        vb, tb = _parts(other)
        value = _div_values(vb, va)
        inv = _div_values(1.0, va)
        return _wrap(value, _scale(tb, inv) + _scale(ta, -value * inv))

    def __neg__(self):
        va, ta = _parts(self)
        return _wrap(-va, _scale(ta, -1.0))

    def __pos__(self):
        return self

    def __float__(self) -> float:
        return self.value

    def __lt__(self, other):
        return self.value < _value_of(other)

    def __le__(self, other):
        return self.value <= _value_of(other)

    def __gt__(self, other):
        return self.value > _value_of(other)

    def __ge__(self, other):
        return self.value >= _value_of(other)


def _value_of(x) -> float:
    if isinstance(x, (ActiveReal, Expr)):
        return x.value
    return float(x)


class Expr(Operand):
    """Primal value plus flattened (partial, leaf) terms of an expression."""

    __slots__ = ("value", "terms")

    def __init__(self, value: float, terms):
        self.value = value
        self.terms = terms

    def __repr__(self) -> str:
        return f"Expr(value={self.value!r}, leaves={len(self.terms)})"


def sin(x):
    v, t = _parts(x)
    return _wrap(math.sin(v), _scale(t, math.cos(v)))


def cos(x):
    v, t = _parts(x)
    return _wrap(math.cos(v), _scale(t, -math.sin(v)))


def exp(x):
    v, t = _parts(x)
    ev = _exp_value(v)
    return _wrap(ev, _scale(t, ev))


def sqrt(x):
    v, t = _parts(x)
    root = _sqrt_value(v)
    return _wrap(root, _scale(t, _div_values(0.5, root)))


class ActiveReal(Operand):
    """A differentiable scalar bound to a tape once it becomes active.

    Construction from a float (or nothing) is passive and touches no manager
    state.  Construction from another ActiveReal records a copy; construction
    from an expression records a statement.
    """

    __slots__ = ("value", "_id", "_tape", "__weakref__")

    def __init__(self, init: "float | ActiveReal | Expr" = 0.0):
        self.value = 0.0
        self._id = 0
        self._tape = None
        self.assign(init)

    @property
    def identifier(self) -> int:
        return self._id

    @property
    def is_active(self) -> bool:
        return self._id != 0

    @property
    def tape(self):
        return self._tape

    def assign(self, rhs) -> "ActiveReal":
        """Overwrite this variable from a float, a copy, or an expression."""
        if rhs is self:
            return self
        if isinstance(rhs, ActiveReal):
            self.value = rhs.value
            if rhs._id != 0:
                tape = rhs._tape
                if self._tape is not None and self._tape is not tape:
                    raise ValueError("copy between variables of different tapes")
                self._id = tape.store_copy(self._id, rhs._id)
                self._tape = tape
            elif self._id != 0:
                self._tape.free_variable(self._id)
                self._id = 0
            return self
        if isinstance(rhs, Expr):
            partials: list[float] = []
            rhs_ids: list[int] = []
            tape = self._tape if self._id != 0 else None
            for coeff, leaf in rhs.terms:
                lid = leaf._id
                if lid == 0:
                    continue
                if tape is None:
                    tape = leaf._tape
                elif leaf._tape is not tape:
                    raise ValueError("expression mixes variables of different tapes")
                partials.append(coeff)
                rhs_ids.append(lid)
            if tape is not None:
                self._id = tape.store_statement(self._id, partials, rhs_ids)
                self._tape = tape
            self.value = rhs.value
            return self
        # Plain constant: the variable becomes passive.
        if self._id != 0:
            self._tape.free_variable(self._id)
            self._id = 0
        self.value = float(rhs)
        return self

    def release(self) -> None:
        """End this value's lifecycle now instead of at destruction."""
        if self._id != 0:
            self._tape.free_variable(self._id)
            self._id = 0

    def __del__(self):
        try:
            self.release()
        except Exception:
            pass

    def __repr__(self) -> str:
        return f"ActiveReal(value={self.value!r}, id={self._id})"


def register_input(tape, var: ActiveReal) -> ActiveReal:
    """Declare ``var`` an independent input of the recording."""
    if var._tape is not None and var._tape is not tape:
        raise ValueError("variable already bound to a different tape")
    var._id = tape.register_input(var._id)
    var._tape = tape
    return var


def register_output(tape, var: ActiveReal) -> ActiveReal:
    """Ensure ``var`` holds an unshared identifier suitable for seeding."""
    if var._id == 0:
        return var
    if var._tape is not tape:
        raise ValueError("variable bound to a different tape")
    var._id = tape.register_output(var._id)
    return var


def bulk_copy(tape, values) -> list[ActiveReal]:
    """Duplicate (value, identifier) pairs without any manager interaction.

    Only valid for managers whose identifiers survive C-like memory copies.
    """
    if not tape.manager.capabilities.bulk_copy_safe:
        raise ValueError(
            f"bulk copy is not supported by the {tape.manager.kind!r} manager"
        )
    copies = []
    for src in values:
        dst = ActiveReal(src.value)
        dst._id = src._id
        dst._tape = src._tape
        copies.append(dst)
    return copies
