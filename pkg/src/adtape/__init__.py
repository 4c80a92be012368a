"""Reverse-mode AD with pluggable identifier management.

The package records Jacobian tapes through operator overloading and
interprets them in reverse.  Identifier distribution is a pluggable policy
with three implementations (linear, reuse, use-count) that trade adjoint
vector size against per-statement storage and copy elision.
"""

from .active import (
    ActiveReal,
    Expr,
    bulk_copy,
    cos,
    exp,
    register_input,
    register_output,
    sin,
    sqrt,
)
from .index_managers import (
    INDEX_MAX,
    MANAGER_KINDS,
    IdentifierSpaceExhausted,
    LinearIndexManager,
    ManagerCapabilities,
    ReuseIndexManager,
    UseCountIndexManager,
    make_manager,
)
from .stats import (
    M_D,
    M_I,
    MemoryModelInputs,
    TapeReport,
    measure_tape,
    memory_model,
    parse_report,
    render_report,
)
from .tape import (
    AdjointVector,
    JacobianTape,
    RecordingCounters,
    TapeOptions,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveReal",
    "AdjointVector",
    "Expr",
    "INDEX_MAX",
    "IdentifierSpaceExhausted",
    "JacobianTape",
    "LinearIndexManager",
    "MANAGER_KINDS",
    "M_D",
    "M_I",
    "ManagerCapabilities",
    "MemoryModelInputs",
    "RecordingCounters",
    "ReuseIndexManager",
    "TapeOptions",
    "TapeReport",
    "UseCountIndexManager",
    "bulk_copy",
    "cos",
    "exp",
    "make_manager",
    "measure_tape",
    "memory_model",
    "parse_report",
    "register_input",
    "register_output",
    "render_report",
    "sin",
    "sqrt",
]
