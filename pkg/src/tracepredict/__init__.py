"""Predictive monitoring of concurrent executions under trace-equivalence closures."""

from .alphabet import (
    ConcurrentAlphabet,
    DualAlphabet,
    build_rwl_dependence,
    build_rwl_dual,
    width,
)
from .trace import (
    Event,
    Execution,
    Label,
    SubsequenceMask,
    TraceError,
    TraceParseError,
    Violation,
    check_well_formed,
    enabled_in,
    execution_of,
    held_locks_at,
    is_well_formed,
    parse_trace,
    project,
    reads_from,
    render,
)

__version__ = "0.1.0"

__all__ = [
    "ConcurrentAlphabet",
    "DualAlphabet",
    "Event",
    "Execution",
    "Label",
    "SubsequenceMask",
    "TraceError",
    "TraceParseError",
    "Violation",
    "build_rwl_dependence",
    "build_rwl_dual",
    "check_well_formed",
    "enabled_in",
    "execution_of",
    "held_locks_at",
    "is_well_formed",
    "parse_trace",
    "project",
    "reads_from",
    "render",
    "width",
]
