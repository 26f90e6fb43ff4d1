"""Damped harmonic oscillator driven by trains of short pulses."""

from .model import (
    INFINITE,
    DriveKind,
    DriveSpec,
    InitialConditions,
    Method,
    MethodKind,
    SystemParams,
    TimeGrid,
    Trace,
    ValidationError,
    Violation,
    derived,
    find_violations,
    validate,
)

__all__ = [
    "INFINITE",
    "DriveKind",
    "DriveSpec",
    "InitialConditions",
    "Method",
    "MethodKind",
    "SystemParams",
    "TimeGrid",
    "Trace",
    "ValidationError",
    "Violation",
    "derived",
    "find_violations",
    "validate",
]
