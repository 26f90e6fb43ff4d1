"""Domain types for a damped oscillator driven by a pulse train.

All types are frozen dataclasses. Constructors do not validate; call
:func:`validate` (or :func:`find_violations`) before evaluating anything.
Every public evaluator in this package does so on entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

#: Marker for an unbounded pulse train (``N_d -> infinity``).
INFINITE = math.inf


class DriveKind(str, Enum):
    DIRAC_COMB = "dc"
    SQUARE_TRAIN = "sp"
    GAUSSIAN_TRAIN = "gp"


class ValidationError(ValueError):
    """Raised by :func:`validate`; carries the full list of violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class Violation:
    code: str  # NotUnderdamped | GeometryViolation | NonPositive
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class SystemParams:
    """Oscillator constants ``m``, damping rate ``gamma`` and natural frequency ``omega0``."""

    gamma: float
    omega0: float
    m: float = 1.0

    @classmethod
    def from_omega(cls, gamma: float, omega: float, m: float = 1.0) -> "SystemParams":
        """Build from the damped frequency instead of the natural one."""
        if not omega > 0:
            raise ValidationError([Violation("NonPositive", f"omega must be > 0, got {omega}")])
        return cls(gamma=gamma, omega0=math.hypot(omega, gamma), m=m)

    @property
    def omega(self) -> float:
        # factored form keeps omega**2 + gamma**2 == omega0**2 to a few ulp
        return math.sqrt((self.omega0 - self.gamma) * (self.omega0 + self.gamma))

    @property
    def tau0(self) -> float:
        return 1.0 / self.gamma

    @property
    def t0(self) -> float:
        return 1.0 / self.omega

    @property
    def damping_coefficient(self) -> float:
        """``b = 2 m gamma``."""
        return 2.0 * self.m * self.gamma

    @property
    def spring_constant(self) -> float:
        """``k = m omega0**2``."""
        return self.m * self.omega0**2


@dataclass(frozen=True)
class DriveSpec:
    """A train of identical pulses centred at ``n*T + Q``.

    ``n_pulses`` is the pulse count ``N_d + 1``, or :data:`INFINITE`.
    ``impulse`` is the momentum delivered by one pulse.
    """

    kind: DriveKind
    T: float
    tau: float
    Q: float
    n_pulses: Union[int, float] = INFINITE
    impulse: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", DriveKind(self.kind))

    @classmethod
    def dirac_comb(cls, T, Q, n_pulses=INFINITE, impulse=1.0) -> "DriveSpec":
        return cls(DriveKind.DIRAC_COMB, T, 0.0, Q, n_pulses, impulse)

    @classmethod
    def square_train(cls, T, tau, Q, n_pulses=INFINITE, impulse=1.0) -> "DriveSpec":
        return cls(DriveKind.SQUARE_TRAIN, T, tau, Q, n_pulses, impulse)

    @classmethod
    def gaussian_train(cls, T, tau, Q, n_pulses=INFINITE, impulse=1.0) -> "DriveSpec":
        return cls(DriveKind.GAUSSIAN_TRAIN, T, tau, Q, n_pulses, impulse)

    @property
    def omega_R(self) -> float:
        """Repetition rate ``2 pi / T``."""
        return 2.0 * math.pi / self.T

    @property
    def peak_force(self) -> float:
        """Square-pulse height ``I_p / (2 tau)``."""
        if self.kind is not DriveKind.SQUARE_TRAIN:
            raise ValueError("peak_force is defined for square trains only")
        return self.impulse / (2.0 * self.tau)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.n_pulses)

    def with_impulse(self, impulse: float) -> "DriveSpec":
        return DriveSpec(self.kind, self.T, self.tau, self.Q, self.n_pulses, impulse)

    def with_tau(self, tau: float, kind: Optional[DriveKind] = None) -> "DriveSpec":
        return DriveSpec(kind or self.kind, self.T, tau, self.Q, self.n_pulses, self.impulse)

    def pulse_count_until(self, t_end: float) -> int:
        """Number of pulses whose centre ``n*T + Q`` is at or before ``t_end``."""
        if t_end < self.Q:
            n = 0
        else:
            n = int(math.floor((t_end - self.Q) / self.T)) + 1
            # guard against floor rounding across a pulse centre
            while n > 0 and (n - 1) * self.T + self.Q > t_end:
                n -= 1
            while n * self.T + self.Q <= t_end:
                n += 1
        if not self.is_infinite:
            n = min(n, int(self.n_pulses))
        return n


@dataclass(frozen=True)
class InitialConditions:
    x0: float = 0.0
    v0: float = 0.0


@dataclass(frozen=True)
class TimeGrid:
    """Uniform samples from ``t_start`` to ``t_end`` inclusive."""

    t_start: float
    t_end: float
    n_samples: int

    def __post_init__(self):
        if not (int(self.n_samples) == self.n_samples and self.n_samples >= 1):
            raise ValueError(f"n_samples must be a positive integer, got {self.n_samples!r}")
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise ValueError("grid bounds must be finite")
        if not self.t_start < self.t_end:
            raise ValueError(f"t_start ({self.t_start}) must be < t_end ({self.t_end})")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, int(self.n_samples))

    @property
    def step(self) -> float:
        return (self.t_end - self.t_start) / max(int(self.n_samples) - 1, 1)


class MethodKind(str, Enum):
    TIME_PERIODIC = "tp"
    HARMONIC = "hs"
    SECOND_HARMONIC = "approx2"
    ORACLE = "oracle"


@dataclass(frozen=True)
class Method:
    """Which solution family evaluates a trace.

    ``k_c`` applies to :attr:`MethodKind.HARMONIC` (``None`` selects the
    cutoff automatically); ``dt`` applies to :attr:`MethodKind.ORACLE`.
    """

    kind: MethodKind
    k_c: Optional[int] = None
    dt: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", MethodKind(self.kind))
        if self.k_c is not None and (int(self.k_c) != self.k_c or self.k_c < 1):
            raise ValueError(f"k_c must be a positive integer, got {self.k_c!r}")
        if self.dt is not None and not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt!r}")

    @classmethod
    def time_periodic(cls):
        return cls(MethodKind.TIME_PERIODIC)

    @classmethod
    def harmonic(cls, k_c=None):
        return cls(MethodKind.HARMONIC, k_c=k_c)

    @classmethod
    def second_harmonic(cls):
        return cls(MethodKind.SECOND_HARMONIC)

    @classmethod
    def oracle(cls, dt=None):
        return cls(MethodKind.ORACLE, dt=dt)

    @classmethod
    def parse(cls, text: str) -> "Method":
        """Parse ``tp``, ``hs``, ``hs:30``, ``approx2``, ``oracle`` or ``oracle:1e-4``."""
        name, _, arg = text.strip().partition(":")
        name = name.lower()
        if name == "tp" and not arg:
            return cls.time_periodic()
        if name == "approx2" and not arg:
            return cls.second_harmonic()
        if name == "hs":
            return cls.harmonic(int(arg) if arg else None)
        if name == "oracle":
            return cls.oracle(float(arg) if arg else None)
        raise ValueError(f"unknown method {text!r}")

    @property
    def label(self) -> str:
        if self.kind is MethodKind.HARMONIC:
            return f"hs{self.k_c}" if self.k_c is not None else "hs"
        return self.kind.value


@dataclass(frozen=True)
class Trace:
    """Sampled displacement with the method and parameters that produced it."""

    grid: TimeGrid
    values: np.ndarray
    method: Method
    params_digest: dict = field(default_factory=dict)
    diagnostics: tuple = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (int(self.grid.n_samples),):
            raise ValueError(
                f"values has shape {values.shape}, grid has {self.grid.n_samples} samples"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("trace values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.values)))


def digest(params: SystemParams, drive: DriveSpec) -> dict:
    return {
        "m": params.m,
        "gamma": params.gamma,
        "omega0": params.omega0,
        "omega": params.omega,
        "kind": drive.kind.value,
        "T": drive.T,
        "tau": drive.tau,
        "Q": drive.Q,
        "n_pulses": drive.n_pulses,
        "impulse": drive.impulse,
    }


def _finite_positive(value) -> bool:
    try:
        return math.isfinite(value) and value > 0
    except TypeError:
        return False


def find_violations(params, drive=None) -> list:
    """Return every violated invariant of ``params`` (and ``drive`` if given).

    Never raises; anything that is not a well-formed number is reported as a
    violation.
    """
    out = []

    def bad(code, msg):
        out.append(Violation(code, msg))

    m = getattr(params, "m", None)
    gamma = getattr(params, "gamma", None)
    omega0 = getattr(params, "omega0", None)
    for name, value in (("m", m), ("gamma", gamma), ("omega0", omega0)):
        if not _finite_positive(value):
            bad("NonPositive", f"{name} must be finite and > 0, got {value!r}")
    if _finite_positive(gamma) and _finite_positive(omega0) and not gamma < omega0:
        bad("NotUnderdamped", f"need 0 < gamma < omega0, got gamma={gamma}, omega0={omega0}")

    if drive is None:
        return out

    try:
        kind = DriveKind(getattr(drive, "kind", None))
    except ValueError:
        bad("NonPositive", f"unknown drive kind {getattr(drive, 'kind', None)!r}")
        kind = None
    T = getattr(drive, "T", None)
    tau = getattr(drive, "tau", None)
    Q = getattr(drive, "Q", None)
    n_pulses = getattr(drive, "n_pulses", None)
    impulse = getattr(drive, "impulse", None)

    for name, value in (("T", T), ("Q", Q)):
        if not _finite_positive(value):
            bad("NonPositive", f"{name} must be finite and > 0, got {value!r}")
    tau_ok = False
    try:
        tau_ok = math.isfinite(tau) and tau >= 0
    except TypeError:
        pass
    if not tau_ok:
        bad("NonPositive", f"tau must be finite and >= 0, got {tau!r}")
    elif kind is DriveKind.DIRAC_COMB and tau != 0:
        bad("GeometryViolation", f"a Dirac comb has tau = 0, got tau={tau}")
    elif kind in (DriveKind.SQUARE_TRAIN, DriveKind.GAUSSIAN_TRAIN) and tau == 0:
        bad("NonPositive", "square and Gaussian pulses need tau > 0")

    try:
        count_ok = math.isinf(n_pulses) and n_pulses > 0 or (
            int(n_pulses) == n_pulses and n_pulses >= 1
        )
    except (TypeError, ValueError, OverflowError):
        count_ok = False
    if not count_ok:
        bad("NonPositive", f"n_pulses must be a positive integer or INFINITE, got {n_pulses!r}")

    try:
        impulse_ok = math.isfinite(impulse)
    except TypeError:
        impulse_ok = False
    if not impulse_ok:
        bad("NonPositive", f"impulse must be finite, got {impulse!r}")

    if _finite_positive(T) and _finite_positive(Q) and tau_ok:
        if not T > 2 * tau:
            bad("GeometryViolation", f"pulses overlap: need T > 2*tau, got T={T}, tau={tau}")
        if not Q > tau:
            bad("GeometryViolation", f"need Q > tau, got Q={Q}, tau={tau}")
        if not T > Q:
            bad("GeometryViolation", f"need T > Q, got T={T}, Q={Q}")
    return out


def validate(params: SystemParams, drive: Optional[DriveSpec] = None):
    """Return ``(params, drive)`` unchanged, or raise :class:`ValidationError`."""
    violations = find_violations(params, drive)
    if violations:
        raise ValidationError(violations)
    return params, drive


def derived(params: SystemParams) -> dict:
    validate(params)
    return {"omega": params.omega, "tau0": params.tau0, "t0": params.t0}
