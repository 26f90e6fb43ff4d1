"""Closed-form displacement of a damped oscillator driven by pulse trains.

Two families are provided for each drive kind:

* time-periodic (``tp_*``): one impulse-response term per pulse, summed.
* harmonic (``hs_*``): the train is summed first (infinite train), giving a
  decaying pole-pair term plus a Fourier series in ``k * omega_R``
  truncated at ``k_c``.

``approx2_*`` are the harmonic solutions truncated at ``k <= 2`` and written
in amplitude-phase form. All functions take scalar or array ``t`` and use
``Theta(0) = 1`` for every gate.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import wofz

from .model import (
    DriveKind,
    DriveSpec,
    InitialConditions,
    Method,
    MethodKind,
    SystemParams,
    TimeGrid,
    Trace,
    digest,
    validate,
)

#: Constant of the small-imaginary-part approximation erf(z) ~ 1 +/- i a Im(z).
A_ERF = math.log(math.pi)

#: Largest allowed ``tau * omega / sqrt(2)`` for the erf approximation.
ERF_IM_LIMIT = 0.5

#: Minimum damping per period ``gamma * T`` accepted by the harmonic forms.
MIN_DAMPING_PER_PERIOD = 1e-6

AUTO_KC_REL_TOL = 1e-8
AUTO_KC_CAP = 10_000

# fixed evaluation block; results never depend on how blocks map to workers
_CHUNK = 4096
_K_BLOCK = 256


class DeltaNotEvaluable(ValueError):
    pass


class NegativeTime(ValueError):
    pass


class KindMismatch(ValueError):
    pass


class ErfApproxOutOfRange(ValueError):
    pass


class IllConditioned(ValueError):
    pass


class TruncationBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class HarmonicTermDiagnostics:
    """Harmonic ``k`` written as ``amplitude * sin(omega_k * (t - Q) + phase)``."""

    k: int
    amplitude: float
    phase: float

    def omega_k(self, drive: DriveSpec) -> float:
        return self.k * drive.omega_R


def _times(t, allow_negative=False):
    arr = np.asarray(t, dtype=float)
    if not allow_negative and np.any(arr < 0):
        raise NegativeTime("closed forms are defined for t >= 0")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _require(params, drive, *kinds):
    validate(params, drive)
    if drive.kind not in kinds:
        names = ", ".join(k.value for k in kinds)
        raise KindMismatch(f"expected drive kind in {{{names}}}, got {drive.kind.value}")


def _pulse_range(drive, t_max, lead=0.0):
    """Indices of pulses whose centre is at or before ``t_max + lead``."""
    if not np.isfinite(t_max):
        return range(0)
    return range(drive.pulse_count_until(t_max + lead))


# ---------------------------------------------------------------- forcing


def force_eval(t, drive: DriveSpec):
    """Driving force of a square or Gaussian train at time(s) ``t``."""
    if drive.kind is DriveKind.DIRAC_COMB:
        raise DeltaNotEvaluable("a Dirac comb has no pointwise force value")
    validate_drive_only(drive)
    tt = _times(t, allow_negative=True)
    f = np.zeros(tt.shape)
    T, tau, Q = drive.T, drive.tau, drive.Q
    t_max = float(np.max(tt)) if tt.size else -np.inf
    if drive.kind is DriveKind.SQUARE_TRAIN:
        for n in _pulse_range(drive, t_max, lead=tau):
            u = (tt - n * T) - Q
            f += ((u + tau) >= 0) & ((u - tau) < 0)
        f *= drive.impulse / (2.0 * tau)
    else:
        # exp(-(40)**2 / 2) underflows to exactly 0
        for n in _pulse_range(drive, t_max, lead=40.0 * tau):
            u = (tt - n * T) - Q
            f += np.exp(-0.5 * (u / tau) ** 2)
        f *= drive.impulse / (math.sqrt(2.0 * math.pi) * tau)
    return _out(f, t)


def validate_drive_only(drive):
    # a dummy underdamped system so only drive violations are reported
    validate(SystemParams(gamma=0.5, omega0=1.0), drive)


# ------------------------------------------------------ free response


def green_function(t, params: SystemParams):
    """Displacement after a unit velocity kick at ``t = 0``."""
    validate(params)
    tt = _times(t)
    g, w = params.gamma, params.omega
    return _out(np.exp(-g * tt) * np.sin(w * tt) / w, t)


def homogeneous(t, params: SystemParams, ic: InitialConditions):
    validate(params)
    tt = _times(t)
    g, w = params.gamma, params.omega
    x = np.exp(-g * tt) * (
        ic.x0 * np.cos(w * tt) + (ic.v0 + g * ic.x0) / w * np.sin(w * tt)
    )
    return _out(x, t)


# ------------------------------------------------- time-periodic solutions


def tp_dc(t, params: SystemParams, drive: DriveSpec):
    _require(params, drive, DriveKind.DIRAC_COMB)
    tt = _times(t)
    g, w = params.gamma, params.omega
    x = np.zeros(tt.shape)
    for n in _pulse_range(drive, np.max(tt, initial=-np.inf)):
        u = (tt - n * drive.T) - drive.Q
        on = u >= 0
        uu = u[on]
        x[on] += np.exp(-g * uu) * np.sin(w * uu)
    return _out(drive.impulse / (params.m * w) * x, t)


def tp_sp(t, params: SystemParams, drive: DriveSpec):
    _require(params, drive, DriveKind.SQUARE_TRAIN)
    tt = _times(t)
    g, w, w0sq = params.gamma, params.omega, params.omega0**2
    tau = drive.tau

    def edge(v):
        return np.exp(-g * v) * (w * np.cos(w * v) + g * np.sin(w * v)) / (w * w0sq)

    window = np.zeros(tt.shape)
    ringing = np.zeros(tt.shape)
    for n in _pulse_range(drive, np.max(tt, initial=-np.inf), lead=tau):
        u = (tt - n * drive.T) - drive.Q
        rise = (u + tau) >= 0
        fall = (u - tau) >= 0
        window += rise
        window -= fall
        ringing[rise] -= edge(u[rise] + tau)
        ringing[fall] += edge(u[fall] - tau)
    x = window / w0sq + ringing
    return _out(drive.impulse / (2.0 * tau * params.m) * x, t)


def _erf_im(params, drive):
    return drive.tau * params.omega / math.sqrt(2.0)


def tp_gp(t, params: SystemParams, drive: DriveSpec):
    """Gaussian train, with the small-Im(z) erf approximation.

    Raises :class:`ErfApproxOutOfRange` unless ``tau * omega / sqrt(2) < 0.5``.
    See :func:`tp_gp_exact` for the un-approximated convolution.
    """
    _require(params, drive, DriveKind.GAUSSIAN_TRAIN)
    im_z = _erf_im(params, drive)
    if not im_z < ERF_IM_LIMIT:
        raise ErfApproxOutOfRange(
            f"tau*omega/sqrt(2) = {im_z:.4g} is outside the approximation range (< {ERF_IM_LIMIT})"
        )
    tt = _times(t)
    g, w, tau = params.gamma, params.omega, drive.tau
    shift = g * tau**2
    c = A_ERF * tau * w / (2.0 * math.sqrt(2.0))
    x = np.zeros(tt.shape)
    for n in _pulse_range(drive, np.max(tt, initial=-np.inf)):
        u = (tt - n * drive.T) - drive.Q
        on = u >= 0
        uu = u[on]
        phase = w * (uu - shift)
        x[on] += np.exp(-g * uu) * (np.sin(phase) - c * np.cos(phase))
    pref = drive.impulse / (params.m * w) * math.exp(-0.5 * tau**2 * (w * w - g * g))
    return _out(pref * x, t)


def gaussian_pulse_response(u, params: SystemParams, tau: float):
    """Exact response to one unit-area Gaussian pulse centred at ``u = 0``.

    Uses the Faddeeva function so both sides of the pulse stay finite; no
    gate and no erf approximation.
    """
    uu = np.asarray(u, dtype=float)
    g, w = params.gamma, params.omega
    s = complex(-g, w)
    z = (uu + tau**2 * s) / (math.sqrt(2.0) * tau)
    gauss = np.exp(-0.5 * (uu / tau) ** 2)
    out = np.empty(uu.shape)
    before = uu < 0
    # 1 + erf(z) = e^{-z^2} w(-iz); combined exponent collapses to -u^2/2tau^2
    out[before] = np.imag(0.5 * gauss[before] * wofz(-1j * z[before])) / w
    after = ~before
    ua = uu[after]
    tail = np.imag(0.5 * gauss[after] * wofz(1j * z[after]))
    out[after] = (np.imag(np.exp(s * ua + 0.5 * tau**2 * s * s)) - tail) / w
    return _out(out, u)


def tp_gp_exact(t, params: SystemParams, drive: DriveSpec):
    """Gaussian-train response by exact per-pulse convolution (diagnostic reference)."""
    _require(params, drive, DriveKind.GAUSSIAN_TRAIN)
    tt = _times(t)
    x = np.zeros(tt.shape)
    for n in _pulse_range(drive, np.max(tt, initial=-np.inf), lead=40.0 * drive.tau):
        u = (tt - n * drive.T) - drive.Q
        x += gaussian_pulse_response(u, params, drive.tau)
    return _out(drive.impulse / params.m * x, t)


# ------------------------------------------------------ harmonic solutions


def _check_conditioning(params, drive):
    if params.gamma * drive.T < MIN_DAMPING_PER_PERIOD:
        raise IllConditioned(
            f"gamma*T = {params.gamma * drive.T:.3g} < {MIN_DAMPING_PER_PERIOD}; "
            "the pole-pair denominator is too close to zero"
        )


def _pole_pair(v, params, drive, shift=0.0):
    """Transient pole-pair factor ``e^{-gamma v}(sin w(v-s) - e^{gT} sin w(v+T-s)) / (w D)``.

    Scaled by ``e^{-2 gamma T}`` top and bottom so large ``gamma T`` cannot overflow.
    """
    g, w, T = params.gamma, params.omega, drive.T
    q = math.exp(-g * T)
    denom = w * (1.0 - 2.0 * q * math.cos(w * T) + q * q)
    return np.exp(-g * v) * (q * q * np.sin(w * (v - shift)) - q * np.sin(w * ((v + T) - shift))) / denom


def _pole_pair_sp(v, params, drive):
    g, w, T = params.gamma, params.omega, drive.T
    q = math.exp(-g * T)
    w0sq = params.omega0**2
    denom = w * w0sq * (1.0 - 2.0 * q * math.cos(w * T) + q * q)
    vT = v + T
    num = q * q * (w * np.cos(w * v) + g * np.sin(w * v)) - q * (w * np.cos(w * vT) + g * np.sin(w * vT))
    return -np.exp(-g * v) * num / denom


def transient_envelope(t, params: SystemParams, drive: DriveSpec):
    """Upper bound on the pole-pair term of the harmonic solutions at ``t`` (per unit I_p/m)."""
    validate(params, drive)
    u = np.maximum(_times(t) - drive.Q - drive.tau, 0.0)
    g, w, T = params.gamma, params.omega, drive.T
    q = math.exp(-g * T)
    denom = w * (1.0 - 2.0 * q * math.cos(w * T) + q * q)
    scale = 1.0
    if drive.kind is DriveKind.SQUARE_TRAIN:
        # each edge term is bounded by omega0/(w w0^2); two edges over 2 tau
        scale = params.omega0 / (params.omega0**2 * drive.tau)
    elif drive.kind is DriveKind.GAUSSIAN_TRAIN:
        scale = math.exp(0.5 * drive.tau**2 * (g * g - w * w))
    return _out(np.exp(-g * u) * (q * q + q) * scale / denom * abs(drive.impulse) / params.m, t)


def _harmonic_sum(u, params, drive, k_c, term):
    """Sum ``term(k, omega_k, u)`` for k = 1..k_c in fixed blocks."""
    acc = np.zeros(u.shape)
    wR = drive.omega_R
    for start in range(1, k_c + 1, _K_BLOCK):
        ks = np.arange(start, min(start + _K_BLOCK, k_c + 1), dtype=float)
        wk = ks * wR
        acc += term(wk[:, None], u[None, :]).sum(axis=0)
    return acc


def _resolve_kc(k_c, params, drive):
    if k_c is None:
        return auto_cutoff(params, drive)
    if int(k_c) != k_c or k_c < 1:
        raise ValueError(f"k_c must be a positive integer, got {k_c!r}")
    return int(k_c)


def hs_dc(t, params: SystemParams, drive: DriveSpec, k_c=None):
    _require(params, drive, DriveKind.DIRAC_COMB)
    _check_conditioning(params, drive)
    k_c = _resolve_kc(k_c, params, drive)
    tt = _times(t)
    flat = np.atleast_1d(tt).ravel()
    g, w0sq, T = params.gamma, params.omega0**2, drive.T
    u = flat - drive.Q
    on = u >= 0
    uu = u[on]

    def term(wk, v):
        a = w0sq - wk * wk
        b = 2.0 * g * wk
        return (2.0 * a * np.cos(wk * v) + 2.0 * b * np.sin(wk * v)) / (a * a + b * b)

    x = np.zeros(flat.shape)
    x[on] = _pole_pair(uu, params, drive) + 1.0 / (T * w0sq) + _harmonic_sum(uu, params, drive, k_c, term) / T
    x = (drive.impulse / params.m * x).reshape(tt.shape)
    return _out(x, t)


def hs_sp(t, params: SystemParams, drive: DriveSpec, k_c=None):
    _require(params, drive, DriveKind.SQUARE_TRAIN)
    _check_conditioning(params, drive)
    k_c = _resolve_kc(k_c, params, drive)
    tt = _times(t)
    flat = np.atleast_1d(tt).ravel()
    g, w0sq, T, tau = params.gamma, params.omega0**2, drive.T, drive.tau

    def step_series(wk, v):
        a = w0sq - wk * wk
        b = 2.0 * g * wk
        return (-2.0 * b * np.cos(wk * v) + 2.0 * a * np.sin(wk * v)) / (wk * (a * a + b * b))

    def x_inf(v):
        poly = (-4.0 * g + (T + 2.0 * v) * w0sq) / (2.0 * T * w0sq * w0sq)
        return poly + _pole_pair_sp(v, params, drive) + _harmonic_sum(v, params, drive, k_c, step_series) / T

    u = flat - drive.Q
    rising = (u + tau) >= 0
    both = (u - tau) >= 0
    only_rise = rising & ~both
    x = np.zeros(flat.shape)
    x[only_rise] = x_inf(u[only_rise] + tau)
    ub = u[both]
    if ub.size:
        # difference of the two edge terms, in product form
        def diff_series(wk, v):
            a = w0sq - wk * wk
            b = 2.0 * g * wk
            s = np.sin(wk * tau)
            return 2.0 * s * (2.0 * b * np.sin(wk * v) + 2.0 * a * np.cos(wk * v)) / (wk * (a * a + b * b))

        x[both] = (
            2.0 * tau / (T * w0sq)
            + _pole_pair_sp(ub + tau, params, drive)
            - _pole_pair_sp(ub - tau, params, drive)
            + _harmonic_sum(ub, params, drive, k_c, diff_series) / T
        )
    x = (drive.impulse / (2.0 * tau * params.m) * x).reshape(tt.shape)
    return _out(x, t)


def hs_gp(t, params: SystemParams, drive: DriveSpec, k_c=None):
    _require(params, drive, DriveKind.GAUSSIAN_TRAIN)
    _check_conditioning(params, drive)
    k_c = _resolve_kc(k_c, params, drive)
    tt = _times(t)
    flat = np.atleast_1d(tt).ravel()
    g, w, w0sq, T, tau = params.gamma, params.omega, params.omega0**2, drive.T, drive.tau

    def term(wk, v):
        a = w0sq - wk * wk
        b = 2.0 * g * wk
        return np.exp(-0.5 * (tau * wk) ** 2) * (b * np.sin(wk * v) + a * np.cos(wk * v)) / (a * a + b * b)

    u = flat - drive.Q
    on = u >= 0
    uu = u[on]
    transient = math.exp(0.5 * tau**2 * (g * g - w * w)) * _pole_pair(uu, params, drive, shift=g * tau**2)
    x = np.zeros(flat.shape)
    x[on] = 1.0 / (T * w0sq) + transient + 2.0 * _harmonic_sum(uu, params, drive, k_c, term) / T
    x = (drive.impulse / params.m * x).reshape(tt.shape)
    return _out(x, t)


# ----------------------------------------------- harmonic diagnostics


def _spectral_factor(k, drive):
    wk = k * drive.omega_R
    if drive.kind is DriveKind.GAUSSIAN_TRAIN:
        return np.exp(-0.5 * (drive.tau * wk) ** 2)
    if drive.kind is DriveKind.SQUARE_TRAIN:
        return np.sinc(wk * drive.tau / np.pi)  # sin(x)/x
    return np.ones_like(wk)


def harmonic_terms(params: SystemParams, drive: DriveSpec, k_max: int) -> list:
    """Amplitude and phase of harmonics ``k = 1..k_max`` of the harmonic solution."""
    validate(params, drive)
    k = np.arange(1, int(k_max) + 1, dtype=float)
    wk = k * drive.omega_R
    a = params.omega0**2 - wk * wk
    b = 2.0 * params.gamma * wk
    spec = _spectral_factor(k, drive)
    amp = 2.0 * drive.impulse / (params.m * drive.T) * spec / np.hypot(a, b)
    phase = np.arctan2(a, b)
    # fold signs into the phase so amplitudes stay non-negative
    phase = np.where(amp < 0, phase + np.pi, phase)
    phase = np.mod(phase + np.pi, 2 * np.pi) - np.pi
    return [HarmonicTermDiagnostics(int(ki), float(abs(ai)), float(pi)) for ki, ai, pi in zip(k, amp, phase)]


def term_bound(k, params: SystemParams, drive: DriveSpec):
    """Cheap upper bound on the amplitude of harmonic ``k``."""
    k = np.asarray(k, dtype=float)
    wk = k * drive.omega_R
    a = np.abs(params.omega0**2 - wk * wk)
    b = 2.0 * params.gamma * wk
    if drive.kind is DriveKind.GAUSSIAN_TRAIN:
        spec = np.exp(-0.5 * (drive.tau * wk) ** 2)
    elif drive.kind is DriveKind.SQUARE_TRAIN:
        spec = np.minimum(1.0, 1.0 / (wk * drive.tau))
    else:
        spec = np.ones_like(wk)
    return 2.0 * abs(drive.impulse) / (params.m * drive.T) * spec / np.maximum(a, b)


def auto_cutoff(params: SystemParams, drive: DriveSpec, rel_tol=AUTO_KC_REL_TOL, cap=AUTO_KC_CAP) -> int:
    """Smallest ``k_c`` whose following terms are all bounded below ``rel_tol * I_p/(m T w0^2)``."""
    validate(params, drive)
    threshold = rel_tol * abs(drive.impulse) / (params.m * drive.T * params.omega0**2)
    if threshold == 0:
        return 1
    ks = np.arange(1, cap + 2)
    bounds = term_bound(ks, params, drive)
    above = np.nonzero(bounds >= threshold)[0]
    k_c = int(ks[above[-1]]) if above.size else 1
    # the bound is decreasing past resonance, so checking to cap+1 suffices
    if k_c > cap:
        raise TruncationBudgetExceeded(
            f"harmonic series needs more than {cap} terms for relative tolerance {rel_tol}"
        )
    return max(k_c, 1)


# ------------------------------------------- second-harmonic approximation


def _approx2(t, params, drive, gaussian):
    tt = _times(t)
    g, w0sq, T, tau = params.gamma, params.omega0**2, drive.T, drive.tau
    u = tt - drive.Q
    x = np.full(tt.shape, 1.0 / w0sq)
    for k in (1, 2):
        wk = k * drive.omega_R
        detune = w0sq - wk * wk
        amp = 2.0 / math.sqrt(detune**2 + 4.0 * g * g * wk * wk)
        if gaussian:
            amp *= math.exp(-0.5 * tau**2 * wk * wk)
        phi = math.atan(detune / (2.0 * g * wk))
        x = x + amp * np.sin(wk * u + phi)
    x = np.where(u >= 0, drive.impulse / (params.m * T) * x, 0.0)
    return _out(x, t)


def approx2_dc(t, params: SystemParams, drive: DriveSpec):
    """Dirac-comb harmonic solution kept to ``k <= 2``; meant for ``t > T + Q``."""
    _require(params, drive, DriveKind.DIRAC_COMB)
    return _approx2(t, params, drive, gaussian=False)


def approx2_gp(t, params: SystemParams, drive: DriveSpec):
    _require(params, drive, DriveKind.GAUSSIAN_TRAIN)
    return _approx2(t, params, drive, gaussian=True)


def phases(params: SystemParams, drive: DriveSpec):
    """``(phi_1, phi_2)`` of the second-harmonic form."""
    validate(params, drive)
    g, w0sq, wR = params.gamma, params.omega0**2, drive.omega_R
    return (
        math.atan((w0sq - wR**2) / (2.0 * g * wR)),
        math.atan((w0sq - 4.0 * wR**2) / (4.0 * g * wR)),
    )


# ------------------------------------------------------------- dispatch

_TP = {
    DriveKind.DIRAC_COMB: tp_dc,
    DriveKind.SQUARE_TRAIN: tp_sp,
    DriveKind.GAUSSIAN_TRAIN: tp_gp,
}
_HS = {
    DriveKind.DIRAC_COMB: hs_dc,
    DriveKind.SQUARE_TRAIN: hs_sp,
    DriveKind.GAUSSIAN_TRAIN: hs_gp,
}
_APPROX2 = {
    DriveKind.DIRAC_COMB: approx2_dc,
    DriveKind.GAUSSIAN_TRAIN: approx2_gp,
}


def particular(t, params: SystemParams, drive: DriveSpec, method: Method):
    """Particular solution selected by ``method`` (oracle excluded)."""
    if method.kind is MethodKind.TIME_PERIODIC:
        return _TP[drive.kind](t, params, drive)
    if method.kind is MethodKind.HARMONIC:
        return _HS[drive.kind](t, params, drive, method.k_c)
    if method.kind is MethodKind.SECOND_HARMONIC:
        if drive.kind not in _APPROX2:
            raise KindMismatch("the second-harmonic form exists for dc and gp drives only")
        return _APPROX2[drive.kind](t, params, drive)
    raise KindMismatch(f"{method.kind.value} is not a closed form")


def evaluate_trace(
    grid: TimeGrid,
    params: SystemParams,
    drive: DriveSpec,
    ic: InitialConditions = InitialConditions(),
    method: Method = Method.time_periodic(),
    workers: int = 1,
) -> Trace:
    """Sample ``homogeneous + particular`` on ``grid``.

    Grid points are evaluated in fixed blocks; ``workers > 1`` only changes
    which thread handles a block, never the numbers.
    """
    validate(params, drive)
    if method.kind is MethodKind.ORACLE:
        from .oracle import OracleConfig, integrate

        config = OracleConfig() if method.dt is None else OracleConfig(dt=method.dt)
        return integrate(grid, params, drive, ic, config)

    if method.kind is MethodKind.HARMONIC and method.k_c is None:
        method = Method.harmonic(auto_cutoff(params, drive))
    particular(np.array([grid.t_start]), params, drive, method)  # surface errors early

    t = grid.times
    _times(t)
    blocks = [t[i : i + _CHUNK] for i in range(0, t.size, _CHUNK)]

    def run(block):
        x = particular(block, params, drive, method)
        if ic.x0 != 0.0 or ic.v0 != 0.0:
            x = x + homogeneous(block, params, ic)
        return x

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    values = np.concatenate(parts)

    diagnostics = []
    if method.kind in (MethodKind.HARMONIC, MethodKind.SECOND_HARMONIC) and not drive.is_infinite:
        n_in_window = DriveSpec(drive.kind, drive.T, drive.tau, drive.Q).pulse_count_until(grid.t_end)
        if n_in_window > drive.n_pulses:
            diagnostics.append(
                f"harmonic forms model an infinite train; {int(drive.n_pulses)} pulses declared "
                f"but {n_in_window} fall inside the grid"
            )
    return Trace(grid, values, method, digest(params, drive), tuple(diagnostics))
