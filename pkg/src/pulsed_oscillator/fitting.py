"""Recover damping rate and damped frequency from a displacement trace.

Only ``(gamma, omega)`` are free. Mass and every drive parameter are taken
as known, and the trace is assumed to start from rest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .closed_form import particular
from .model import DriveSpec, Method, MethodKind, SystemParams, Trace

GAMMA_FLOOR = 1e-9
GAP = 1e-9


class InsufficientData(ValueError):
    pass


class SingularJacobian(ArithmeticError):
    pass


class NotConverged(RuntimeError):
    """Carries the best result found in ``.result``."""

    def __init__(self, result):
        super().__init__(f"no convergence after {result.n_iterations} iterations")
        self.result = result


@dataclass(frozen=True)
class FitProblem:
    data: Trace
    drive: DriveSpec
    m: float = 1.0
    model: Method = Method.time_periodic()
    init: tuple = None  # (gamma, omega); None -> initial_guess()

    def __post_init__(self):
        if self.data.grid.n_samples < 10:
            raise InsufficientData("a fit needs at least 10 samples")
        if self.model.kind is MethodKind.ORACLE:
            raise ValueError("fit against a closed form, not the oracle")
        if self.init is not None:
            g, w = self.init
            if not (g > 0 and w > g):
                raise ValueError(f"init must satisfy 0 < gamma < omega, got {self.init}")


@dataclass(frozen=True)
class FitResult:
    gamma_hat: float
    omega_hat: float
    omega0_hat: float
    residual_rms: float
    n_iterations: int
    converged: bool
    jacobian_condition: float
    gradient_norm: float = float("nan")
    rms_history: tuple = field(default=(), repr=False)


def project(gamma, omega):
    gamma = max(gamma, GAMMA_FLOOR)
    omega = max(omega, gamma + GAP)
    return gamma, omega


def model_values(t, gamma, omega, drive, m=1.0, model=Method.time_periodic()):
    params = SystemParams.from_omega(gamma, omega, m)
    return np.asarray(particular(t, params, drive, model), dtype=float)


def _fit_mask(t, drive, model):
    if model.kind is MethodKind.SECOND_HARMONIC:
        # the k <= 2 form is only meant for the settled regime
        return t > drive.T + drive.Q
    return np.ones(t.shape, dtype=bool)


def fit(
    problem: FitProblem,
    max_iter: int = 200,
    ftol: float = 1e-10,
    gtol: float = 1e-10,
    lam0: float = 1e-3,
    strict: bool = False,
) -> FitResult:
    """Levenberg-Marquardt on ``sum (data - model)^2`` with a central-difference Jacobian.

    Stops once two consecutive iterations show a relative RMS decrease below
    ``ftol`` or a gradient norm below ``gtol``. When ``max_iter`` is reached
    the result is still returned, with ``converged=False``, unless ``strict``.

    Raises
    ------
    NotConverged
        Only with ``strict=True``.
    SingularJacobian
        If the Jacobian condition number exceeds 1e12.
    """
    t = problem.data.times
    mask = _fit_mask(t, problem.drive, problem.model)
    t, y = t[mask], problem.data.values[mask]
    if t.size < 10:
        raise InsufficientData("fewer than 10 samples fall inside the model's validity window")

    def residual(p):
        return y - model_values(t, p[0], p[1], problem.drive, problem.m, problem.model)

    def jacobian(p):
        cols = []
        for i in range(2):
            h = 1e-6 * max(abs(p[i]), 1.0)
            up, dn = list(p), list(p)
            up[i] += h
            dn[i] -= h
            # keep the lower probe inside the underdamped region
            if i == 0:
                dn[0] = max(dn[0], GAMMA_FLOOR)
            fu = model_values(t, *project(*up), problem.drive, problem.m, problem.model)
            fd = model_values(t, *project(*dn), problem.drive, problem.m, problem.model)
            cols.append((fu - fd) / (up[i] - dn[i]))
        return np.column_stack(cols)

    init = problem.init if problem.init is not None else initial_guess(problem.data, problem.drive)
    p = project(*init)
    r = residual(p)
    rms = float(np.sqrt(np.mean(r * r)))
    history = [rms]
    lam = lam0
    strikes = 0
    converged = False
    cond = float("nan")
    it = 0
    for it in range(1, max_iter + 1):
        J = jacobian(p)
        cond = float(np.linalg.cond(J))
        if not cond <= 1e12:
            raise SingularJacobian(f"Jacobian condition number {cond:.3g} exceeds 1e12")
        grad = J.T @ r
        if np.linalg.norm(grad) < gtol:
            strikes += 1
            if strikes >= 2:
                converged = True
                break
            continue
        A = J.T @ J
        D = np.diag(np.diag(A))
        try:
            step = np.linalg.solve(A + lam * D, grad)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        trial = project(p[0] + step[0], p[1] + step[1])
        r_new = residual(trial)
        rms_new = float(np.sqrt(np.mean(r_new * r_new)))
        if rms_new <= rms:
            rel = (rms - rms_new) / rms if rms > 0 else 0.0
            p, r, rms = trial, r_new, rms_new
            history.append(rms)
            lam = max(lam / 10.0, 1e-15)
            strikes = strikes + 1 if rel < ftol else 0
        else:
            lam *= 10.0
            # a stalled search near the optimum counts like a negligible decrease
            if lam > 1e10:
                strikes += 1
        if strikes >= 2:
            converged = True
            break

    gamma, omega = float(p[0]), float(p[1])
    grad_norm = float(np.linalg.norm(jacobian(p).T @ r))
    result = FitResult(
        gamma_hat=gamma,
        omega_hat=omega,
        omega0_hat=math.hypot(gamma, omega),
        residual_rms=rms,
        n_iterations=it,
        converged=converged,
        jacobian_condition=cond,
        gradient_norm=grad_norm,
        rms_history=tuple(history),
    )
    if strict and not converged:
        raise NotConverged(result)
    return result


# ------------------------------------------------------------ initial guess


def _quiet_segments(t, drive, dt):
    """Index ranges between pulses, where the response is a free damped sinusoid."""
    guard = 6.0 * drive.tau + 2.0 * dt
    n = drive.pulse_count_until(t[-1] + guard)
    centres = np.array([k * drive.T + drive.Q for k in range(n)])
    busy = np.zeros(t.shape, dtype=bool)
    for c in centres:
        busy |= np.abs(t - c) <= guard
    # nothing before the first pulse has moved yet
    if centres.size:
        busy |= t < centres[0]
    free = ~busy
    edges = np.flatnonzero(np.diff(np.concatenate([[0], free.astype(int), [0]])))
    return [(a, b) for a, b in zip(edges[::2], edges[1::2]) if b - a >= 4]


def _zero_crossing_omega(x, t, segments):
    spacings = []
    for a, b in segments:
        xs, ts = x[a:b], t[a:b]
        idx = np.flatnonzero(np.signbit(xs[:-1]) != np.signbit(xs[1:]))
        if idx.size < 2:
            continue
        tc = ts[idx] - xs[idx] * (ts[idx + 1] - ts[idx]) / (xs[idx + 1] - xs[idx])
        spacings.extend(np.diff(tc))
    if not spacings:
        return None
    return math.pi / float(np.median(spacings))


def _prony(x, segments, lag):
    rows, rhs = [], []
    for a, b in segments:
        xs = x[a:b]
        if xs.size <= 2 * lag:
            continue
        rows.append(np.column_stack([xs[lag:-lag], xs[: -2 * lag]]))
        rhs.append(xs[2 * lag :])
    if not rows:
        return None
    M, y = np.vstack(rows), np.concatenate(rhs)
    (c1, c2), *_ = np.linalg.lstsq(M, y, rcond=None)
    if not (c2 < 0 and c1 * c1 + 4.0 * c2 < 0):
        return None
    radius = math.sqrt(-c2)
    theta = math.acos(max(-1.0, min(1.0, c1 / (2.0 * radius))))
    return radius, theta


def _dft_omega(x, t, drive):
    late = t >= t[0] + 3.0 * drive.T
    xs = x[late] if np.count_nonzero(late) >= 8 else x
    spec = np.abs(np.fft.rfft(xs - xs.mean()))
    if spec.size < 2:
        return None
    k = int(np.argmax(spec[1:])) + 1
    return 2.0 * math.pi * k / (xs.size * (t[1] - t[0]))


def _log_decrement_gamma(x, t, drive):
    first = (t >= drive.Q) & (t < drive.Q + drive.T)
    xs, ts = x[first], t[first]
    peaks = np.flatnonzero((xs[1:-1] > xs[:-2]) & (xs[1:-1] >= xs[2:]) & (xs[1:-1] > 0)) + 1
    if peaks.size < 2:
        return None
    a, b = peaks[0], peaks[1]
    return math.log(xs[a] / xs[b]) / (ts[b] - ts[a])


def initial_guess(data: Trace, drive: DriveSpec):
    """Seed ``(gamma, omega)`` for :func:`fit` from the free ringing between pulses.

    Between pulses the response is a single damped sinusoid, so a two-pole
    linear predictor fitted there yields both rates. Falls back to the
    dominant DFT bin (then ``2 omega_R``) for the frequency and to the
    logarithmic decrement (then ``1/(5T)``) for the damping.
    """
    t, x = data.times, data.values
    if t[-1] - t[0] < 3.0 * drive.T:
        raise InsufficientData("need at least three pulse periods of data")
    dt = data.grid.step
    segments = _quiet_segments(t, drive, dt)

    # zero crossings are fragile under noise, so cross-check against the spectrum
    omega = _zero_crossing_omega(x, t, segments)
    rough = _dft_omega(x, t, drive)
    if omega is None or (rough is not None and not 0.5 * rough < omega < 2.0 * rough):
        omega = rough
    gamma = None
    if omega is not None and omega > 0:
        for _ in range(4):
            lag = max(1, int(round((math.pi / 3.0) / (omega * dt))))
            roots = _prony(x, segments, lag)
            if roots is None:
                break
            radius, theta = roots
            gamma = -math.log(radius) / (lag * dt)
            omega = theta / (lag * dt)
    if omega is None or not omega > 0:
        omega = _dft_omega(x, t, drive) or 2.0 * drive.omega_R
    if gamma is None or not gamma > 0:
        gamma = _log_decrement_gamma(x, t, drive)
    if gamma is None or not gamma > 0:
        gamma = 1.0 / (5.0 * drive.T)
    return project(gamma, omega)


def synthetic_data(grid, gamma, omega, drive, m=1.0, noise=0.0, seed=0, model=Method.time_periodic()):
    """Model trace plus i.i.d. Gaussian noise of ``noise * peak`` standard deviation."""
    from .model import digest

    params = SystemParams.from_omega(gamma, omega, m)
    clean = model_values(grid.times, gamma, omega, drive, m, model)
    rng = np.random.default_rng(seed)
    sigma = noise * float(np.max(np.abs(clean)))
    values = clean + rng.normal(0.0, sigma, clean.shape) if sigma > 0 else clean
    return Trace(grid, values, model, digest(params, drive))


__all__ = [
    "FitProblem",
    "FitResult",
    "InsufficientData",
    "NotConverged",
    "SingularJacobian",
    "fit",
    "initial_guess",
    "model_values",
    "synthetic_data",
]
