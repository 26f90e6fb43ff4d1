"""Brute-force reference: fixed-step RK4 on the equation of motion.

Kicks of a Dirac comb are applied as exact velocity jumps on integration
nodes. Square-pulse edges are also placed on nodes so every step sees a
constant force. Steps are refined by ``substep_refine`` within ``+-4 tau``
of each finite-width pulse centre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .closed_form import force_eval
from .model import (
    DriveKind,
    DriveSpec,
    InitialConditions,
    Method,
    SystemParams,
    TimeGrid,
    Trace,
    digest,
    validate,
)


class StepTooLarge(ValueError):
    pass


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    """``dt=None`` picks ``min(t0/200, tau/8)``."""

    dt: Optional[float] = None
    substep_refine: int = 16
    window_halfwidths: float = 4.0

    def resolve_dt(self, params: SystemParams, drive: DriveSpec) -> float:
        if self.dt is not None:
            return self.dt
        dt = params.t0 / 200.0
        if drive.tau > 0:
            dt = min(dt, drive.tau / 8.0)
        return dt


def max_step(params: SystemParams, drive: DriveSpec) -> float:
    limit = params.t0 / 50.0
    if drive.tau > 0:
        limit = min(limit, drive.tau / 4.0)
    return limit


def _nodes(grid_t, events, windows, t_end, dt, fine_dt):
    """Integration nodes from 0 to ``t_end`` through every grid time and event."""
    marks = [np.array([0.0, t_end]), grid_t, events]
    if windows.size:
        marks.append(windows.ravel())
    breaks = np.unique(np.concatenate(marks))
    breaks = breaks[(breaks >= 0.0) & (breaks <= t_end)]

    lo, hi = (windows[:, 0], windows[:, 1]) if windows.size else (np.empty(0), np.empty(0))
    pieces = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        mid = 0.5 * (a + b)
        inside = bool(np.any((lo <= mid) & (mid <= hi))) if lo.size else False
        step = fine_dt if inside else dt
        n = max(1, int(math.ceil((b - a) / step - 1e-9)))
        pieces.append(np.linspace(a, b, n + 1)[:-1])
    pieces.append(np.array([t_end]))
    return np.concatenate(pieces)


def integrate_state(
    grid: TimeGrid,
    params: SystemParams,
    drive: DriveSpec,
    ic: InitialConditions = InitialConditions(),
    config: OracleConfig = OracleConfig(),
):
    """Integrate from ``t = 0`` and return ``(x, v)`` at the grid times."""
    validate(params, drive)
    if grid.t_start < 0:
        raise ValueError("the oracle starts at t = 0; grid must not start earlier")
    dt = config.resolve_dt(params, drive)
    if not dt <= max_step(params, drive):
        raise StepTooLarge(f"dt = {dt:.3g} exceeds the limit {max_step(params, drive):.3g}")
    if int(config.substep_refine) != config.substep_refine or config.substep_refine < 1:
        raise ValueError("substep_refine must be a positive integer")

    grid_t = grid.times
    t_end = float(grid_t[-1])
    n_pulses = drive.pulse_count_until(t_end + config.window_halfwidths * drive.tau)
    centres = np.array([n * drive.T + drive.Q for n in range(n_pulses)])
    if drive.kind is DriveKind.DIRAC_COMB:
        events = centres
        windows = np.empty((0, 2))
    else:
        half = config.window_halfwidths * drive.tau
        windows = np.column_stack([centres - half, centres + half]) if n_pulses else np.empty((0, 2))
        if drive.kind is DriveKind.SQUARE_TRAIN:
            events = np.concatenate([centres - drive.tau, centres + drive.tau])
        else:
            events = centres
    nodes = _nodes(grid_t, events, windows, t_end, dt, dt / config.substep_refine)

    starts, ends = nodes[:-1], nodes[1:]
    h = ends - starts
    m = params.m
    if drive.kind is DriveKind.DIRAC_COMB:
        f0 = fm = f1 = np.zeros(h.shape)
        kicks = np.isin(nodes, events)
    else:
        mids = starts + 0.5 * h
        fm = force_eval(mids, drive) / m
        if drive.kind is DriveKind.SQUARE_TRAIN:
            # piecewise constant between nodes; the midpoint value is exact
            f0 = f1 = fm
        else:
            fn = force_eval(nodes, drive) / m
            f0, f1 = fn[:-1], fn[1:]
        kicks = np.zeros(nodes.shape, dtype=bool)

    g2 = 2.0 * params.gamma
    w0sq = params.omega0**2
    jump = drive.impulse / m
    x, v = float(ic.x0), float(ic.v0)
    xs = np.empty(nodes.shape)
    vs = np.empty(nodes.shape)
    kicks_l = kicks.tolist()
    h_l, f0_l, fm_l, f1_l = h.tolist(), f0.tolist(), fm.tolist(), f1.tolist()
    for i in range(h.size):
        if kicks_l[i]:
            v += jump
        xs[i] = x
        vs[i] = v
        hh = h_l[i]
        a1x = v
        a1v = -g2 * v - w0sq * x + f0_l[i]
        x2 = x + 0.5 * hh * a1x
        v2 = v + 0.5 * hh * a1v
        a2v = -g2 * v2 - w0sq * x2 + fm_l[i]
        x3 = x + 0.5 * hh * v2
        v3 = v + 0.5 * hh * a2v
        a3v = -g2 * v3 - w0sq * x3 + fm_l[i]
        x4 = x + hh * v3
        v4 = v + hh * a3v
        a4v = -g2 * v4 - w0sq * x4 + f1_l[i]
        x = x + hh / 6.0 * (a1x + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + hh / 6.0 * (a1v + 2.0 * a2v + 2.0 * a3v + a4v)
    if kicks_l[-1]:
        v += jump
    xs[-1] = x
    vs[-1] = v

    idx = np.searchsorted(nodes, grid_t)
    return xs[idx], vs[idx]


def integrate(
    grid: TimeGrid,
    params: SystemParams,
    drive: DriveSpec,
    ic: InitialConditions = InitialConditions(),
    config: OracleConfig = OracleConfig(),
) -> Trace:
    x, _ = integrate_state(grid, params, drive, ic, config)
    method = Method.oracle(config.resolve_dt(params, drive))
    return Trace(grid, x, method, digest(params, drive))


@dataclass(frozen=True)
class Comparison:
    max_abs_diff: float
    max_rel_to_peak: float
    rms_diff: float
    argmax_time: float
    rel_is_absolute: bool = False  # set when trace_a is identically zero


def compare(trace_a: Trace, trace_b: Trace, mask=None) -> Comparison:
    """Difference metrics of ``trace_b`` against ``trace_a``.

    ``mask`` optionally restricts the samples that count; the peak used for
    the relative metric is always taken over all of ``trace_a``.
    """
    ga, gb = trace_a.grid, trace_b.grid
    if (ga.t_start, ga.t_end, ga.n_samples) != (gb.t_start, gb.t_end, gb.n_samples):
        raise GridMismatch(f"grids differ: {ga} vs {gb}")
    diff = np.abs(trace_a.values - trace_b.values)
    t = trace_a.times
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        diff, t = diff[mask], t[mask]
    if diff.size == 0:
        return Comparison(0.0, 0.0, 0.0, float("nan"))
    i = int(np.argmax(diff))
    max_abs = float(diff[i])
    peak = trace_a.peak
    return Comparison(
        max_abs_diff=max_abs,
        max_rel_to_peak=max_abs / peak if peak > 0 else max_abs,
        rms_diff=float(np.sqrt(np.mean(diff**2))),
        argmax_time=float(t[i]),
        rel_is_absolute=not peak > 0,
    )
