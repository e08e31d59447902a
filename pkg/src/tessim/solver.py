"""Adaptive TR-BDF2 integrator with event localization.

One step is a trapezoidal stage to ``t + gamma*h`` followed by a BDF2 stage to
``t + h`` (gamma = 2 - sqrt(2), so both stages share the iteration matrix
``I - d*h*J`` with d = gamma/2). The local error is estimated against the
third-order explicit companion built from the three stage derivatives and
filtered through the same matrix, as in MATLAB's ode23tb.

Events are located on the cubic Hermite interpolant of each accepted step.
The integrator stops at the earliest one, hands the state to ``on_event``
and restarts from whatever state the callback returns.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import scipy.linalg

GAMMA = 2.0 - math.sqrt(2.0)
D = GAMMA / 2.0
W = math.sqrt(2.0) / 4.0
# BDF2 stage: y - D h f(y) = A_Z z - A_X x
A_Z = 1.0 / (GAMMA * (2.0 - GAMMA))
A_X = (1.0 - GAMMA) ** 2 / (GAMMA * (2.0 - GAMMA))
# error = h * (E1 f_n + E2 f_z + E3 f_{n+1})
E1 = (1.0 - 4.0 * W) / 3.0
E2 = 1.0 / 3.0
E3 = -(1.0 - 4.0 * W) / 3.0 - 1.0 / 3.0

EPS = np.finfo(float).eps
_GAUSS_NODES = np.array([0.5 - 0.5 * math.sqrt(0.6), 0.5, 0.5 + 0.5 * math.sqrt(0.6)])
_GAUSS_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


class SolverError(RuntimeError):
    """Integration failure; carries the time and state where it happened."""

    def __init__(self, message: str, t: float, x: np.ndarray):
        super().__init__(f"{message} at t={t:.6g}")
        self.t = t
        self.x = np.array(x, copy=True)


@dataclass
class SolverConfig:
    rtol: float = 1e-3
    atol: float = 1e-3  # fallback when no per-state vector is supplied
    atol_enthalpy: float = 1e-3  # kJ/kg
    atol_soc: float = 1e-6
    min_step: float = 1e-12  # s
    max_step: float = 100.0  # s
    first_step: Optional[float] = None
    event_tol: float = 1e-6  # s
    max_newton_iter: int = 5
    jacobian: str = "finite-difference"  # or "none"
    output_interval: float = 1.0  # s
    fixed_step: Optional[float] = None  # disables error control; for order studies

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.atol_enthalpy > 0 and self.atol_soc > 0):
            raise ValueError("tolerances must be > 0")
        if not 0 < self.min_step <= self.max_step:
            raise ValueError("need 0 < min_step <= max_step")
        if not self.event_tol > 0:
            raise ValueError("event_tol must be > 0")
        if self.max_newton_iter < 1:
            raise ValueError("max_newton_iter must be >= 1")
        if self.jacobian not in ("finite-difference", "none"):
            raise ValueError(f"unknown jacobian mode {self.jacobian!r}")
        if not self.output_interval > 0:
            raise ValueError("output_interval must be > 0")


@dataclass
class Event:
    """Switching surface ``fn(t, x)``.

    ``direction=+1`` fires when ``g >= 0`` becomes true, ``-1`` when ``g <= 0``
    becomes true; ``inclusive=False`` makes the comparisons strict. ``0``
    fires on any change of ``g >= 0``. An event with ``time`` set is a
    scheduled breakpoint: steps are clipped to land on it exactly and ``fn``
    is ignored.
    """

    name: str
    fn: Optional[Callable[[float, np.ndarray], float]] = None
    direction: int = 0
    inclusive: bool = True
    time: Optional[float] = None

    def condition(self, g: float) -> bool:
        if self.direction > 0:
            return g >= 0.0 if self.inclusive else g > 0.0
        if self.direction < 0:
            return g <= 0.0 if self.inclusive else g < 0.0
        return g >= 0.0


@dataclass
class EventRecord:
    t: float
    names: List[str]


@dataclass
class RunStats:
    n_accepted: int = 0
    n_rejected: int = 0
    n_rhs: int = 0
    n_jac: int = 0
    n_lu: int = 0
    n_newton_fail: int = 0
    t_comp: float = 0.0
    events: List[EventRecord] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return self.n_accepted + self.n_rejected

    def as_dict(self) -> dict:
        return {
            "n_steps": self.n_steps,
            "n_accepted": self.n_accepted,
            "n_rejected": self.n_rejected,
            "n_rhs": self.n_rhs,
            "n_jac": self.n_jac,
            "n_lu": self.n_lu,
            "n_newton_fail": self.n_newton_fail,
            "n_events": len(self.events),
            "t_comp_s": self.t_comp,
        }


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    segment: np.ndarray  # index of the inter-event segment each sample belongs to
    stats: RunStats
    boundary_energy: float = 0.0
    terminated: bool = False


class Hermite:
    """Cubic Hermite interpolant over one step."""

    def __init__(self, t0, x0, f0, t1, x1, f1):
        self.t0, self.h = t0, t1 - t0
        self.x0, self.x1 = x0, x1
        self.hf0, self.hf1 = self.h * f0, self.h * f1

    def __call__(self, t):
        s = (np.asarray(t, dtype=float) - self.t0) / self.h
        s2, s3 = s * s, s * s * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        if s.ndim == 0:
            return h00 * self.x0 + h10 * self.hf0 + h01 * self.x1 + h11 * self.hf1
        return (np.outer(h00, self.x0) + np.outer(h10, self.hf0)
                + np.outer(h01, self.x1) + np.outer(h11, self.hf1))


def event_scan(interp: Callable, t0: float, t1: float, events: Sequence[Event],
               cond0: Sequence[bool], tol: float, x1: Optional[np.ndarray] = None):
    """Earliest time in (t0, t1] at which an event's condition turns true.

    Returns ``(t_event, indices)`` with every event whose condition holds at
    ``t_event`` after being false at ``t0``, or ``None``.
    """
    if x1 is None:
        x1 = interp(t1)
    candidates = []
    for i, ev in enumerate(events):
        if ev.time is not None or cond0[i]:
            continue
        if ev.condition(ev.fn(t1, x1)):
            candidates.append(i)
    if not candidates:
        return None
    t_best = t1
    for i in candidates:
        ev = events[i]
        a, b = t0, t_best
        if b != t1 and not ev.condition(ev.fn(b, interp(b))):
            continue  # crosses after an earlier candidate
        while b - a > tol:
            m = 0.5 * (a + b)
            if ev.condition(ev.fn(m, interp(m))):
                b = m
            else:
                a = m
        t_best = b
    x_best = x1 if t_best == t1 else interp(t_best)
    fired = [i for i in candidates if events[i].condition(events[i].fn(t_best, x_best))]
    return t_best, fired


def _rms(v: np.ndarray) -> float:
    return float(np.sqrt(np.mean(v * v))) if v.size else 0.0


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    x0,
    t_span: Sequence[float],
    config: Optional[SolverConfig] = None,
    events: Union[None, Sequence[Event], Callable[[], Sequence[Event]]] = None,
    on_event: Optional[Callable[[List[Event], float, np.ndarray], Optional[np.ndarray]]] = None,
    atol: Optional[np.ndarray] = None,
    t_eval: Optional[np.ndarray] = None,
    quad: Optional[Callable[[float, np.ndarray], float]] = None,
) -> Trajectory:
    """Integrate ``xdot = rhs(t, x)`` over ``t_span``.

    ``events`` may be a callable so the active set can change after each
    event (mode-dependent switching surfaces). ``on_event(fired, t, x)``
    returns the state to restart from, or ``None`` to stop. Without a
    callback the first event stops the run. ``quad(t, x)`` is integrated
    alongside the solution (Gauss-Legendre on the interpolant) and returned
    as ``boundary_energy``.
    """
    cfg = config or SolverConfig()
    t0, t_end = float(t_span[0]), float(t_span[1])
    if not t_end >= t0:
        raise ValueError("t_span must be increasing")
    x = np.array(x0, dtype=float)
    n = x.size
    atol_v = np.full(n, cfg.atol) if atol is None else np.broadcast_to(np.asarray(atol, float), (n,)).copy()
    rtol = cfg.rtol
    newton_tol = max(10 * EPS / rtol, min(0.03, rtol ** 0.5))
    ident = np.eye(n)
    if t_eval is None:
        t_eval = np.arange(t0, t_end, cfg.output_interval)
        if t_eval.size == 0 or t_eval[-1] < t_end:
            t_eval = np.append(t_eval, t_end)
    t_eval = np.asarray(t_eval, dtype=float)
    events_fn = events if callable(events) else (lambda evs=list(events or []): evs)

    stats = RunStats()
    wall0 = time.perf_counter()

    def f_eval(t, y):
        stats.n_rhs += 1
        return rhs(t, y)

    def jacobian(t, y, fy):
        stats.n_jac += 1
        if cfg.jacobian == "none":
            return np.zeros((n, n))
        J = np.empty((n, n))
        delta = math.sqrt(EPS) * np.maximum(np.abs(y), 1.0)
        for j in range(n):
            yp = y.copy()
            yp[j] += delta[j]
            J[:, j] = (f_eval(t, yp) - fy) / (yp[j] - y[j])
        return J

    out_t: list = []
    out_x: list = []
    out_seg: list = []
    k_out = int(np.searchsorted(t_eval, t0, side="left"))
    if k_out < t_eval.size and t_eval[k_out] == t0:
        out_t.append(t0)
        out_x.append(x.copy())
        out_seg.append(0)
        k_out += 1

    segment = 0
    energy = 0.0
    t = t0
    f = f_eval(t, x)
    if not np.all(np.isfinite(f)):
        raise SolverError("non-finite derivative at initial state", t, x)

    def start_segment(t, x):
        evs = list(events_fn())
        cond = [False if ev.time is not None else ev.condition(ev.fn(t, x)) for ev in evs]
        return evs, cond

    evs, cond0 = start_segment(t, x)

    if cfg.fixed_step is not None:
        h = cfg.fixed_step
    elif cfg.first_step is not None:
        h = cfg.first_step
    else:
        sc = atol_v + rtol * np.abs(x)
        d0, d1 = _rms(x / sc), _rms(f / sc)
        h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(max(h, cfg.min_step), cfg.max_step)

    J = None
    J_fresh = False
    lu = None
    lu_h = None
    terminated = False
    rejected = False  # no step growth right after a rejection

    def newton(t_s, psi, z0, scale):
        z = z0.copy()
        dz_old = None
        rate = None
        for k in range(cfg.max_newton_iter):
            fz = f_eval(t_s, z)
            if not np.all(np.isfinite(fz)):
                return None
            dz = scipy.linalg.lu_solve(lu, psi + D * h * fz - z, check_finite=False)
            dz_norm = _rms(dz / scale)
            if dz_old is not None:
                rate = dz_norm / dz_old if dz_old > 0 else 0.0
                if rate >= 1.0:
                    return None
                if rate ** (cfg.max_newton_iter - k) / (1 - rate) * dz_norm > newton_tol:
                    return None
            z += dz
            if dz_norm == 0.0 or (rate is not None and rate / (1 - rate) * dz_norm < newton_tol) \
                    or (rate is None and dz_norm < 1e-3 * newton_tol):
                return z
            dz_old = dz_norm
        return None

    while t < t_end:
        # clip to the end of the span and to the next scheduled breakpoint
        bp_target = t_end
        bp_events = []
        for ev in evs:
            if ev.time is not None and ev.time > t:
                if ev.time < bp_target:
                    bp_target, bp_events = ev.time, [ev]
                elif ev.time == bp_target:
                    bp_events.append(ev)
        h = min(h, cfg.max_step)
        if t + h >= bp_target or bp_target - (t + h) < cfg.min_step:
            h = bp_target - t
        if h < cfg.min_step and t + h < t_end:
            raise SolverError(f"step size {h:.3g} below min_step", t, x)

        if J is None:
            J = jacobian(t, x, f)
            J_fresh = True
            lu_h = None
        if lu_h != h:
            lu = scipy.linalg.lu_factor(ident - D * h * J, check_finite=False)
            stats.n_lu += 1
            lu_h = h

        scale = atol_v + rtol * np.abs(x)
        t_new = bp_target if h == bp_target - t else t + h
        z = newton(t + GAMMA * h, x + D * h * f, x + GAMMA * h * f, scale)
        y = None
        if z is not None:
            y = newton(t_new, A_Z * z - A_X * x, x + (z - x) / GAMMA, scale)
        if y is None:
            stats.n_newton_fail += 1
            if not J_fresh:
                J = jacobian(t, x, f)
                J_fresh = True
                lu_h = None
            else:
                stats.n_rejected += 1
                rejected = True
                h *= 0.3
                if h < cfg.min_step:
                    raise SolverError("Newton iteration failed to converge at minimum step", t, x)
            continue

        f_z = (z - x) / (D * h) - f
        f_y = (y - A_Z * z + A_X * x) / (D * h)
        est = h * (E1 * f + E2 * f_z + E3 * f_y)
        est = scipy.linalg.lu_solve(lu, est, check_finite=False)
        err_scale = atol_v + rtol * np.maximum(np.abs(x), np.abs(y))
        err = _rms(est / err_scale)

        if cfg.fixed_step is None and not err <= 1.0:
            stats.n_rejected += 1
            rejected = True
            fac = 0.2 if not np.isfinite(err) else max(0.2, 0.9 * err ** (-1.0 / 3.0))
            h *= fac
            if h < cfg.min_step:
                raise SolverError(f"step size underflow (error norm {err:.3g})", t, y)
            continue

        stats.n_accepted += 1
        f_new = f_eval(t_new, y)
        if not np.all(np.isfinite(f_new)):
            raise SolverError("non-finite derivative after accepted step", t_new, y)
        interp = Hermite(t, x, f, t_new, y, f_new)

        fired: List[Event] = []
        t_stop, x_stop = t_new, y
        hit = event_scan(interp, t, t_new, evs, cond0, cfg.event_tol, x1=y)
        if hit is not None:
            t_stop, idx = hit
            fired = [evs[i] for i in idx]
            x_stop = y if t_stop == t_new else interp(t_stop)
        if t_stop == bp_target and bp_events:
            fired.extend(e for e in bp_events if e not in fired)

        if quad is not None and t_stop > t:
            span = t_stop - t
            nodes = t + span * _GAUSS_NODES
            xs = interp(nodes)
            energy += span * sum(w * quad(tn, xn) for w, tn, xn in zip(_GAUSS_WEIGHTS, nodes, xs))

        k_hi = int(np.searchsorted(t_eval, t_stop, side="right"))
        if k_hi > k_out:
            ts = t_eval[k_out:k_hi]
            out_t.extend(ts)
            if ts[-1] == t_stop and len(ts) == 1:
                out_x.append(x_stop.copy())
            else:
                xs = interp(ts)
                if ts[-1] == t_stop:
                    xs[-1] = x_stop
                out_x.extend(xs)
            out_seg.extend([segment] * len(ts))
            k_out = k_hi

        if cfg.fixed_step is not None:
            h_next = cfg.fixed_step
        else:
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** (-1.0 / 3.0)))
            h_next = h * (min(fac, 1.0) if rejected else fac)
        rejected = False
        t, x = t_stop, np.array(x_stop, dtype=float)

        if fired:
            stats.events.append(EventRecord(t, [e.name for e in fired]))
            x_new = None if on_event is None else on_event(fired, t, x)
            if x_new is None:
                # a terminated run ends on the event state
                terminated = True
                if not out_t or out_t[-1] < t:
                    out_t.append(t)
                    out_x.append(x.copy())
                    out_seg.append(segment)
                break
            x = np.array(x_new, dtype=float)
            segment += 1
            f = f_eval(t, x)
            evs, cond0 = start_segment(t, x)
            J = None
            h = h_next
        else:
            f = f_new
            J_fresh = False
            cond0 = [False if ev.time is not None else ev.condition(ev.fn(t, x)) for ev in evs]
            h = h_next

    stats.t_comp = time.perf_counter() - wall0
    return Trajectory(
        t=np.array(out_t),
        x=np.array(out_x).reshape(len(out_t), n),
        segment=np.array(out_seg, dtype=int),
        stats=stats,
        boundary_energy=energy,
        terminated=terminated,
    )
