"""Build Nambu-Hamiltonian flows from maps and integrate them.

Given an n-dimensional invertible map, an n-1 tuple of conserved
Hamiltonians turns one source coordinate into the time variable of an ODE
system.  The first n-2 Hamiltonians are source coordinates read through
the inverse map; the last one is the integral of the Jacobian determinant
along the remaining source coordinate.  This module constructs those
fields (numerically, by quadrature), forms the bracket-based right-hand
sides in image space and source space, and integrates them with either a
classical fixed-step RK4 or an adaptive Dormand-Prince 5(4) pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import core
from .core import Jet, as_state, float_value, map_det_field
from .errors import (
    DetConditionError,
    MaxStepsError,
    SingularPointError,
    StepUnderflowError,
)
from .quadrature import integrate_gk

DET_CONDITION_TOL = 1e-7
QUADRATURE_ABS_TOL = 1e-10


# ---------------------------------------------------------------------------
# flow systems


@dataclass(frozen=True)
class FlowSystem:
    """An n-dimensional flow with n-1 conserved Hamiltonians.

    ``time_index`` is the 1-based source coordinate playing the role of
    time.  ``hamiltonians`` are scalar fields over image space and
    ``det_j_field`` is the Jacobian determinant over source space; both
    accept float or jet coordinates.
    """

    map: core.MapDescriptor
    time_index: int
    hamiltonians: tuple
    det_j_field: Callable

    def __post_init__(self):
        n = self.map.dimension
        if len(self.hamiltonians) != n - 1:
            raise ValueError(
                f"flow over {n} dimensions needs {n - 1} hamiltonians, "
                f"got {len(self.hamiltonians)}"
            )
        if not 1 <= self.time_index <= n:
            raise ValueError(f"time index {self.time_index} out of range 1..{n}")

    def hamiltonian_values(self, point):
        x = as_state(point)
        return tuple(float_value(h(x)) for h in self.hamiltonians)


def flow_system(mapdesc, hamiltonians, time_index=None):
    """Flow with explicitly supplied (closed-form) Hamiltonians."""
    t_idx = mapdesc.dimension if time_index is None else time_index
    return FlowSystem(
        map=mapdesc,
        time_index=t_idx,
        hamiltonians=tuple(hamiltonians),
        det_j_field=map_det_field(mapdesc),
    )


# ---------------------------------------------------------------------------
# determinant condition


@dataclass(frozen=True)
class DetConditionReport:
    map_name: str
    time_index: int
    max_partial: float
    max_ratio: float
    passed: bool
    entries: tuple  # (point, det_j, partial) per sample


def check_det_condition(mapdesc, time_index, samples):
    """Check d(det J)/dx_time ~ 0 over the sample points.

    The derivative is taken by central differences of the determinant; a
    sample passes when |d(det J)/dx_t| <= 1e-7 * (1 + |det J|).
    """
    det_field = map_det_field(mapdesc)
    entries = []
    max_partial = 0.0
    max_ratio = 0.0
    ok = True
    for point in samples:
        x = as_state(point)
        t = time_index - 1
        h = 1e-6 * (1.0 + abs(x[t]))
        up = list(x)
        dn = list(x)
        up[t] += h
        dn[t] -= h
        d0 = float_value(det_field(x))
        partial = (float_value(det_field(up)) - float_value(det_field(dn))) / (2 * h)
        ratio = abs(partial) / (1.0 + abs(d0))
        max_partial = max(max_partial, abs(partial))
        max_ratio = max(max_ratio, ratio)
        if abs(partial) > DET_CONDITION_TOL * (1.0 + abs(d0)):
            ok = False
        entries.append((x, d0, partial))
    return DetConditionReport(
        map_name=mapdesc.name,
        time_index=time_index,
        max_partial=max_partial,
        max_ratio=max_ratio,
        passed=ok,
        entries=tuple(entries),
    )


# ---------------------------------------------------------------------------
# Hamiltonian construction


def _permuted_source(mapdesc, time_index):
    """Reorder source coordinates so the chosen time variable comes last.

    Image space is untouched.  The Jacobian determinant of the permuted
    map picks up the permutation parity automatically.
    """
    n = mapdesc.dimension
    order = [j for j in range(n) if j != time_index - 1] + [time_index - 1]
    inv_order = [0] * n
    for pos, j in enumerate(order):
        inv_order[j] = pos

    def fwd(state):
        return mapdesc.forward([state[inv_order[j]] for j in range(n)])

    def inv(state):
        src = mapdesc.inverse(state)
        return tuple(src[j] for j in order)

    return core.MapDescriptor(
        name=f"{mapdesc.name}[t=x{time_index}]",
        dimension=n,
        params=dict(mapdesc.params),
        forward_fn=fwd,
        inverse_fn=inv,
    )


def build_hamiltonians(
    mapdesc,
    ref_point=None,
    time_index=None,
    check=True,
    det_samples=None,
    seed=42,
):
    """Construct the flow system whose Hamiltonians are conserved by the map.

    The first n-2 Hamiltonians are the non-time source coordinates read
    through the inverse map.  The last one integrates the Jacobian
    determinant along the remaining source coordinate from ``ref_point``
    (all ones by default), holding the other inverse coordinates fixed;
    changing the reference point only shifts it by a constant whenever the
    determinant condition holds.

    With ``check`` enabled the construction is refused (with the sampled
    diagnostics attached) when d(det J)/dx_time is not negligible.
    """
    n = mapdesc.dimension
    t_idx = n if time_index is None else time_index
    work = mapdesc if t_idx == n else _permuted_source(mapdesc, t_idx)
    if check:
        samples = det_samples
        if samples is None:
            samples = core.sample_points(mapdesc, 25, seed=seed)
        report = check_det_condition(mapdesc, t_idx, samples)
        if not report.passed:
            raise DetConditionError(report)

    ref = (1.0,) * n if ref_point is None else as_state(ref_point)
    ref_work = tuple(ref[j] for j in range(n) if j != t_idx - 1) + (ref[t_idx - 1],)
    ref_quad = ref_work[n - 2]
    det_work = map_det_field(work)

    hams = []
    for j in range(n - 2):

        def coord_field(point, _j=j):
            return work.inverse(point)[_j]

        hams.append(coord_field)

    def quad_field(point):
        src = work.inverse(point)
        endpoint = src[n - 2]

        def integrand(u):
            s = ref_quad + u * (endpoint - ref_quad)
            inner = src[: n - 2] + (s,) + src[n - 1 :]
            return det_work(inner)

        return (endpoint - ref_quad) * integrate_gk(
            integrand, 0.0, 1.0, abs_tol=QUADRATURE_ABS_TOL
        )

    hams.append(quad_field)
    return FlowSystem(
        map=mapdesc,
        time_index=t_idx,
        hamiltonians=tuple(hams),
        det_j_field=map_det_field(mapdesc),
    )


# ---------------------------------------------------------------------------
# right-hand sides


def _bracket_components(rows, n):
    """det of (rows + [e_j]) for each j, via signed minors of the last row."""
    out = []
    for j in range(n):
        minor = [[row[k] for k in range(n) if k != j] for row in rows]
        sign = 1.0 if (n + j + 1) % 2 == 0 else -1.0
        out.append(sign * float(core.det(minor)))
    return tuple(out)


def nambu_rhs(flow, point):
    """Velocity of the image point: component j is the bracket of the
    Hamiltonians with the j-th coordinate function."""
    x = as_state(point)
    n = flow.map.dimension
    seeds = core.seed_jets(x)
    rows = []
    for h in flow.hamiltonians:
        out = h(seeds)
        if isinstance(out, Jet):
            rows.append([float(p) for p in out.partials])
        else:
            rows.append([0.0] * n)
    return _bracket_components(rows, n)


def source_rhs(flow, point):
    """Velocity of the source point whose push-forward follows the flow.

    Component j equals the bracket of the Hamiltonians (composed with the
    forward map) with the j-th source coordinate, divided by det J.  The
    non-time, non-quadrature components vanish identically and the time
    component equals one.
    """
    x = as_state(point)
    n = flow.map.dimension
    detj = float_value(flow.det_j_field(x))
    if abs(detj) <= core.GUARD_CUTOFF:
        raise SingularPointError(flow.map.name, "det J", x)
    seeds = core.seed_jets(x)
    image = flow.map.forward(seeds)
    rows = []
    for h in flow.hamiltonians:
        out = h(image)
        if isinstance(out, Jet):
            rows.append([float(p) for p in out.partials])
        else:
            rows.append([0.0] * n)
    comps = _bracket_components(rows, n)
    return tuple(c / detj for c in comps)


# ---------------------------------------------------------------------------
# integrators


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings: adaptive dopri5 (default) or fixed-step rk4."""

    method: str = "dopri5"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    step: float = 1e-3
    max_steps: int = 10**6

    def __post_init__(self):
        if self.method not in ("dopri5", "rk4"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if self.rel_tol <= 0 or self.abs_tol <= 0 or self.step <= 0:
            raise ValueError("integrator tolerances and step must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass(frozen=True)
class IntegratorStats:
    accepted: int
    rejected: int
    rhs_evals: int


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped samples of a flow and its Hamiltonian values."""

    times: tuple
    states: tuple
    ham_values: tuple
    stats: IntegratorStats

    def __post_init__(self):
        ts = self.times
        if len(ts) >= 2:
            increasing = all(b > a for a, b in zip(ts, ts[1:]))
            decreasing = all(b < a for a, b in zip(ts, ts[1:]))
            if not (increasing or decreasing):
                raise ValueError("trajectory times must be strictly monotone")

    @property
    def final_state(self):
        return self.states[-1]


# Dormand-Prince 5(4) tableau and embedded error coefficients.
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


class _Recorder:
    def __init__(self, observables):
        self.observables = tuple(observables)
        self.times = []
        self.states = []
        self.hams = []

    def add(self, t, y):
        state = tuple(float(v) for v in y)
        self.times.append(float(t))
        self.states.append(state)
        self.hams.append(tuple(float_value(obs(state)) for obs in self.observables))


def integrate(rhs, x0, t0, t1, cfg=None, t_eval=None, observables=()):
    """Integrate dy/dt = rhs(y) from t0 to t1 (either direction).

    ``rhs`` maps a state tuple to a velocity sequence.  When ``t_eval`` is
    given, samples are recorded exactly at those times (which must be
    strictly monotone from t0 towards t1); otherwise every accepted step
    is recorded.  ``observables`` are scalar fields evaluated at each
    sample and stored alongside the states.
    """
    if cfg is None:
        cfg = IntegratorConfig()
    t0 = float(t0)
    t1 = float(t1)
    if t0 == t1:
        raise ValueError("integration needs t0 != t1")
    y0 = np.array(as_state(x0), dtype=float)
    direction = 1.0 if t1 > t0 else -1.0

    targets = []
    if t_eval is not None:
        prev = t0
        for t in t_eval:
            t = float(t)
            if (t - prev) * direction < 0 or (t - t1) * direction > 0:
                raise ValueError("t_eval must run monotonically from t0 to t1")
            if t != t0:
                targets.append(t)
            prev = t
        if not targets or targets[-1] != t1:
            targets.append(t1)
    rec = _Recorder(observables)
    rec.add(t0, y0)

    evals = 0

    def f(t, y):
        nonlocal evals
        evals += 1
        return np.asarray(rhs(tuple(y)), dtype=float)

    if cfg.method == "rk4":
        accepted = _run_rk4(f, y0, t0, t1, cfg, targets, rec, direction)
        rejected = 0
    else:
        accepted, rejected = _run_dopri5(f, y0, t0, t1, cfg, targets, rec, direction)
    return Trajectory(
        times=tuple(rec.times),
        states=tuple(rec.states),
        ham_values=tuple(rec.hams),
        stats=IntegratorStats(accepted=accepted, rejected=rejected, rhs_evals=evals),
    )


def _partial_trajectory(rec):
    return Trajectory(
        times=tuple(rec.times),
        states=tuple(rec.states),
        ham_values=tuple(rec.hams),
        stats=IntegratorStats(0, 0, 0),
    )


def _run_rk4(f, y, t, t1, cfg, targets, rec, direction):
    h_base = cfg.step * direction
    queue = list(targets) if targets else []
    steps = 0
    while (t1 - t) * direction > 1e-14 * max(1.0, abs(t), abs(t1)):
        if steps >= cfg.max_steps:
            raise MaxStepsError(
                "fixed-step budget exhausted", t, tuple(y), _partial_trajectory(rec)
            )
        boundary = queue[0] if queue else t1
        h = h_base
        if (t + h - boundary) * direction > 0:
            h = boundary - t
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + h
        steps += 1
        at_boundary = queue and abs(t - queue[0]) <= 1e-12 * max(1.0, abs(t))
        if at_boundary:
            queue.pop(0)
            rec.add(t, y)
        elif not targets:
            rec.add(t, y)
    if targets and queue and rec.times[-1] != t:
        # floating point landed on t1 without consuming the last target
        rec.add(t, y)
    return steps


def _run_dopri5(f, y, t, t1, cfg, targets, rec, direction):
    span = abs(t1 - t)
    h = direction * span / 100.0
    queue = list(targets) if targets else []
    accepted = 0
    rejected = 0
    while (t1 - t) * direction > 1e-14 * max(1.0, abs(t), abs(t1)):
        if accepted + rejected >= cfg.max_steps:
            raise MaxStepsError(
                "adaptive step budget exhausted", t, tuple(y), _partial_trajectory(rec)
            )
        if abs(h) < 1e-15 * max(1.0, abs(t)):
            raise StepUnderflowError(
                "step size underflow", t, tuple(y), _partial_trajectory(rec)
            )
        boundary = queue[0] if queue else t1
        h_try = h
        clipped = False
        if (t + h_try - boundary) * direction > 0:
            h_try = boundary - t
            clipped = True

        k = [None] * 7
        k[0] = f(t, y)
        for i in range(1, 7):
            acc = y + h_try * sum(
                (_DP_A[i][j] * k[j] for j in range(i)), np.zeros_like(y)
            )
            k[i] = f(t + _DP_C[i] * h_try, acc)
        y_new = y + h_try * sum(
            (_DP_B[i] * k[i] for i in range(7)), np.zeros_like(y)
        )
        err_vec = h_try * sum(
            (_DP_E[i] * k[i] for i in range(7)), np.zeros_like(y)
        )
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale)) if y.size else 0.0

        if err <= 1.0:
            accepted += 1
            t = t + h_try
            y = y_new
            at_boundary = queue and abs(t - queue[0]) <= 1e-12 * max(1.0, abs(t))
            if at_boundary:
                queue.pop(0)
                rec.add(t, y)
            elif not targets:
                rec.add(t, y)
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h_next = h_try * factor
            if clipped:
                # the clipped step says nothing about the natural step size
                h_next = h if abs(h) > abs(h_try) else h_try * factor
            h = h_next
        else:
            rejected += 1
            h = h_try * min(1.0, max(0.2, 0.9 * err ** -0.2))
    if targets and queue and rec.times[-1] != t:
        rec.add(t, y)
    return accepted, rejected


def integrate_flow(flow, x0, t0, t1, cfg=None, t_eval=None):
    """Integrate the image-space flow, recording Hamiltonian values."""

    def rhs(state):
        return nambu_rhs(flow, state)

    return integrate(
        rhs, x0, t0, t1, cfg=cfg, t_eval=t_eval, observables=flow.hamiltonians
    )


def integrate_source(flow, x0, t0, t1, cfg=None, t_eval=None):
    """Integrate the source-space motion that pushes forward onto the flow."""

    def rhs(state):
        return source_rhs(flow, state)

    return integrate(rhs, x0, t0, t1, cfg=cfg, t_eval=t_eval)
