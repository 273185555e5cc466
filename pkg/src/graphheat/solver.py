"""Mild solutions of u_t = Delta u + h(t) u^q by slab-wise fixed-point iteration.

On each slab [t_k, t_k + s] the Duhamel map

    (Psi u)(t) = e^{(t-t_k) Delta} u(t_k)
               + int_{t_k}^t e^{(t-s) Delta} h(s) u(s)^q ds

is iterated to its fixed point on a uniform node grid, with the integral
discretized by composite trapezoid woven through the propagator recurrence.
The slab length is chosen so that, with M = 2 ||u(t_k)||_inf, both the
invariance bound ||u(t_k)||_inf + M^q int h <= M and the contraction bound
q M^{q-1} int h <= 1/2 hold; measured contraction factors above 0.75 trigger
slab halving.  Blow-up is declared when the admissible slab collapses below
dt_min while the local reaction runaway is certified (remaining scalar
reaction time <= 64 dt_min and reaction rate dominating the diffusion drag),
or when the sup norm crosses blowup_threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .errors import (
    ContractionViolatedError,
    DimensionMismatchError,
    InvalidParameterError,
    PicardStallError,
)
from .heat import _propagator, heat_kernel_column
from .sources import SourceSpec

__all__ = [
    "Problem",
    "Trajectory",
    "SlabStat",
    "MonitorResult",
    "solve",
    "picard_slab",
    "mol_reference_solve",
    "global_bound_monitor",
    "COMPLETED",
    "BLOWUP",
    "FAILURE",
]

COMPLETED = "CompletedHorizon"
BLOWUP = "BlowupDetected"
FAILURE = "SolverFailure"

_MAX_PICARD = 60
_FACTOR_LIMIT = 0.75
# bracket allowance for the accumulated Duhamel-quadrature bias; measured
# 4.0e-5 at 16 nodes on the closed-form cycle runs, kept with 25x margin
_BRACKET_ALLOWANCE = 1e-3


@dataclass
class Problem:
    """A semilinear heat run on one truncated domain."""

    domain: object
    q: float
    h: SourceSpec
    u0: np.ndarray
    horizon: float
    tol: float = 1e-10
    blowup_threshold: float = 1e12
    dt_min: float = 1e-10
    dt_max: float = 0.25
    nodes_per_slab: int = 16
    record_dt: float | None = None

    def __post_init__(self):
        if self.q <= 1:
            raise InvalidParameterError(f"q: exponent must exceed 1, got {self.q}")
        self.u0 = np.asarray(self.u0, dtype=float)
        if self.u0.shape != (self.domain.n,):
            raise DimensionMismatchError(
                f"u0 has shape {self.u0.shape}, domain has {self.domain.n} vertices"
            )
        if not np.all(np.isfinite(self.u0)):
            raise InvalidParameterError("u0: datum must be finite")
        if np.any(self.u0 < 0):
            raise InvalidParameterError("u0: datum must be nonnegative")
        if self.horizon <= 0:
            raise InvalidParameterError(f"horizon: must be positive, got {self.horizon}")
        if self.tol <= 0 or self.dt_min <= 0 or self.dt_max <= 0:
            raise InvalidParameterError("tol, dt_min, dt_max must be positive")
        if self.nodes_per_slab < 4:
            raise InvalidParameterError("nodes_per_slab: need at least 4 nodes")
        if not self.h.bounded_on_slabs():
            raise InvalidParameterError(
                "h: time factor must be bounded on slabs (power kind needs beta >= 0)"
            )
        if self.record_dt is not None and self.record_dt <= 0:
            raise InvalidParameterError("record_dt: must be positive when given")


@dataclass
class SlabStat:
    start: float
    length: float
    iterations: int
    factor: float


@dataclass
class Trajectory:
    times: np.ndarray
    fields: np.ndarray  # (len(times), n)
    supnorm: np.ndarray
    verdict: str
    bracket: tuple | None = None
    picard_stats: list = field(default_factory=list)

    def mass(self, domain):
        return self.fields @ domain.mu

    def at(self, t):
        """Stored field at time t (exact grid match required)."""
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise InvalidParameterError(f"t={t} is not on the stored grid")
        return self.fields[k]


def _bracket_allowance(t, nodes):
    return _BRACKET_ALLOWANCE * (15.0 / (nodes - 1)) ** 2 * max(t, 1.0)


def _runaway_pad(problem, t, sup):
    """Upper bound on the remaining time to blow-up from state sup at time t.

    From v' >= -c v + h_min v^q at the maximizing vertex: once
    h_min sup^{q-1} >= 2c the remaining time is at most
    2 sup^{1-q} / ((q-1) h_min).  Returns (pad, certified).
    """
    q = problem.q
    c = problem.domain.rate_bound()
    h_now = float(problem.h(t))
    if h_now <= 0:
        return math.inf, False
    r0 = sup ** (1.0 - q) / ((q - 1.0) * h_now)
    h_min = problem.h.min_on(t, t + 4.0 * r0)
    rho = h_min * sup ** (q - 1.0)
    if rho < 4.0 * c:
        return math.inf, False
    pad = 2.0 * sup ** (1.0 - q) / ((q - 1.0) * h_min)
    return pad, True


def _picard_run(problem, u_a, t_a, slab, prop):
    """Fixed point of the Duhamel map on one slab grid.

    The integral int_{t_a}^{t_j} e^{(t_j - s) Delta} h(s) u(s)^q ds is a
    composite trapezoid woven through the propagator recurrence, sharpened by
    the Euler-Maclaurin endpoint correction -(dt^2/12)(g'(t_j) - g'(t_a))
    with g(s) = e^{(t_j-s) Delta} f(s) (interior corrections telescope away).
    The correction removes the Delta-curvature quadrature drift that
    otherwise accumulates over long runs.

    Returns (fields at the slab nodes, measured contraction factor,
    iteration count).  Raises PicardStallError when the iteration budget is
    exhausted.
    """
    m = problem.nodes_per_slab
    dtn = slab / (m - 1)
    ts = t_a + dtn * np.arange(m)
    hv = np.asarray(problem.h(ts), dtype=float)
    hdv = np.asarray(problem.h.deriv(ts), dtype=float)
    q = problem.q
    ptol = min(problem.tol * 1e-2, 1e-12)
    L = problem.domain.laplacian()
    c2 = dtn * dtn / 12.0

    base = [u_a]
    for _ in range(m - 1):
        base.append(prop.apply(base[-1], dtn, ptol))
    cur = [b.copy() for b in base]

    # g'(t_a) = f'(t_a) - Delta f(t_a) is fixed across iterations; propagate
    # it once along the slab chain
    f_a = hv[0] * u_a**q
    fp_a = hdv[0] * u_a**q + q * hv[0] * u_a ** (q - 1.0) * (L @ u_a + f_a)
    ga = fp_a - L @ f_a
    ga_chain = [ga]
    for _ in range(m - 1):
        ga_chain.append(prop.apply(ga_chain[-1], dtn, ptol))

    factor = 0.0
    prev_dist = None
    eps_floor = 50.0 * np.finfo(float).eps
    for it in range(1, _MAX_PICARD + 1):
        new = [u_a]
        integral = np.zeros_like(u_a)
        f_prev = f_a
        for j in range(1, m):
            uj = cur[j]
            f_j = hv[j] * uj**q
            integral = prop.apply(integral + 0.5 * dtn * f_prev, dtn, ptol) + 0.5 * dtn * f_j
            fp_j = hdv[j] * uj**q + q * hv[j] * uj ** (q - 1.0) * (L @ uj + f_j)
            correction = c2 * (ga_chain[j] - (fp_j - L @ f_j))
            new.append(np.maximum(base[j] + integral + correction, 0.0))
            f_prev = f_j
        dist = max(float(np.max(np.abs(new[j] - cur[j]))) for j in range(1, m))
        scale = max(float(w.max(initial=0.0)) for w in new)
        if not math.isfinite(dist) or not math.isfinite(scale):
            raise PicardStallError("iterate overflowed")
        if prev_dist is not None and prev_dist > eps_floor * scale:
            factor = max(factor, dist / prev_dist)
        cur = new
        # relative stopping: the state may legitimately sit many orders of
        # magnitude below 1 (quiescent decay) or above it (near runaway)
        if dist <= problem.tol * max(scale, 1e-300):
            return cur, factor, it
        prev_dist = dist
    raise PicardStallError(f"no fixed point in {_MAX_PICARD} iterations (dist {dist:.3e})")


def picard_slab(state, slab, problem):
    """Run the fixed-point map on one slab; the public single-slab entry point.

    slab is (t_a, t_b).  Guards: a slab whose designed contraction bound
    q M^{q-1} int h exceeds 0.9, or whose measured factor exceeds 0.75,
    raises ContractionViolatedError.
    """
    t_a, t_b = float(slab[0]), float(slab[1])
    if not t_b > t_a:
        raise InvalidParameterError(f"slab: need t_b > t_a, got ({t_a}, {t_b})")
    state = np.asarray(state, dtype=float)
    sup = float(state.max(initial=0.0))
    M = 2.0 * sup if sup > 0 else 1.0
    designed = problem.q * M ** (problem.q - 1.0) * (problem.h.H(t_b) - problem.h.H(t_a))
    if designed > 0.9:
        raise ContractionViolatedError(
            f"slab oversized: designed contraction bound {designed:.3f} > 0.9"
        )
    prop = _propagator(problem.domain)
    fields, factor, _ = _picard_run(problem, state, t_a, t_b - t_a, prop)
    if factor > _FACTOR_LIMIT:
        raise ContractionViolatedError(f"measured contraction factor {factor:.3f} > 0.75")
    return fields, factor


def solve(problem):
    """Advance the mild solution over contraction slabs until the horizon,
    blow-up detection, or failure."""
    domain = problem.domain
    prop = _propagator(domain)
    q = problem.q
    u = problem.u0.copy()
    t = 0.0
    times = [0.0]
    fields = [u.copy()]
    stats = []
    next_rec = problem.record_dt if problem.record_dt else None

    def finish(verdict, bracket=None):
        tgrid = np.asarray(times)
        return Trajectory(
            times=tgrid,
            fields=np.vstack(fields),
            supnorm=np.array([f.max(initial=0.0) for f in fields]),
            verdict=verdict,
            bracket=bracket,
            picard_stats=stats,
        )

    while t < problem.horizon * (1.0 - 1e-14):
        sup = float(u.max(initial=0.0))
        if sup == 0.0:
            # zero datum: the zero field is the (unique contraction-class) solution
            while next_rec is not None and next_rec < problem.horizon:
                times.append(next_rec)
                fields.append(u.copy())
                next_rec += problem.record_dt
            times.append(problem.horizon)
            fields.append(u.copy())
            return finish(COMPLETED)

        M = 2.0 * sup
        budget = min(
            1.0 / (2.0 * q * M ** (q - 1.0)),  # contraction <= 1/2
            (M - sup) / M**q,  # invariance of the slab ball
        )
        slab = problem.h.slab_length(t, budget)
        slab = min(slab, problem.dt_max, problem.horizon - t)
        if next_rec is not None and next_rec > t:
            slab = min(slab, next_rec - t)

        while True:
            if slab < problem.dt_min:
                pad, certified = _runaway_pad(problem, t, sup)
                r_est = (
                    sup ** (1.0 - q) / ((q - 1.0) * max(float(problem.h(t)), 1e-300))
                )
                if certified and r_est <= 64.0 * problem.dt_min:
                    allow = _bracket_allowance(t, problem.nodes_per_slab)
                    hi = t + pad + 64.0 * problem.dt_min + allow
                    return finish(BLOWUP, bracket=(max(t - allow, 0.0), hi))
                return finish(FAILURE)
            try:
                slab_fields, factor, iters = _picard_run(problem, u, t, slab, prop)
            except PicardStallError:
                slab *= 0.5
                continue
            if factor > _FACTOR_LIMIT:
                slab *= 0.5
                continue
            break

        u = slab_fields[-1]
        t_new = t + slab
        if next_rec is not None and abs(t_new - next_rec) <= 1e-12 * max(1.0, next_rec):
            t_new = next_rec
            next_rec += problem.record_dt
        if abs(t_new - problem.horizon) <= 1e-12 * max(1.0, problem.horizon):
            t_new = problem.horizon
        stats.append(SlabStat(start=t, length=t_new - t, iterations=iters, factor=factor))
        t = t_new
        times.append(t)
        fields.append(u.copy())

        sup = float(u.max(initial=0.0))
        if sup >= problem.blowup_threshold:
            pad, certified = _runaway_pad(problem, t, sup)
            if certified:
                allow = _bracket_allowance(t, problem.nodes_per_slab)
                hi = t + pad + 64.0 * problem.dt_min + allow
                return finish(BLOWUP, bracket=(max(t - allow, 0.0), hi))
            return finish(FAILURE)

    return finish(COMPLETED)


def mol_reference_solve(problem, rtol=None, atol=None):
    """Independent method-of-lines reference: stiff integration of the vertex
    ODE system u' = L u + h(t) u^q with the same verdict semantics.

    Used only for cross-validation of solve(); shares no discretization with
    the slab fixed-point path.
    """
    domain = problem.domain
    L = domain.laplacian().tocsc()
    q = problem.q
    h = problem.h
    n = domain.n
    if rtol is None:
        rtol = max(min(problem.tol, 1e-8), 1e-12)
    if atol is None:
        atol = 1e-30 * max(1.0, float(problem.u0.max(initial=0.0)))
    cap = problem.blowup_threshold

    def rhs(t, u):
        up = np.maximum(u, 0.0)
        return L @ u + float(h(t)) * up**q

    def jac(t, u):
        up = np.maximum(u, 0.0)
        return L + sp.diags(q * float(h(t)) * up ** (q - 1.0))

    def hit_cap(t, u):
        return math.log(max(float(np.max(u)), 1e-300)) - math.log(cap)

    hit_cap.terminal = True
    hit_cap.direction = 1

    t_eval = None
    if problem.record_dt:
        t_eval = np.arange(0.0, problem.horizon + 0.5 * problem.record_dt, problem.record_dt)
        t_eval[-1] = min(t_eval[-1], problem.horizon)

    sol = solve_ivp(
        rhs,
        (0.0, problem.horizon),
        problem.u0.astype(float),
        method="BDF",
        jac=jac,
        rtol=rtol,
        atol=atol,
        t_eval=t_eval,
        events=hit_cap,
        dense_output=False,
    )
    fields = sol.y.T.copy()
    times = sol.t.copy()
    sups = np.max(fields, axis=1, initial=0.0) if fields.size else np.zeros(0)

    def finish(verdict, bracket=None):
        return Trajectory(
            times=times,
            fields=fields,
            supnorm=sups,
            verdict=verdict,
            bracket=bracket,
            picard_stats=[],
        )

    if sol.t_events[0].size:
        te = float(sol.t_events[0][0])
        ue = float(np.max(sol.y_events[0][0]))
        pad, certified = _runaway_pad(problem, te, ue)
        if certified:
            allow = 1e-3 * max(te, 1.0)
            return finish(BLOWUP, bracket=(max(te - allow, 0.0), te + pad + allow))
        return finish(FAILURE)
    if sol.status == 0:
        return finish(COMPLETED)
    # integrator died mid-run: certify a runaway or report failure
    if times.size:
        te, ue = float(times[-1]), float(sups[-1])
        pad, certified = _runaway_pad(problem, te, ue)
        if certified:
            allow = 1e-3 * max(te, 1.0)
            return finish(BLOWUP, bracket=(max(te - allow, 0.0), te + pad + allow))
    return finish(FAILURE)


@dataclass
class MonitorResult:
    times: np.ndarray
    ratios: np.ndarray
    bound: float
    ok: bool


def global_bound_monitor(trajectory, domain, y0, gamma, M, tol=1e-12):
    """Per-time ratio sup_x u(x,t) / p(x, y0, t + gamma) against the bound M.

    ok is True when the kernel envelope held at every stored time.
    """
    if gamma <= 0:
        raise InvalidParameterError(f"gamma: must be positive, got {gamma}")
    times = np.asarray(trajectory.times, dtype=float)
    col = heat_kernel_column(domain, y0, times + gamma, tol)
    ratios = np.max(trajectory.fields / col.values, axis=1)
    ok = bool(np.all(ratios <= M * (1.0 + 1e-12)))
    return MonitorResult(times=times, ratios=ratios, bound=float(M), ok=ok)
