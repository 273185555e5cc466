"""Blow-up machinery: the kernel-weighted mass functional, the two key
bounds, the divergence criterion, and the global-existence certificate.

The functional Phi_x^T(t) = sum_z p(x,z,T-t) u(z,t) mu(z) obeys
Phi' >= h(t) Phi^q for nonnegative solutions (Jensen; the inequality
survives sub-stochastic truncations since column mass <= 1), which yields an
upper bound on any blow-up time from the datum alone.  The certificate
searches the constants (delta, M, epsilon) making the weighted-supremum
contraction argument go through, so a granted certificate implies a global
solution enveloped by M p(., y0, t + gamma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConsistencyError,
    GridMismatchError,
    InvalidParameterError,
    NoBoundInHorizonError,
    WindowTooShortError,
)
from .heat import envelope_constant, heat_apply, heat_kernel_column
from .spectral import lambda1 as _lambda1

__all__ = [
    "PhiSeries",
    "Certificate",
    "LowerBoundCheck",
    "CriterionResult",
    "cumulative_H",
    "H_tilde",
    "phi_series",
    "phi_ode_check",
    "lemma2_blowup_time_bound",
    "lemma1_lower_bound_check",
    "theorem1_criterion",
    "theorem2_certificate",
]

CERT_CHECKS = (
    "datum_sup_bound",  # ||u0||_inf < delta
    "envelope_ratio",  # M <= delta / C
    "discounted_source_small",  # delta^{q-1} Htilde < 1
    "contraction_margin",  # q delta^{q-1} Htilde < 1
    "epsilon_window",  # 0 < eps < M (1 - delta^{q-1} Htilde)
    "datum_kernel_bound",  # 0 <= u0 <= eps p(., y0, gamma)
)


def cumulative_H(h, t):
    """H(t) = int_0^t h(s) ds, exact per source family."""
    return h.H(t)


def H_tilde(h, lam, q):
    """Discounted source total int_0^inf h(t) e^{-lam (q-1) t} dt (may be +inf)."""
    if lam <= 0:
        raise InvalidParameterError(f"lam: need a positive spectral bottom, got {lam}")
    if q <= 1:
        raise InvalidParameterError(f"q: exponent must exceed 1, got {q}")
    return h.discounted_total(lam * (q - 1.0))


@dataclass
class PhiSeries:
    """Kernel-weighted mass of a trajectory against a terminal-time kernel."""

    x: int
    T: float
    times: np.ndarray
    values: np.ndarray
    H_values: np.ndarray | None
    endpoint_residual: float


def phi_series(trajectory, domain, x, T, h=None, tol=1e-12):
    """Phi_x(t) = sum_z p(x,z,T-t) u(z,t) mu(z) on the trajectory grid in [0,T].

    The identity Phi_x(0) = (e^{T Delta} u0)(x) is verified to 1e-6 relative
    (two independent code paths) and its residual stored.
    """
    times = np.asarray(trajectory.times, dtype=float)
    iT = int(np.argmin(np.abs(times - T)))
    if abs(times[iT] - T) > 1e-9 * max(1.0, T):
        raise GridMismatchError(f"T={T} is not on the trajectory grid")
    times = times[: iT + 1]
    rev = T - times  # decreasing, last entry 0
    pos = rev[rev > 0]
    col = heat_kernel_column(domain, x, np.sort(pos), tol)
    lookup = {float(t): col.values[k] for k, t in enumerate(col.times)}
    delta = np.zeros(domain.n)
    delta[x] = 1.0 / domain.mu[x]
    mu = domain.mu
    vals = np.empty(len(times))
    for k, t in enumerate(times):
        p = lookup[float(rev[k])] if rev[k] > 0 else delta
        vals[k] = float(np.dot(p * mu, trajectory.fields[k]))

    direct = float(heat_apply(domain, trajectory.fields[0], T, tol)[x])
    scale = max(abs(direct), 1e-300)
    resid = abs(vals[0] - direct) / scale
    if resid > 1e-6:
        raise ConsistencyError(
            f"endpoint identity failed: Phi(0)={vals[0]!r} vs semigroup {direct!r} "
            f"(relative {resid:.3e})"
        )
    Hv = None if h is None else np.array([h.H(t) for t in times])
    return PhiSeries(
        x=int(x), T=float(T), times=times, values=vals, H_values=Hv, endpoint_residual=resid
    )


def phi_ode_check(series, h, q):
    """Max signed violation of Phi' >= h Phi^q on a uniform grid.

    Positive return = the differential inequality failed by that much
    somewhere; values at or below the quadrature tolerance are expected.
    """
    t = series.times
    if len(t) < 3:
        raise WindowTooShortError("need at least 3 grid points")
    dt = np.diff(t)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * dt[0]:
        raise InvalidParameterError("phi_ode_check requires a uniform grid")
    dt = float(dt[0])
    v = series.values
    dv = np.empty_like(v)
    dv[1:-1] = (v[2:] - v[:-2]) / (2.0 * dt)
    dv[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt)
    dv[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dt)
    rhs = np.asarray(h(t)) * v**q
    return float(np.max(rhs - dv))


class _FlowCache:
    """Checkpointed evaluations of t -> e^{t Delta} u0 for repeated queries."""

    def __init__(self, domain, u0, tol=1e-12):
        from .heat import _propagator

        self.prop = _propagator(domain)
        self.tol = tol
        self.states = [(0.0, np.asarray(u0, dtype=float))]

    def at(self, t):
        base_t, base = self.states[0]
        for bt, bu in self.states:
            if bt <= t:
                base_t, base = bt, bu
            else:
                break
        if t == base_t:
            return base
        w = self.prop.apply(base, t - base_t, self.tol)
        self.states.append((t, w))
        self.states.sort(key=lambda p: p[0])
        return w


def lemma2_blowup_time_bound(u0, domain, x, q, h, search_cap=2000.0, rel_tol=1e-6):
    """Smallest T with (q-1) H(T) [(e^{T Delta} u0)(x)]^{q-1} >= 1.

    Any solution from u0 must blow up at or before the returned time.  x may
    be one probe vertex or a sequence; the bound is minimized over probes.
    Raises NoBoundInHorizonError when the product never reaches 1 before
    search_cap.
    """
    u0 = np.asarray(u0, dtype=float)
    if not (np.any(u0 > 0) and np.all(u0 >= 0)):
        raise InvalidParameterError("u0: need a nonnegative, not identically zero datum")
    probes = [int(x)] if np.isscalar(x) else [int(v) for v in x]
    flow = _FlowCache(domain, u0)

    def g(T, probe):
        val = float(flow.at(T)[probe])
        return (q - 1.0) * h.H(T) * val ** (q - 1.0) - 1.0

    best = None
    for probe in probes:
        lo, hi = 0.0, None
        T = 1.0 / 64.0
        while T <= search_cap:
            if g(T, probe) >= 0.0:
                hi = T
                break
            lo = T
            T *= 2.0
        if hi is None:
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid, probe) >= 0.0:
                hi = mid
            else:
                lo = mid
            if hi - lo <= rel_tol * hi:
                break
        best = hi if best is None else min(best, hi)
    if best is None:
        raise NoBoundInHorizonError(
            f"(q-1) H(T) ((e^(T Delta) u0)(x))^(q-1) stays below 1 up to T={search_cap}"
        )
    return best


@dataclass
class LowerBoundCheck:
    t0: float | None
    C1: float
    verdict: bool
    lambda1_used: float


def lemma1_lower_bound_check(domain, u0, x0, eps, t_grid, lam=None, tol=1e-12):
    """Check (e^{t Delta} u0)(x0) >= C1 e^{-(lam + eps) t} for all grid t past
    some t0, with C1 = u0(x0) mu(x0).

    Returns the smallest such grid t0 (None when the tail never stabilizes).
    eps must lie in (0, lam) when lam is meaningfully positive; on a
    zero-bottom domain any positive eps is accepted.
    """
    u0 = np.asarray(u0, dtype=float)
    if u0[x0] <= 0:
        raise InvalidParameterError(f"u0: need u0(x0) > 0 at probe {x0}")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2:
        raise WindowTooShortError("t_grid: need at least 2 increasing times")
    if np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise InvalidParameterError("t_grid: must be nonnegative and increasing")
    if lam is None:
        lam = _lambda1(domain, tol=1e-8).lambda1
    if eps <= 0:
        raise InvalidParameterError(f"eps: must be positive, got {eps}")
    if lam > 1e-8 and eps >= lam:
        raise InvalidParameterError(f"eps: must lie in (0, lambda1={lam!r}), got {eps}")

    C1 = float(u0[x0] * domain.mu[x0])
    flow = _FlowCache(domain, u0, tol)
    vals = np.array([float(flow.at(t)[x0]) for t in t_grid])
    ok = vals >= C1 * np.exp(-(lam + eps) * t_grid)
    if not ok[-1]:
        return LowerBoundCheck(t0=None, C1=C1, verdict=False, lambda1_used=float(lam))
    bad = np.nonzero(~ok)[0]
    start = int(bad[-1]) + 1 if bad.size else 0
    return LowerBoundCheck(
        t0=float(t_grid[start]), C1=C1, verdict=True, lambda1_used=float(lam)
    )


@dataclass
class CriterionResult:
    verdict: str  # "Diverges" | "Converges" | "Inconclusive"
    eps: float | None
    growth_rate: float  # asymptotic slope of log H^{1/(q-1)}
    lambda1_used: float


def theorem1_criterion(h, q, lam, eps_grid=None, margin=1e-3):
    """Decide whether H(t)^{1/(q-1)} outgrows e^{(lam + eps) t} for some eps.

    Sweeps eps over a grid in (0, lam) (default lam * {1/8, 1/4, 1/2, 3/4});
    'Diverges' comes with the largest witnessing eps.  Slopes within `margin`
    of the threshold are Inconclusive.
    """
    if lam <= 0:
        raise InvalidParameterError(f"lam: need a positive spectral bottom, got {lam}")
    if q <= 1:
        raise InvalidParameterError(f"q: exponent must exceed 1, got {q}")
    if eps_grid is None:
        eps_grid = [lam / 8.0, lam / 4.0, lam / 2.0, 3.0 * lam / 4.0]
    eps_grid = sorted(float(e) for e in eps_grid)
    if any(not 0 < e < lam for e in eps_grid):
        raise InvalidParameterError("eps_grid: entries must lie in (0, lam)")

    if h.kind == "exponential":
        slope = h.alpha / (q - 1.0)
    elif h.kind in ("constant", "power"):
        slope = 0.0  # polynomial H loses to any exponential
    else:
        t1 = max(20.0, 2.0 * h.nodes_t[-1])
        t2 = 2.0 * t1
        H1, H2 = h.H(t1), h.H(t2)
        if H2 <= 0:
            slope = -math.inf
        else:
            slope = (math.log(H2) - math.log(max(H1, 1e-300))) / ((t2 - t1) * (q - 1.0))

    margins = [slope - (lam + e) for e in eps_grid]
    best = max(margins)
    if best > margin:
        witness = max(e for e, m in zip(eps_grid, margins) if m > margin)
        return CriterionResult("Diverges", witness, slope, float(lam))
    if best < -margin:
        return CriterionResult("Converges", None, slope, float(lam))
    return CriterionResult("Inconclusive", None, slope, float(lam))


@dataclass
class Certificate:
    """Witness (or refutation) for the small-data global existence argument."""

    delta: float
    M: float
    epsilon: float
    gamma: float
    y0: int
    Htilde: float
    lambda1: float
    envelope_const: float
    checks: list = field(default_factory=list)  # (name, passed, detail)
    granted: bool = False
    first_failing: str | None = None

    def check_map(self):
        return {name: ok for name, ok, _ in self.checks}


def _evaluate_delta(delta, sup0, q, Ht, C, eps_min, datum_ok):
    """Run the ordered certificate checks for one candidate delta."""
    M = delta / C
    dq = delta ** (q - 1.0) * Ht if math.isfinite(Ht) else math.inf
    eps_cap = M * (1.0 - dq) if dq < 1.0 else 0.0
    eps = eps_cap * (1.0 - 1e-9)
    checks = [
        ("datum_sup_bound", sup0 < delta, f"||u0||={sup0!r} < delta={delta!r}"),
        ("envelope_ratio", True, f"M=delta/C={M!r}"),
        ("discounted_source_small", dq < 1.0, f"delta^(q-1) Htilde={dq!r}"),
        ("contraction_margin", q * dq < 1.0, f"q delta^(q-1) Htilde={q * dq!r}"),
        ("epsilon_window", eps > 0.0, f"eps={eps!r} in (0, {eps_cap!r})"),
        (
            "datum_kernel_bound",
            datum_ok and eps_min <= eps,
            f"needs eps >= {eps_min!r}, allowed {eps!r}",
        ),
    ]
    return checks, M, eps


def theorem2_certificate(
    domain,
    u0,
    q,
    h,
    gamma=1.0,
    y0=None,
    lam=None,
    tol=1e-12,
    delta_grid=25,
    envelope_window=(1.0, 40.0),
):
    """Search (delta, M, epsilon) certifying global existence for the datum.

    The envelope constant C is measured from the kernel column at y0 over
    envelope_window with the supplied (or computed) spectral bottom; M is set
    to delta/C and epsilon to the largest value below M(1 - delta^{q-1} Ht)
    that still dominates the pointwise datum ratio.  delta is scanned on a
    log grid below the contraction margin, largest first; refutation names
    the first failing check of the best candidate.
    """
    if q <= 1:
        raise InvalidParameterError(f"q: exponent must exceed 1, got {q}")
    if gamma <= 0:
        raise InvalidParameterError(f"gamma: must be positive, got {gamma}")
    u0 = np.asarray(u0, dtype=float)
    if y0 is None:
        y0 = domain.origin
    if lam is None:
        lam = _lambda1(domain, tol=1e-8).lambda1
    if lam <= 0:
        raise InvalidParameterError(
            f"lambda1: certificate needs a positive spectral bottom, got {lam!r}"
        )

    Ht = H_tilde(h, lam, q)
    C = envelope_constant(domain, y0, lam, window=envelope_window, tol=tol)
    pcol = heat_kernel_column(domain, y0, [gamma], tol).values[0]
    datum_ok = bool(np.all(u0 >= 0))
    eps_min = float(np.max(u0 / pcol)) if datum_ok else math.inf
    sup0 = float(u0.max(initial=0.0))

    if math.isfinite(Ht) and Ht > 0:
        delta_cap = (1.0 / (q * Ht)) ** (1.0 / (q - 1.0)) * (1.0 - 1e-9)
    else:
        delta_cap = max(1.0, 2.0 * sup0)
    delta_lo = max(sup0 * (1.0 + 1e-9), delta_cap * 1e-8)
    if delta_lo >= delta_cap:
        candidates = [delta_cap]
    else:
        candidates = list(np.geomspace(delta_lo, delta_cap, delta_grid))
    candidates = sorted(set(candidates), reverse=True)

    best = None  # (passed prefix length, checks, M, eps, delta)
    for delta in candidates:
        checks, M, eps = _evaluate_delta(delta, sup0, q, Ht, C, eps_min, datum_ok)
        prefix = 0
        for _, ok, _ in checks:
            if not ok:
                break
            prefix += 1
        if prefix == len(checks):
            return Certificate(
                delta=float(delta),
                M=float(M),
                epsilon=float(eps),
                gamma=float(gamma),
                y0=int(y0),
                Htilde=float(Ht),
                lambda1=float(lam),
                envelope_const=float(C),
                checks=checks,
                granted=True,
                first_failing=None,
            )
        if best is None or prefix > best[0]:
            best = (prefix, checks, M, eps, delta)

    prefix, checks, M, eps, delta = best
    failing = checks[prefix][0]
    return Certificate(
        delta=float(delta),
        M=float(M),
        epsilon=float(eps),
        gamma=float(gamma),
        y0=int(y0),
        Htilde=float(Ht),
        lambda1=float(lam),
        envelope_const=float(C),
        checks=checks,
        granted=False,
        first_failing=failing,
    )
