"""Heat semigroup e^{t Delta}, kernel columns, and their property checks.

Propagation uses uniformization: with c >= max((degree + kill)/mu) the shifted
operator P = Delta + c I has nonnegative entries, so

    e^{t Delta} u = e^{-c t} sum_k (t^k / k!) P^k u

is a series with no cancellation for nonnegative data.  That gives strict
positivity wherever the graph reaches and keeps relative accuracy even when
fields sit hundreds of orders of magnitude below their history, which normed
error control in a Runge-Kutta stepper cannot do.  The scheme is
unconditionally stable; stiffness only raises the term count, which substeps
with t*c <= THETA keep bounded.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatchError,
    IntegrationFailureError,
    InvalidParameterError,
    UnderflowWindowError,
)
from .spectral import lambda1

__all__ = [
    "KernelColumn",
    "KernelReport",
    "DecayRate",
    "heat_apply",
    "heat_kernel_column",
    "validate_kernel",
    "kernel_decay_rate",
    "envelope_constant",
    "clear_kernel_cache",
]

THETA = 12.0  # max t*c per uniformization substep
_EXTRA_TERMS = 4  # refinement terms after the support stops spreading


class Propagator:
    """Cached uniformized propagator for one domain."""

    def __init__(self, domain):
        L = domain.laplacian()
        self.c = domain.rate_bound() * (1.0 + 1e-12)
        self.P = (L + sp.identity(domain.n, format="csr") * self.c).tocsr()
        self.n = domain.n

    def apply(self, u, t, tol=1e-12):
        """e^{t Delta} u to relative tolerance tol."""
        if t == 0.0:
            return np.array(u, dtype=float, copy=True)
        nsub = max(1, int(np.ceil(t * self.c / THETA)))
        dt = t / nsub
        tc = dt * self.c
        v = np.array(u, dtype=float, copy=True)
        hard_cap = self.n + int(10 * THETA) + 1000
        for _ in range(nsub):
            acc = v.copy()
            term = v
            k = 0
            nnz = np.count_nonzero(acc)
            since_spread = 0
            while True:
                k += 1
                term = self.P @ term
                term *= dt / k
                acc = acc + term
                new_nnz = np.count_nonzero(acc)
                since_spread = 0 if new_nnz > nnz else since_spread + 1
                nnz = new_nnz
                if k >= tc and since_spread >= _EXTRA_TERMS:
                    rho = tc / (k + 1)
                    tail = np.max(np.abs(term)) * rho / (1.0 - rho)
                    scale = np.max(np.abs(acc))
                    if tail <= tol * scale or scale == 0.0:
                        break
                if k > hard_cap:
                    raise IntegrationFailureError(
                        f"uniformization did not converge within {hard_cap} terms"
                    )
            v = acc * np.exp(-self.c * dt)
        return v


def _propagator(domain):
    if "prop" not in domain._cache:
        domain._cache["prop"] = Propagator(domain)
    return domain._cache["prop"]


def heat_apply(domain, u0, t, tol=1e-12):
    """Solve w' = Delta w, w(0) = u0, up to time t >= 0 (t = 0 returns u0)."""
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (domain.n,):
        raise DimensionMismatchError(
            f"field has shape {u0.shape}, domain has {domain.n} vertices"
        )
    if not np.all(np.isfinite(u0)):
        raise InvalidParameterError("u0: field must be finite")
    if t < 0:
        raise InvalidParameterError(f"t: must be >= 0, got {t}")
    if tol <= 0:
        raise InvalidParameterError(f"tol: must be positive, got {tol}")
    return _propagator(domain).apply(u0, t, tol)


@dataclass
class KernelColumn:
    """p(., y0, t) on a time grid, with per-time mass sum_x p(x,y0,t) mu(x)."""

    source: int
    times: np.ndarray
    values: np.ndarray  # (len(times), n)
    mass: np.ndarray
    tol: float


@dataclass
class KernelReport:
    symmetry_residual: float
    mass_max: float
    semigroup_residual: float
    positivity_min: float
    decay_slope: float
    decay_slope_target: float

    def lines(self):
        return [f"{k}={v!r}" for k, v in vars(self).items()]


@dataclass
class DecayRate:
    slope: float
    envelope_const: float
    lambda1_used: float
    window: tuple


# column checkpoints shared across calls: (domain key, y0, tol) -> {t: field}
_COLUMN_CACHE = {}
_CACHE_LOCK = threading.Lock()
_CACHE_MAX_KEYS = 64


def clear_kernel_cache():
    with _CACHE_LOCK:
        _COLUMN_CACHE.clear()


def _column_states(domain, y0, times, tol):
    """Kernel column fields at the requested times, reusing checkpoints."""
    key = (domain.key(), int(y0), f"{tol:.3e}")
    with _CACHE_LOCK:
        if key not in _COLUMN_CACHE:
            if len(_COLUMN_CACHE) >= _CACHE_MAX_KEYS:
                _COLUMN_CACHE.pop(next(iter(_COLUMN_CACHE)))
            _COLUMN_CACHE[key] = {}
        store = _COLUMN_CACHE[key]
    prop = _propagator(domain)
    delta = np.zeros(domain.n)
    delta[y0] = 1.0 / domain.mu[y0]
    out = []
    for t in times:
        t = float(t)
        if t == 0.0:
            out.append(delta.copy())
            continue
        with _CACHE_LOCK:
            if t in store:
                out.append(store[t])
                continue
            known = sorted(store)
        base_t, base = 0.0, delta
        for kt in known:
            if kt <= t:
                base_t, base = kt, store[kt]
            else:
                break
        w = prop.apply(base, t - base_t, tol)
        with _CACHE_LOCK:
            store[t] = w
        out.append(w)
    return out


def heat_kernel_column(domain, y0, times, tol=1e-12):
    """Kernel column p(., y0, t) over an increasing positive time grid.

    The column is the heat flow of the normalized point mass delta_{y0}/mu(y0);
    checkpoints are cached keyed by (domain, y0, tol) and reused across calls.
    """
    if not 0 <= y0 < domain.n:
        raise InvalidParameterError(f"y0: vertex id {y0} out of range")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise InvalidParameterError("times: need a nonempty 1-d grid")
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise InvalidParameterError("times: must be strictly increasing and positive")
    states = _column_states(domain, y0, times, tol)
    values = np.vstack(states)
    mass = values @ domain.mu
    return KernelColumn(source=int(y0), times=times, values=values, mass=mass, tol=tol)


def validate_kernel(
    domain,
    sample_vertices,
    sample_times,
    tol=1e-12,
    pairs=None,
    decay_window=(20.0, 40.0),
    decay_samples=25,
):
    """Numerical check of the kernel's structural properties over samples.

    Measures the worst symmetry defect |p(x,y,t) - p(y,x,t)|, the largest
    column mass, the worst two-time composition residual
    |p(x,y,t+s) - sum_z p(x,z,t) p(z,y,s) mu(z)|, the minimum kernel value,
    and the long-time log-slope against the spectral bottom.
    """
    samples = [int(v) for v in sample_vertices]
    sample_times = sorted(float(t) for t in sample_times)
    if not samples or not sample_times:
        raise InvalidParameterError("need nonempty sample vertices and times")
    if pairs is None:
        pairs = [(t, s) for t in sample_times for s in sample_times if t <= s]
    grid = sorted({*sample_times, *(t + s for t, s in pairs)})
    cols = {v: heat_kernel_column(domain, v, grid, tol) for v in samples}
    idx = {t: k for k, t in enumerate(grid)}

    sym = 0.0
    for a in samples:
        for b in samples:
            if a >= b:
                continue
            for t in sample_times:
                k = idx[t]
                sym = max(sym, abs(cols[a].values[k, b] - cols[b].values[k, a]))

    mass_max = max(float(cols[v].mass.max()) for v in samples)

    semi = 0.0
    mu = domain.mu
    for t, s in pairs:
        for a in samples:
            pa = cols[a].values[idx[t]]
            for b in samples:
                pb = cols[b].values[idx[s]]
                direct = cols[a].values[idx[t + s], b]
                composed = float(np.dot(pa * mu, pb))
                semi = max(semi, abs(direct - composed))

    pos_min = min(float(cols[v].values.min()) for v in samples)

    rate = kernel_decay_rate(
        domain, samples[0], samples[0], decay_window, num=decay_samples, tol=tol
    )
    return KernelReport(
        symmetry_residual=sym,
        mass_max=mass_max,
        semigroup_residual=semi,
        positivity_min=pos_min,
        decay_slope=rate.slope,
        decay_slope_target=-rate.lambda1_used,
    )


def kernel_decay_rate(domain, x, y, t_window, num=25, tol=1e-12, lam=None):
    """Least-squares slope of log p(x,y,t) over [t_a, t_b], t_b > t_a >= 1.

    Also reports the envelope constant max over the window of
    p(x,y,t) e^{lam t}, certifying p <= C e^{-lam t} there.  lam defaults to
    the domain's computed spectral bottom.
    """
    ta, tb = float(t_window[0]), float(t_window[1])
    if not (tb > ta >= 1.0):
        raise InvalidParameterError(f"t_window: need t_b > t_a >= 1, got ({ta}, {tb})")
    ts = np.linspace(ta, tb, num)
    col = heat_kernel_column(domain, y, ts, tol)
    p = col.values[:, x]
    if np.any(p <= 1e-300):
        raise UnderflowWindowError(
            f"kernel value underflows in window ({ta}, {tb}) for pair ({x}, {y})"
        )
    slope = float(np.polyfit(ts, np.log(p), 1)[0])
    if lam is None:
        lam = lambda1(domain, tol=1e-8).lambda1
    envelope = float(np.max(p * np.exp(lam * ts)))
    return DecayRate(slope=slope, envelope_const=envelope, lambda1_used=float(lam), window=(ta, tb))


def envelope_constant(domain, y0, lam, window=(1.0, 40.0), num=40, tol=1e-12):
    """max over all vertices and window times of p(x, y0, t) e^{lam t}."""
    ts = np.linspace(float(window[0]), float(window[1]), num)
    col = heat_kernel_column(domain, y0, ts, tol)
    return float(np.max(col.values * np.exp(lam * ts)[:, None]))
