"""Time factors h(t) >= 0 as a closed family with exact integrals.

Every family carries its cumulative integral H(t) = int_0^t h in closed form
(the slab admissibility tests and the blow-up bounds need H free of
quadrature error) and the discounted total int_0^inf h(t) e^{-r t} dt, which
may be +inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import InvalidParameterError

__all__ = ["SourceSpec"]


@dataclass(frozen=True)
class SourceSpec:
    """One of: constant h0, exponential e^{alpha t}, power t^beta, or a
    piecewise-linear table (extended by its last value past the final node)."""

    kind: str
    h0: float = 1.0
    alpha: float = 0.0
    beta: float = 0.0
    nodes_t: tuple = ()
    nodes_h: tuple = ()
    _cumH: tuple = field(default=(), repr=False, compare=False)

    @classmethod
    def constant(cls, h0=1.0):
        if h0 < 0:
            raise InvalidParameterError(f"h0: must be >= 0, got {h0}")
        return cls(kind="constant", h0=float(h0))

    @classmethod
    def exponential(cls, alpha):
        return cls(kind="exponential", alpha=float(alpha))

    @classmethod
    def power(cls, beta):
        if beta <= -1:
            raise InvalidParameterError(f"beta: must exceed -1 for local integrability, got {beta}")
        return cls(kind="power", beta=float(beta))

    @classmethod
    def table(cls, times, values):
        t = tuple(float(x) for x in times)
        v = tuple(float(x) for x in values)
        if len(t) != len(v) or len(t) < 1:
            raise InvalidParameterError("table: need equal-length nonempty node lists")
        if t[0] != 0.0 or any(b <= a for a, b in zip(t, t[1:])):
            raise InvalidParameterError("table: node times must start at 0 and increase")
        if any(x < 0 for x in v):
            raise InvalidParameterError("table: node values must be >= 0")
        cum = [0.0]
        for (ta, ha), (tb, hb) in zip(zip(t, v), zip(t[1:], v[1:])):
            cum.append(cum[-1] + 0.5 * (ha + hb) * (tb - ta))
        return cls(kind="table", nodes_t=t, nodes_h=v, _cumH=tuple(cum))

    # -- evaluation ---------------------------------------------------------

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.full_like(t, self.h0)
        elif self.kind == "exponential":
            out = np.exp(self.alpha * t)
        elif self.kind == "power":
            with np.errstate(divide="ignore"):
                out = np.power(t, self.beta)
        else:
            out = np.interp(t, self.nodes_t, self.nodes_h)
        return float(out) if out.ndim == 0 else out

    def deriv(self, t):
        """h'(t) per family (table: segment slope, 0 past the last node)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            out = np.zeros_like(t)
        elif self.kind == "exponential":
            out = self.alpha * np.exp(self.alpha * t)
        elif self.kind == "power":
            if self.beta == 0.0:
                out = np.zeros_like(t)
            else:
                with np.errstate(divide="ignore"):
                    out = self.beta * np.power(t, self.beta - 1.0)
        else:
            ts, hs = np.asarray(self.nodes_t), np.asarray(self.nodes_h)
            slopes = np.diff(hs) / np.diff(ts)
            k = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)
            out = np.where(t >= ts[-1], 0.0, slopes[k])
        return float(out) if out.ndim == 0 else out

    def H(self, t):
        """Exact cumulative integral int_0^t h(s) ds."""
        if t < 0:
            raise InvalidParameterError(f"t: must be >= 0, got {t}")
        if self.kind == "constant":
            return self.h0 * t
        if self.kind == "exponential":
            return t if self.alpha == 0.0 else math.expm1(self.alpha * t) / self.alpha
        if self.kind == "power":
            return t ** (self.beta + 1.0) / (self.beta + 1.0)
        ts, hs, cum = self.nodes_t, self.nodes_h, self._cumH
        if t >= ts[-1]:
            return cum[-1] + hs[-1] * (t - ts[-1])
        k = int(np.searchsorted(ts, t, side="right")) - 1
        dt = t - ts[k]
        slope = (hs[k + 1] - hs[k]) / (ts[k + 1] - ts[k])
        return cum[k] + hs[k] * dt + 0.5 * slope * dt * dt

    def discounted_total(self, rate):
        """int_0^inf h(t) e^{-rate t} dt, or +inf when the integral diverges."""
        r = float(rate)
        if self.kind == "constant":
            if self.h0 == 0.0:
                return 0.0
            return self.h0 / r if r > 0 else math.inf
        if self.kind == "exponential":
            return 1.0 / (r - self.alpha) if r > self.alpha else math.inf
        if self.kind == "power":
            if r <= 0:
                return math.inf
            return math.exp(gammaln(self.beta + 1.0) - (self.beta + 1.0) * math.log(r))
        # table: exact per segment, constant tail past the last node
        ts, hs = self.nodes_t, self.nodes_h
        if r == 0:
            return math.inf if hs[-1] > 0 else self.H(ts[-1])
        if r < 0 and hs[-1] > 0:
            return math.inf
        total = 0.0
        for (ta, ha), (tb, hb) in zip(zip(ts, hs), zip(ts[1:], hs[1:])):
            slope = (hb - ha) / (tb - ta)
            # int_ta^tb (ha + slope (s - ta)) e^{-r s} ds
            ea, eb = math.exp(-r * ta), math.exp(-r * tb)
            total += (ha / r) * (ea - eb) + slope * (
                (ea - eb) / (r * r) - (tb - ta) * eb / r
            )
        if hs[-1] > 0:
            total += hs[-1] * math.exp(-r * ts[-1]) / r
        return total

    def slab_length(self, t, budget):
        """Largest s with int_t^{t+s} h <= budget (closed form where possible)."""
        if budget <= 0:
            return 0.0
        if self.kind == "constant":
            return math.inf if self.h0 == 0.0 else budget / self.h0
        if self.kind == "exponential":
            if self.alpha == 0.0:
                return budget
            z = budget * self.alpha * math.exp(-self.alpha * t)
            if self.alpha < 0 and z <= -1.0:
                return math.inf
            return math.log1p(z) / self.alpha
        if self.kind == "power":
            target = self.H(t) + budget
            return (target * (self.beta + 1.0)) ** (1.0 / (self.beta + 1.0)) - t
        # table: bisection on the exact H
        Ht = self.H(t)
        if self.nodes_h[-1] == 0.0 and max(self.H(self.nodes_t[-1]) - Ht, 0.0) <= budget:
            return math.inf
        lo, hi = 0.0, 1.0
        while self.H(t + hi) - Ht < budget and hi < 1e12:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.H(t + mid) - Ht <= budget:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * max(hi, 1.0):
                break
        return lo

    def bounded_on_slabs(self):
        """Whether h is finite at every t >= 0 (the time stepper needs this)."""
        return not (self.kind == "power" and self.beta < 0)

    def min_on(self, ta, tb, samples=17):
        """Lower bound for h on [ta, tb] (exact for the monotone families)."""
        if self.kind == "constant":
            return self.h0
        if self.kind == "exponential":
            return float(self(ta if self.alpha >= 0 else tb))
        if self.kind == "power":
            return float(self(ta if self.beta >= 0 else tb))
        ts = [ta + (tb - ta) * k / (samples - 1) for k in range(samples)]
        ts += [x for x in self.nodes_t if ta <= x <= tb]
        return min(float(self(x)) for x in ts)

    def label(self):
        if self.kind == "constant":
            return f"constant:h0={self.h0}"
        if self.kind == "exponential":
            return f"exponential:alpha={self.alpha}"
        if self.kind == "power":
            return f"power:beta={self.beta}"
        return f"table:{len(self.nodes_t)} nodes"
