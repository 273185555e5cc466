"""Weighted graphs, Dirichlet truncations, generators, and text-format I/O.

A weighted graph is a finite vertex set with a positive vertex measure mu and
symmetric positive edge weights (no self loops, connected).  A truncated
domain wraps such a graph with a per-vertex killing weight that accounts for
edges into the removed exterior of a larger graph, so the interior operator
is exactly the restriction of the big graph's Laplacian under extension by
zero.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (
    DisconnectedError,
    DuplicateEdgeError,
    InvalidParameterError,
    NonPositiveMeasureError,
    NonPositiveWeightError,
    ParseError,
    SelfLoopError,
)

__all__ = [
    "WeightedGraph",
    "TruncatedDomain",
    "FamilySpec",
    "build_graph",
    "gen_tree_ball",
    "gen_lattice_box",
    "gen_cycle",
    "save_graph",
    "load_graph",
]


class WeightedGraph:
    """Validated weighted graph. Immutable after construction.

    Attributes
    ----------
    n : vertex count
    mu : (n,) positive vertex measure
    edges : (m, 2) int array with i < j, one row per unordered pair
    weights : (m,) positive edge weights
    adjacency : symmetric CSR matrix of weights (derived; sorted indices)
    """

    def __init__(self, n, mu, edges, weights):
        self.n = int(n)
        self.mu = np.ascontiguousarray(mu, dtype=float)
        self.edges = np.ascontiguousarray(edges, dtype=np.int64).reshape(-1, 2)
        self.weights = np.ascontiguousarray(weights, dtype=float)
        i, j, w = self.edges[:, 0], self.edges[:, 1], self.weights
        adj = sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(self.n, self.n),
        ).tocsr()
        adj.sort_indices()
        self.adjacency = adj
        self.degree = np.asarray(adj.sum(axis=1)).ravel()
        for arr in (self.mu, self.edges, self.weights):
            arr.setflags(write=False)

    def neighbors(self, x):
        """Sorted neighbor ids and weights of vertex x."""
        lo, hi = self.adjacency.indptr[x], self.adjacency.indptr[x + 1]
        return self.adjacency.indices[lo:hi], self.adjacency.data[lo:hi]

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, m={len(self.weights)})"


class TruncatedDomain:
    """A weighted graph plus Dirichlet killing weights toward a removed exterior.

    kill(x) is the total weight of edges from x into the exterior; origin is
    the designated root vertex; radius is the truncation radius when the
    domain came from a ball generator (None otherwise).
    """

    def __init__(self, graph, kill=None, origin=0, radius=None):
        self.graph = graph
        n = graph.n
        if kill is None:
            kill = np.zeros(n)
        self.kill = np.ascontiguousarray(kill, dtype=float)
        if self.kill.shape != (n,):
            raise InvalidParameterError(f"kill: expected length {n}, got {self.kill.shape}")
        if np.any(self.kill < 0):
            raise InvalidParameterError("kill: killing weights must be nonnegative")
        if not 0 <= origin < n:
            raise InvalidParameterError(f"origin: vertex id {origin} out of range")
        self.origin = int(origin)
        self.radius = None if radius is None else int(radius)
        self.kill.setflags(write=False)
        self._cache = {}

    @property
    def n(self):
        return self.graph.n

    @property
    def mu(self):
        return self.graph.mu

    def laplacian(self):
        """CSR matrix L with (L f)(x) = (1/mu) [ sum_y w(x,y)(f(y)-f(x)) - kill(x) f(x) ]."""
        if "lap" not in self._cache:
            g = self.graph
            diag = (g.degree + self.kill) / g.mu
            L = sp.diags(1.0 / g.mu) @ g.adjacency - sp.diags(diag)
            self._cache["lap"] = L.tocsr()
        return self._cache["lap"]

    def rate_bound(self):
        """max over x of (degree + kill)/mu; uniformization rate of -Delta."""
        if "rate" not in self._cache:
            g = self.graph
            self._cache["rate"] = float(np.max((g.degree + self.kill) / g.mu))
        return self._cache["rate"]

    def symmetrized_neg_laplacian(self):
        """A = M^{1/2} (-Delta) M^{-1/2}, symmetric PSD on the counting space."""
        if "sym" not in self._cache:
            g = self.graph
            s = 1.0 / np.sqrt(g.mu)
            A = sp.diags((g.degree + self.kill) / g.mu) - sp.diags(s) @ g.adjacency @ sp.diags(s)
            self._cache["sym"] = A.tocsr()
        return self._cache["sym"]

    def key(self):
        """Content hash usable as a cache key (stable across processes)."""
        if "key" not in self._cache:
            h = hashlib.sha256(serialize_graph(self).encode()).hexdigest()
            self._cache["key"] = h
        return self._cache["key"]

    def __eq__(self, other):
        if not isinstance(other, TruncatedDomain):
            return NotImplemented
        return (
            self.graph == other.graph
            and np.array_equal(self.kill, other.kill)
            and self.origin == other.origin
        )

    def __repr__(self):
        return (
            f"TruncatedDomain(n={self.n}, origin={self.origin}, "
            f"radius={self.radius}, killed={int(np.count_nonzero(self.kill))})"
        )


def build_graph(n, mu, edges):
    """Validate and build a WeightedGraph from raw lists.

    edges is an iterable of (i, j, omega).  Raises the error naming the first
    violated axiom: SelfLoopError, NonPositiveWeightError,
    NonPositiveMeasureError, DuplicateEdgeError, DisconnectedError.
    """
    n = int(n)
    if n < 2:
        raise InvalidParameterError(f"n: need at least 2 vertices, got {n}")
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (n,):
        raise InvalidParameterError(f"mu: expected {n} values, got shape {mu.shape}")
    if not np.all(np.isfinite(mu)):
        raise NonPositiveMeasureError("mu: measures must be finite")
    bad = np.nonzero(mu <= 0)[0]
    if bad.size:
        raise NonPositiveMeasureError(f"mu: non-positive measure at vertex {bad[0]}")

    seen = {}
    rows = []
    for k, (i, j, w) in enumerate(edges):
        i, j, w = int(i), int(j), float(w)
        if not (0 <= i < n and 0 <= j < n):
            raise InvalidParameterError(f"edges[{k}]: vertex id out of range: ({i}, {j})")
        if i == j:
            raise SelfLoopError(f"edges[{k}]: self loop at vertex {i}")
        if not (w > 0 and np.isfinite(w)):
            raise NonPositiveWeightError(f"edges[{k}]: weight {w!r} for edge ({i}, {j})")
        a, b = (i, j) if i < j else (j, i)
        if (a, b) in seen:
            raise DuplicateEdgeError(
                f"edges[{k}]: pair ({a}, {b}) already given with weight {seen[(a, b)]!r}"
            )
        seen[(a, b)] = w
        rows.append((a, b, w))
    if not rows:
        raise DisconnectedError("graph has no edges")

    rows.sort()
    earr = np.array([(a, b) for a, b, _ in rows], dtype=np.int64)
    warr = np.array([w for _, _, w in rows], dtype=float)
    g = WeightedGraph(n, mu, earr, warr)

    if np.any(g.degree <= 0):
        iso = int(np.nonzero(g.degree <= 0)[0][0])
        raise DisconnectedError(f"vertex {iso} is isolated")
    # BFS from 0 over the CSR structure
    reached = np.zeros(n, dtype=bool)
    reached[0] = True
    queue = deque([0])
    while queue:
        x = queue.popleft()
        for y in g.neighbors(x)[0]:
            if not reached[y]:
                reached[y] = True
                queue.append(y)
    if not reached.all():
        miss = int(np.nonzero(~reached)[0][0])
        raise DisconnectedError(f"vertex {miss} unreachable from vertex 0")
    return g


def gen_tree_ball(d, radius, mu_mode="unit"):
    """Ball of the infinite d-regular tree, unit edge weights, Dirichlet boundary.

    Vertex ids in BFS order from the root (origin 0); children of a vertex are
    assigned consecutive ids.  Leaves at the truncation radius carry
    kill = d - 1 (unit weights toward their removed children).  mu_mode
    'unit' sets mu = 1, 'degree' sets mu = d (the full-tree degree).
    """
    if d < 3:
        raise InvalidParameterError(f"d: branching degree must be >= 3, got {d}")
    if radius < 1:
        raise InvalidParameterError(f"radius: must be >= 1, got {radius}")
    if mu_mode not in ("unit", "degree"):
        raise InvalidParameterError(f"mu_mode: expected 'unit' or 'degree', got {mu_mode!r}")

    edges = []
    levels = [0]
    frontier = [0]
    nid = 1
    for lev in range(1, radius + 1):
        nxt = []
        for parent in frontier:
            for _ in range(d if parent == 0 else d - 1):
                edges.append((parent, nid, 1.0))
                levels.append(lev)
                nxt.append(nid)
                nid += 1
        frontier = nxt
    n = nid
    mu = np.full(n, float(d) if mu_mode == "degree" else 1.0)
    g = build_graph(n, mu, edges)
    kill = np.zeros(n)
    kill[np.asarray(levels) == radius] = float(d - 1)
    return TruncatedDomain(g, kill, origin=0, radius=radius)


def gen_lattice_box(dim, radius):
    """Integer-lattice box [-R, R]^dim, nearest-neighbor unit weights, mu = 1.

    Ids in BFS order from the center (origin 0); boundary vertices carry one
    unit of killing per removed exterior neighbor.
    """
    if dim not in (1, 2):
        raise InvalidParameterError(f"dim: expected 1 or 2, got {dim}")
    if radius < 1:
        raise InvalidParameterError(f"radius: must be >= 1, got {radius}")

    if dim == 1:
        offsets = [(-1,), (1,)]
        center = (0,)
    else:
        offsets = [(-1, 0), (0, -1), (0, 1), (1, 0)]
        center = (0, 0)

    inside = lambda p: all(-radius <= c <= radius for c in p)
    ids = {center: 0}
    order = [center]
    queue = deque([center])
    while queue:
        p = queue.popleft()
        for off in offsets:
            q = tuple(a + b for a, b in zip(p, off))
            if inside(q) and q not in ids:
                ids[q] = len(order)
                order.append(q)
                queue.append(q)
    n = len(order)

    edges = []
    kill = np.zeros(n)
    for p in order:
        for off in offsets:
            q = tuple(a + b for a, b in zip(p, off))
            if inside(q):
                if ids[p] < ids[q]:
                    edges.append((ids[p], ids[q], 1.0))
            else:
                kill[ids[p]] += 1.0
    g = build_graph(n, np.ones(n), edges)
    return TruncatedDomain(g, kill, origin=0, radius=radius)


def gen_cycle(n):
    """Cycle on n >= 3 vertices, unit weights and measure, no killing."""
    if n < 3:
        raise InvalidParameterError(f"n: cycle needs >= 3 vertices, got {n}")
    edges = [(i, i + 1, 1.0) for i in range(n - 1)] + [(0, n - 1, 1.0)]
    g = build_graph(n, np.ones(n), edges)
    return TruncatedDomain(g, origin=0, radius=None)


def serialize_graph(domain):
    """Canonical text form of a domain (also the content-hash preimage)."""
    g = domain.graph
    lines = []
    for x in range(g.n):
        lines.append(f"v {x} {g.mu[x]!r}")
    for (i, j), w in zip(g.edges, g.weights):
        lines.append(f"e {i} {j} {w!r}")
    for x in np.nonzero(domain.kill)[0]:
        lines.append(f"k {x} {domain.kill[x]!r}")
    lines.append(f"o {domain.origin}")
    return "\n".join(lines) + "\n"


def save_graph(domain, path):
    """Write a domain in the line-oriented text format (decimal round-trip exact)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(serialize_graph(domain))


def load_graph(path):
    """Parse a domain from the text format; ParseError carries the line number.

    Records: 'v <id> <mu>', 'e <i> <j> <omega>', optional 'k <id> <kill>',
    optional 'o <origin>'; '#' starts a comment.  Vertex ids must be dense
    0..n-1.
    """
    mus = {}
    edges = []
    kills = {}
    origin = 0
    with open(path, encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "v":
                    vid, m = int(parts[1]), float(parts[2])
                    if vid in mus:
                        raise ParseError(f"duplicate vertex id {vid}", lineno)
                    mus[vid] = m
                elif tag == "e":
                    edges.append((lineno, int(parts[1]), int(parts[2]), float(parts[3])))
                elif tag == "k":
                    kills[int(parts[1])] = float(parts[2])
                elif tag == "o":
                    origin = int(parts[1])
                else:
                    raise ParseError(f"unknown record type {tag!r}", lineno)
            except ParseError:
                raise
            except (IndexError, ValueError) as exc:
                raise ParseError(f"malformed {tag!r} record: {exc}", lineno) from exc

    n = len(mus)
    if n == 0:
        raise ParseError("no vertex records", None)
    if sorted(mus) != list(range(n)):
        raise ParseError("vertex ids are not dense 0..n-1", None)
    mu = np.array([mus[x] for x in range(n)])

    try:
        g = build_graph(n, mu, [(i, j, w) for _, i, j, w in edges])
    except (SelfLoopError, NonPositiveWeightError, DuplicateEdgeError, InvalidParameterError) as exc:
        # locate the offending edge line for the report
        lineno = _find_edge_line(edges, exc)
        raise type(exc)(f"line {lineno}: {exc}") from exc

    kill = np.zeros(n)
    for vid, kv in kills.items():
        if not 0 <= vid < n:
            raise ParseError(f"kill record for unknown vertex {vid}", None)
        kill[vid] = kv
    return TruncatedDomain(g, kill, origin=origin, radius=None)


def _find_edge_line(edges, exc):
    msg = str(exc)
    if msg.startswith("edges["):
        k = int(msg[len("edges[") : msg.index("]")])
        return edges[k][0]
    return "?"


@dataclass(frozen=True)
class FamilySpec:
    """A radius-parameterized generator family, for exhaustions and configs.

    kind 'tree' takes d and mu_mode; 'lattice' takes dim; 'cycle' interprets
    the radius as the cycle length.
    """

    kind: str
    d: int = 3
    dim: int = 1
    mu_mode: str = "unit"
    n: int | None = None  # fixed size for 'cycle' when used outside exhaustions

    def ball(self, radius):
        if self.kind == "tree":
            return gen_tree_ball(self.d, radius, self.mu_mode)
        if self.kind == "lattice":
            return gen_lattice_box(self.dim, radius)
        if self.kind == "cycle":
            return gen_cycle(radius)
        raise InvalidParameterError(f"family: unknown kind {self.kind!r}")

    def instantiate(self, radius=None):
        """Build the domain: fixed-size cycles ignore radius, others require it."""
        if self.kind == "cycle" and self.n is not None:
            return gen_cycle(self.n)
        if radius is None:
            raise InvalidParameterError(f"family {self.label()!r}: radius required")
        return self.ball(radius)

    def label(self):
        if self.kind == "tree":
            return f"tree:d={self.d},mu={self.mu_mode}"
        if self.kind == "lattice":
            return f"lattice:dim={self.dim}"
        return "cycle" if self.n is None else f"cycle:n={self.n}"

    @classmethod
    def parse(cls, text):
        """Parse 'tree:d=3,mu=unit' / 'lattice:dim=1' / 'cycle[:n=8]'."""
        head, _, tail = text.partition(":")
        kv = {}
        if tail:
            for item in tail.split(","):
                k, _, v = item.partition("=")
                if not v:
                    raise InvalidParameterError(f"family: malformed option {item!r}")
                kv[k.strip()] = v.strip()
        head = head.strip()
        try:
            if head == "tree":
                return cls("tree", d=int(kv.pop("d", 3)), mu_mode=kv.pop("mu", "unit"), **_none(kv))
            if head == "lattice":
                return cls("lattice", dim=int(kv.pop("dim", 1)), **_none(kv))
            if head == "cycle":
                return cls("cycle", n=int(kv["n"]) if "n" in kv else None, **_none(_drop(kv, "n")))
        except (TypeError, ValueError) as exc:
            raise InvalidParameterError(f"family: {exc}") from exc
        raise InvalidParameterError(f"family: unknown kind {head!r}")


def _none(kv):
    if kv:
        raise InvalidParameterError(f"family: unknown options {sorted(kv)}")
    return {}


def _drop(kv, key):
    kv = dict(kv)
    kv.pop(key, None)
    return kv
