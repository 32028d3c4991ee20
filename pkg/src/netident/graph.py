"""Combinatorial kernel: vertex-disjoint paths and disconnecting sets.

Conventions follow the classical duality between path packings and vertex
cuts in directed graphs.  Paths may start and end anywhere inside the two
vertex sets, endpoints included; a single vertex counts as a path from
itself to itself.  A disconnecting set is any vertex set meeting every
directed path between the two sets, and it may contain vertices of the
source or target sets themselves.

The maximum number of vertex-disjoint paths equals the size of a minimum
disconnecting set (Menger duality).  Both are computed on a unit-capacity
split graph: every vertex ``v`` becomes an arc ``v_in -> v_out`` of
capacity one, original edges get effectively unbounded capacity, a super
source feeds ``v_in`` for each source vertex and ``v_out`` drains into a
super sink for each target vertex.  Minimum cuts of this network consist
purely of split arcs and therefore read off a vertex set directly, with
overlaps and single-vertex paths handled uniformly.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Hashable, Iterable, Sequence

__all__ = [
    "DiGraph",
    "PathFamily",
    "DisconnectingSet",
    "InfeasibleCutError",
    "max_vdp",
    "min_disconnecting_set",
    "is_disconnecting_set",
    "reachable",
    "normalize_paths",
    "partition_SDP",
    "brute_force_cut",
]

Vertex = Hashable


class InfeasibleCutError(ValueError):
    """No disconnecting set exists within the allowed cut vertices."""


@dataclass(frozen=True)
class DiGraph:
    """Immutable directed graph with a fixed, deterministic vertex order."""

    vertices: tuple
    edges: frozenset

    def __init__(self, vertices: Iterable[Vertex], edges: Iterable[tuple]):
        seen = dict.fromkeys(vertices)
        edge_set = frozenset((u, v) for u, v in edges)
        for u, v in edge_set:
            if u not in seen or v not in seen:
                raise ValueError(f"edge ({u!r}, {v!r}) references unknown vertex")
        object.__setattr__(self, "vertices", tuple(seen))
        object.__setattr__(self, "edges", edge_set)

    @cached_property
    def index(self) -> dict:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def successors(self) -> dict:
        succ = {v: [] for v in self.vertices}
        for u, v in self.edges:
            succ[u].append(v)
        idx = self.index
        for v in succ:
            succ[v].sort(key=idx.__getitem__)
        return succ

    @cached_property
    def predecessors(self) -> dict:
        pred = {v: [] for v in self.vertices}
        for u, v in self.edges:
            pred[v].append(u)
        idx = self.index
        for v in pred:
            pred[v].sort(key=idx.__getitem__)
        return pred

    def out_neighbors(self, vertices: Iterable[Vertex]) -> frozenset:
        return frozenset(w for v in vertices for w in self.successors[v])

    def in_neighbors(self, vertices: Iterable[Vertex]) -> frozenset:
        return frozenset(w for v in vertices for w in self.predecessors[v])

    def with_edges_removed(self, edges: Iterable[tuple]) -> "DiGraph":
        gone = set(edges)
        return DiGraph(self.vertices, self.edges - gone)

    def without_vertices(self, vertices: Iterable[Vertex]) -> "DiGraph":
        gone = set(vertices)
        keep = [v for v in self.vertices if v not in gone]
        edges = [(u, v) for u, v in self.edges if u not in gone and v not in gone]
        return DiGraph(keep, edges)

    def __contains__(self, v) -> bool:
        return v in self.index

    def _check_members(self, *sets: Iterable[Vertex]) -> None:
        for s in sets:
            for v in s:
                if v not in self.index:
                    raise ValueError(f"vertex {v!r} is not in the graph")


@dataclass(frozen=True)
class PathFamily:
    """A family of pairwise vertex-disjoint directed paths.

    Each path is a vertex sequence following graph edges; a one-element
    sequence is the trivial path of a single vertex.
    """

    paths: tuple

    def __init__(self, paths: Iterable[Sequence[Vertex]]):
        object.__setattr__(self, "paths", tuple(tuple(p) for p in paths))

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    @property
    def vertices(self) -> frozenset:
        return frozenset(v for p in self.paths for v in p)

    @property
    def endpoints(self) -> frozenset:
        return frozenset(p[-1] for p in self.paths)

    @property
    def start_vertices(self) -> frozenset:
        return frozenset(p[0] for p in self.paths)

    def validate(self, graph: DiGraph, sources: Iterable[Vertex], targets: Iterable[Vertex]) -> None:
        """Raise if the family is not a vertex-disjoint source-target packing."""
        src, tgt = set(sources), set(targets)
        seen: set = set()
        for p in self.paths:
            if not p:
                raise ValueError("empty path in family")
            if p[0] not in src or p[-1] not in tgt:
                raise ValueError(f"path {p} does not run between the given sets")
            for u, v in zip(p, p[1:]):
                if (u, v) not in graph.edges:
                    raise ValueError(f"path step ({u!r}, {v!r}) is not a graph edge")
            if seen.intersection(p):
                raise ValueError("paths share a vertex")
            seen.update(p)


@dataclass(frozen=True)
class DisconnectingSet:
    """A vertex set meeting every directed path between two vertex sets."""

    vertices: frozenset

    def __init__(self, vertices: Iterable[Vertex]):
        object.__setattr__(self, "vertices", frozenset(vertices))

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __contains__(self, v) -> bool:
        return v in self.vertices


# ---------------------------------------------------------------------------
# unit-capacity split-graph max flow
# ---------------------------------------------------------------------------


class _SplitFlow:
    """Edmonds-Karp on the vertex-split network of a DiGraph.

    Node numbering: vertex ``i`` becomes ``2i`` (in) and ``2i + 1`` (out);
    the super source and sink are the last two node ids.  ``uncuttable``
    vertices get a split-arc capacity above any possible finite cut, which
    keeps them out of minimum cuts without changing reachability.
    """

    def __init__(self, graph: DiGraph, sources, targets, uncuttable=()):
        graph._check_members(sources, targets, uncuttable)
        n = len(graph.vertices)
        self.graph = graph
        self.n = n
        self.big = n + 1
        self.source = 2 * n
        self.sink = 2 * n + 1
        idx = graph.index
        self.cap: dict = {}
        self.adj: list = [[] for _ in range(2 * n + 2)]
        uncut = {idx[v] for v in uncuttable}

        def add(a: int, b: int, c: int) -> None:
            if (a, b) not in self.cap:
                self.cap[(a, b)] = 0
                self.cap[(b, a)] = self.cap.get((b, a), 0)
                self.adj[a].append(b)
                self.adj[b].append(a)
            self.cap[(a, b)] += c

        for v, i in idx.items():
            add(2 * i, 2 * i + 1, self.big if i in uncut else 1)
        for u, v in sorted(graph.edges, key=lambda e: (idx[e[0]], idx[e[1]])):
            add(2 * idx[u] + 1, 2 * idx[v], self.big)
        for v in sorted(set(sources), key=idx.__getitem__):
            add(self.source, 2 * idx[v], self.big)
        for v in sorted(set(targets), key=idx.__getitem__):
            add(2 * idx[v] + 1, self.sink, self.big)
        self.flow: dict = {k: 0 for k in self.cap}
        self.value = 0
        self._run()

    def _residual(self, a: int, b: int) -> int:
        return self.cap[(a, b)] - self.flow[(a, b)]

    def _augment_once(self) -> bool:
        parent = {self.source: None}
        queue = deque([self.source])
        while queue:
            a = queue.popleft()
            if a == self.sink:
                break
            for b in self.adj[a]:
                if b not in parent and self._residual(a, b) > 0:
                    parent[b] = a
                    queue.append(b)
        if self.sink not in parent:
            return False
        path = []
        b = self.sink
        while parent[b] is not None:
            path.append((parent[b], b))
            b = parent[b]
        bottleneck = min(self._residual(a, b) for a, b in path)
        for a, b in path:
            self.flow[(a, b)] += bottleneck
            self.flow[(b, a)] -= bottleneck
        self.value += bottleneck
        return True

    def _run(self) -> None:
        while self._augment_once():
            pass

    def residual_reachable(self) -> set:
        seen = {self.source}
        queue = deque([self.source])
        while queue:
            a = queue.popleft()
            for b in self.adj[a]:
                if b not in seen and self._residual(a, b) > 0:
                    seen.add(b)
                    queue.append(b)
        return seen

    def cut_vertices(self) -> list:
        reach = self.residual_reachable()
        cut = []
        for v, i in self.graph.index.items():
            if 2 * i in reach and 2 * i + 1 not in reach:
                cut.append(v)
        return cut

    def path_family(self) -> list:
        """Decompose the flow into vertex-disjoint paths (unit splits only)."""
        remaining = {k: f for k, f in self.flow.items() if f > 0}
        verts = self.graph.vertices
        paths = []
        for first in self.adj[self.source]:
            while remaining.get((self.source, first), 0) > 0:
                remaining[(self.source, first)] -= 1
                node, path = first, []
                while node != self.sink:
                    if node % 2 == 0:
                        path.append(verts[node // 2])
                    nxt = next(b for b in self.adj[node] if remaining.get((node, b), 0) > 0)
                    remaining[(node, nxt)] -= 1
                    node = nxt
                paths.append(tuple(path))
        return paths


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def max_vdp(graph: DiGraph, sources: Iterable[Vertex], targets: Iterable[Vertex]) -> tuple[int, PathFamily]:
    """Maximum number of vertex-disjoint paths between two vertex sets.

    Returns the count together with a witness family of that size.  By
    Menger duality the count equals the size of a minimum disconnecting
    set for the same pair.
    """
    net = _SplitFlow(graph, set(sources), set(targets))
    family = PathFamily(net.path_family())
    assert len(family) == net.value
    return net.value, family


def min_disconnecting_set(
    graph: DiGraph,
    sources: Iterable[Vertex],
    targets: Iterable[Vertex],
    forbidden: Iterable[Vertex] = (),
) -> DisconnectingSet:
    """A minimum vertex set meeting every path between the two sets.

    Ties between minimum sets are broken deterministically toward the
    source side (residual-reachability rule).  Vertices in ``forbidden``
    never enter the returned set; if every path can only be blocked by
    forbidden vertices, ``InfeasibleCutError`` is raised.
    """
    net = _SplitFlow(graph, set(sources), set(targets), uncuttable=set(forbidden))
    if net.value > net.n:
        raise InfeasibleCutError("all cuts intersect the forbidden vertex set")
    cut = net.cut_vertices()
    assert len(cut) == net.value
    return DisconnectingSet(cut)


def is_disconnecting_set(
    graph: DiGraph,
    sources: Iterable[Vertex],
    targets: Iterable[Vertex],
    cut: Iterable[Vertex],
) -> bool:
    """True when every source-to-target path meets ``cut`` (endpoints count)."""
    blocked = set(cut)
    graph._check_members(sources, targets, blocked)
    start = set(sources) - blocked
    goal = set(targets)
    if start & goal:
        return False
    seen = set(start)
    queue = deque(start)
    while queue:
        v = queue.popleft()
        for w in graph.successors[v]:
            if w in blocked or w in seen:
                continue
            if w in goal:
                return False
            seen.add(w)
            queue.append(w)
    return True


def reachable(graph: DiGraph, sources: Iterable[Vertex], avoid: Iterable[Vertex] = ()) -> frozenset:
    """Vertices reachable from ``sources`` by paths avoiding ``avoid`` entirely."""
    blocked = set(avoid)
    graph._check_members(sources, blocked)
    seen = set(s for s in sources if s not in blocked)
    queue = deque(seen)
    while queue:
        v = queue.popleft()
        for w in graph.successors[v]:
            if w not in blocked and w not in seen:
                seen.add(w)
                queue.append(w)
    return frozenset(seen)


def normalize_paths(
    graph: DiGraph,
    family: PathFamily,
    sources: Iterable[Vertex],
    targets: Iterable[Vertex],
) -> PathFamily:
    """Shrink each path so no internal vertex lies in ``sources | targets``.

    Every path is replaced by the subpath from its last source-set vertex
    preceding the first target-set crossing up to that crossing.  The
    family keeps its cardinality and vertex-disjointness, which is what
    makes packings reusable as building blocks in larger constructions.
    """
    src, tgt = set(sources), set(targets)
    family.validate(graph, src, tgt)
    trimmed = []
    for p in family:
        end = next(i for i, v in enumerate(p) if v in tgt)
        start = max(i for i in range(end + 1) if p[i] in src)
        trimmed.append(p[start : end + 1])
    return PathFamily(trimmed)


def partition_SDP(graph: DiGraph, sources: Iterable[Vertex], cut: Iterable[Vertex]):
    """Split all vertices into (S, D, P) around a disconnecting set.

    ``S`` holds everything reachable from the sources without touching the
    cut, ``D`` is the cut itself and ``P`` the remainder.  No edge can run
    from ``S`` to ``P``; the returned partition asserts this, and a failure
    signals a corrupted cut.
    """
    d = frozenset(cut)
    graph._check_members(sources, d)
    s = reachable(graph, sources, avoid=d)
    p = frozenset(v for v in graph.vertices if v not in s and v not in d)
    for u in s:
        for w in graph.successors[u]:
            if w in p:
                raise AssertionError(f"edge {u!r} -> {w!r} escapes the cut")
    return s, d, p


def brute_force_cut(
    graph: DiGraph,
    sources: Iterable[Vertex],
    targets: Iterable[Vertex],
    max_n: int = 12,
) -> DisconnectingSet:
    """Exact minimum disconnecting set by subset enumeration (test oracle).

    Enumerates candidate vertex subsets in order of size, returning the
    first that blocks every path.  Intended for graphs of at most
    ``max_n`` vertices; independent of the flow-based implementation.
    """
    verts = graph.vertices
    n = len(verts)
    if n > max_n:
        raise ValueError(f"graph has {n} > {max_n} vertices")
    idx = graph.index
    adj = [0] * n
    for u, v in graph.edges:
        adj[idx[u]] |= 1 << idx[v]
    src_mask = 0
    for v in set(sources):
        src_mask |= 1 << idx[v]
    tgt_mask = 0
    for v in set(targets):
        tgt_mask |= 1 << idx[v]

    def disconnected(block_mask: int) -> bool:
        frontier = src_mask & ~block_mask
        if frontier & tgt_mask:
            return False
        seen = frontier
        while frontier:
            grow = 0
            f = frontier
            while f:
                low = f & -f
                grow |= adj[low.bit_length() - 1]
                f ^= low
            grow &= ~block_mask & ~seen
            if grow & tgt_mask:
                return False
            seen |= grow
            frontier = grow
        return True

    for size in range(n + 1):
        for combo in combinations(range(n), size):
            mask = 0
            for i in combo:
                mask |= 1 << i
            if disconnected(mask):
                return DisconnectingSet(verts[i] for i in combo)
    raise AssertionError("unreachable: the full vertex set always disconnects")
