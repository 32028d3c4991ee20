"""Excitation-signal allocation for subnetwork identifiability.

When a query fails the structural identifiability test, fresh measured
excitation signals can be attached to internal vertices until it passes.
The allocation works backwards from the disconnecting-set form of the
identifiability condition: compute the canonical cut between the target
inputs and the other inputs of the row, reuse whatever disjoint paths the
already-present external signals provide into the cut and the targets,
and excite the uncovered remainder, either directly or from admissible
upstream vertices.  Every fresh signal enters through a known unit
transfer, so it never adds unknowns to any row.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import (
    DiGraph,
    DisconnectingSet,
    PathFamily,
    max_vdp,
    min_disconnecting_set,
    normalize_paths,
    reachable,
)
from .ident import canonical_disconnecting_set, check_path_conditions
from .model import (
    NetworkModelSet,
    Query,
    SignalKind,
    SignalRef,
    compute_Wj,
    compute_Xj,
    derive_graph,
)

__all__ = [
    "AllocationPlan",
    "allocate",
    "allocate_direct",
    "largest_admissible_sources",
    "allocation_bound",
    "plan_to_json",
]


@dataclass(frozen=True)
class AllocationPlan:
    """Where fresh excitation signals go, and the augmented model set."""

    new_signals: tuple  # (internal vertex, fresh excitation index) pairs
    disconnecting_set: DisconnectingSet
    reused_paths: PathFamily
    augmented_model: NetworkModelSet
    verified: bool


def largest_admissible_sources(graph: DiGraph, D, targets) -> frozenset:
    """All internal vertices whose influence on ``targets`` is blocked by ``D``.

    These are the vertices where excitation may be attached without ``D``
    losing its disconnecting role: the cut itself plus every internal
    vertex with no ``D``-avoiding path to the targets.  Target vertices
    outside the cut are never admissible; their single-vertex path already
    escapes.
    """
    d = frozenset(D)
    escaping = {t for t in targets if t not in d}
    frontier = set(escaping)
    while frontier:
        grow = {
            u
            for v in frontier
            for u in graph.predecessors[v]
            if u not in d and u not in escaping
        }
        escaping |= grow
        frontier = grow
    internals = {v for v in graph.vertices if getattr(v, "kind", None) is SignalKind.INTERNAL}
    return frozenset(d | {v for v in internals if v not in escaping})


def _canonical_cut(model: NetworkModelSet, query: Query, x0) -> DisconnectingSet:
    return canonical_disconnecting_set(model, query, extra_sources=x0, internal_only=True)


def allocate_direct(model: NetworkModelSet, query: Query) -> AllocationPlan:
    """Excite the canonical cut and every target input directly.

    Ignores any external signals already present, so the plan always
    allocates ``|D| + |targets|`` fresh signals.  Simple, unconditional,
    and minimal when no usable signals exist beforehand.
    """
    query.validate(model)
    cut = canonical_disconnecting_set(model, query, internal_only=True)
    spots = sorted(set(cut) | query.targets)
    augmented = model
    new_signals = []
    for v in spots:
        new_signals.append((v, augmented.K))
        augmented = augmented.with_excitation_at(v)
    verdict = check_path_conditions(augmented, query)
    if not verdict.identifiable:
        raise AssertionError("direct allocation failed to achieve identifiability")
    return AllocationPlan(tuple(new_signals), cut, PathFamily(()), augmented, verdict.identifiable)


def allocate(
    model: NetworkModelSet,
    query: Query,
    X0j=None,
    preferred_sources=(),
) -> AllocationPlan:
    """Allocate the fewest fresh signals the cut construction accounts for.

    Steps: compute the canonical cut ``D`` for the query given the
    pre-existing usable signals ``X0j``; pack a maximum family of disjoint
    paths from ``X0j`` into ``D`` and the target inputs (trimmed so no
    path crosses those sets internally); if the packing already covers
    everything, the model is returned unchanged.  Otherwise the uncovered
    vertices are excited through disjoint paths inside the subgraph left
    over after removing the packing, starting from ``preferred_sources``
    where possible and at the uncovered vertices themselves otherwise.
    The returned plan re-verifies as identifiable.
    """
    query.validate(model)
    x0 = frozenset(compute_Xj(model, query.j) if X0j is None else X0j)
    for x in x0:
        if x.kind is SignalKind.INTERNAL:
            raise ValueError("X0j must contain external signals only")
    graph = derive_graph(model)
    wbar = query.targets
    cut = _canonical_cut(model, query, x0)
    goal = set(cut) | wbar

    _, family = max_vdp(graph, x0, goal)
    family = normalize_paths(graph, family, x0, goal)

    if len(family) == len(goal):
        verdict = check_path_conditions(model, query)
        if not verdict.identifiable:
            raise AssertionError("covered cut and targets but the query re-check failed")
        return AllocationPlan((), cut, family, model, True)

    uncovered = sorted(goal - family.endpoints)
    admissible = largest_admissible_sources(graph, cut, compute_Wj(model, query.j) - wbar)
    residual_graph = graph.without_vertices(family.vertices)

    chosen_paths: list = []
    pref = [model.signal(v) for v in preferred_sources]
    pref = [v for v in pref if v in admissible and v in residual_graph]
    if pref:
        _, upstream = max_vdp(residual_graph, pref, uncovered)
        upstream = normalize_paths(residual_graph, upstream, pref, uncovered)
        chosen_paths.extend(upstream.paths)
    covered = {p[-1] for p in chosen_paths}
    chosen_paths.extend((v,) for v in uncovered if v not in covered)

    augmented = model
    new_signals = []
    for p in sorted(chosen_paths):
        v = p[0]
        if v not in admissible:
            raise AssertionError(f"allocation source {v} escapes the admissible set")
        new_signals.append((v, augmented.K))
        augmented = augmented.with_excitation_at(v)

    verdict = check_path_conditions(augmented, query)
    if not verdict.identifiable:
        raise AssertionError("allocation failed to achieve identifiability")
    return AllocationPlan(tuple(new_signals), cut, family, augmented, True)


def allocation_bound(model: NetworkModelSet, query: Query, X0j=None) -> int:
    """How many fresh signals suffice for identifiability of the query.

    The size of the canonical cut plus the target inputs, minus however
    many of those vertices the pre-existing signals already reach through
    disjoint paths.  Zero exactly when the query is already identifiable
    from ``X0j``.
    """
    query.validate(model)
    x0 = frozenset(compute_Xj(model, query.j) if X0j is None else X0j)
    graph = derive_graph(model)
    cut = _canonical_cut(model, query, x0)
    goal = set(cut) | query.targets
    count, _ = max_vdp(graph, x0, goal)
    return len(goal) - count


def plan_to_json(plan: AllocationPlan) -> dict:
    return {
        "schema_version": 1,
        "new_signals": [{"vertex": v.name, "r_index": k} for v, k in plan.new_signals],
        "disconnecting_set": [v.name for v in sorted(plan.disconnecting_set)],
        "verified": plan.verified,
    }
