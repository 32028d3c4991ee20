"""Random models and digraphs for cross-validation suites and demos."""

from __future__ import annotations

import numpy as np

from .graph import DiGraph
from .model import (
    AssumptionFlags,
    EdgeEntry,
    FeedthroughMode,
    Known,
    NetworkModelSet,
    Parametrized,
    Query,
    SignalRef,
    compute_Wj,
)
from .tf import RationalTF

__all__ = ["random_digraph", "random_model_set", "random_query"]


def random_digraph(rng: np.random.Generator, max_n: int = 12, density: float | None = None) -> DiGraph:
    """A random simple directed graph on integer vertices."""
    n = int(rng.integers(2, max_n + 1))
    dens = float(rng.uniform(0.1, 0.5)) if density is None else density
    edges = [
        (i, j)
        for i in range(n)
        for j in range(n)
        if i != j and rng.random() < dens
    ]
    return DiGraph(range(n), edges)


def _random_known_tf(rng: np.random.Generator) -> RationalTF:
    # one delay, generic gain; stable and strictly proper by construction
    return RationalTF.fir((0.0, float(rng.uniform(0.2, 1.0)) * float(rng.choice((-1.0, 1.0)))))


def random_model_set(
    rng: np.random.Generator,
    max_L: int = 8,
    density_range: tuple[float, float] = (0.15, 0.5),
    max_known: int = 3,
    max_r: int = 3,
    max_noise: int = 2,
) -> NetworkModelSet:
    """A random network model set with generic known entries.

    Internal couplings are drawn at a random density, a few of them may be
    fixed to generic known transfers, excitation signals enter a random
    subset of vertices and every noise channel feeds at least one vertex.
    """
    L = int(rng.integers(2, max_L + 1))
    density = float(rng.uniform(*density_range))
    g_edges = [
        (t, s)
        for t in range(L)
        for s in range(L)
        if t != s and rng.random() < density
    ]
    entries = []
    n_known = int(rng.integers(0, max_known + 1))
    known_picks = set()
    if g_edges and n_known:
        picks = rng.choice(len(g_edges), size=min(n_known, len(g_edges)), replace=False)
        known_picks = {int(i) for i in np.atleast_1d(picks)}
    for idx, (t, s) in enumerate(g_edges):
        status = Known(_random_known_tf(rng)) if idx in known_picks else Parametrized()
        entries.append(EdgeEntry(SignalRef.internal(t), SignalRef.internal(s), status))

    K = int(rng.integers(0, max_r + 1))
    for k in range(K):
        target = int(rng.integers(0, L))
        if rng.random() < 0.5:
            entries.append(EdgeEntry(SignalRef.internal(target), SignalRef.excitation(k), Known(RationalTF.constant(1.0))))
        else:
            entries.append(EdgeEntry(SignalRef.internal(target), SignalRef.excitation(k), Parametrized()))

    p = int(rng.integers(0, min(max_noise, L) + 1))
    for k in range(p):
        targets = {int(rng.integers(0, L))}
        if rng.random() < 0.3:
            targets.add(int(rng.integers(0, L)))
        for t in sorted(targets):
            entries.append(EdgeEntry(SignalRef.internal(t), SignalRef.noise(k), Parametrized()))

    return NetworkModelSet(L, K, p, tuple(entries), FeedthroughMode.STRICTLY_PROPER, AssumptionFlags())


def random_query(rng: np.random.Generator, model: NetworkModelSet) -> Query | None:
    """A random query against a row with parametrized inputs, if any exists."""
    rows = [j for j in range(model.L) if compute_Wj(model, j)]
    if not rows:
        return None
    j = int(rng.choice(rows))
    wj = sorted(compute_Wj(model, j))
    size = int(rng.integers(1, len(wj) + 1))
    picks = rng.choice(len(wj), size=size, replace=False)
    return Query(j, frozenset(wj[int(i)] for i in np.atleast_1d(picks)))
