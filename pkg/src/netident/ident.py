"""Generic identifiability of a subnetwork from graph structure.

The question: given the closed-loop map from usable external signals to
all internal signals, are the requested modules into one output row
uniquely determined for almost every parameter value?  Two equivalent
structural answers are implemented - a counting condition on
vertex-disjoint path packings, and an existence condition phrased through
disconnecting sets - together with the algebraic rank conditions they
summarise, evaluated numerically on instantiated models.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .graph import (
    DiGraph,
    DisconnectingSet,
    PathFamily,
    is_disconnecting_set,
    max_vdp,
    min_disconnecting_set,
)
from .model import (
    NetworkModelSet,
    Query,
    SignalKind,
    SignalRef,
    compute_Wj,
    compute_Xj,
    derive_graph,
)
from .oracle import (
    RANK_RTOL,
    NumericModel,
    SingularSampleError,
    numeric_rank,
    sample_points,
    transfer_submatrix,
)
from .tf import RationalTF

__all__ = [
    "CellKind",
    "SparsityPattern",
    "IdentVerdict",
    "Assumption5Report",
    "structural_rank",
    "build_F",
    "generic_rank_T",
    "check_path_conditions",
    "check_disconnecting_conditions",
    "check_algebraic_conditions",
    "parallel_path_loop_equivalence",
    "check_assumption5",
    "canonical_disconnecting_set",
]


class CellKind(enum.IntEnum):
    ZERO = 0
    FIXED = 1
    PARAM = 2


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    """A matrix known only through its cells: zero, fixed value, or free.

    ``fixed_values`` resolves FIXED cells to transfer functions (or plain
    numbers) when a numeric evaluation is requested.
    """

    rows: tuple
    cols: tuple
    cells: np.ndarray  # int8 array of CellKind values
    fixed_values: dict

    def __post_init__(self):
        if self.cells.shape != (len(self.rows), len(self.cols)):
            raise ValueError("cells shape does not match labels")

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def nonzero_mask(self) -> np.ndarray:
        return self.cells != CellKind.ZERO

    def evaluate_fixed(self, i: int, j: int, z: complex) -> complex:
        value = self.fixed_values[(i, j)]
        return value(z) if isinstance(value, RationalTF) else complex(value)


def structural_rank(pattern: SparsityPattern | np.ndarray) -> int:
    """Maximum rank over all matrices with the given nonzero pattern.

    Equals the maximum bipartite matching between rows and columns of the
    nonzero cells.
    """
    mask = pattern.nonzero_mask() if isinstance(pattern, SparsityPattern) else np.asarray(pattern) != 0
    if mask.size == 0 or not mask.any():
        return 0
    matching = maximum_bipartite_matching(csr_matrix(mask.astype(np.int8)), perm_type="column")
    return int(np.count_nonzero(matching >= 0))


def build_F(model: NetworkModelSet, Wbar, Xbar) -> SparsityPattern:
    """The structural companion matrix of a transfer submatrix.

    Columns are the internal couplings for rows outside ``Wbar`` (with the
    fixed -1 diagonal) followed by the input columns for ``Xbar``.  Its
    structural rank carries the generic rank of the corresponding
    external-to-internal submatrix, shifted by ``L - |Wbar|``.
    """
    wbar = frozenset(Wbar)
    xbar = sorted(Xbar)
    if not wbar <= set(model.internals):
        raise ValueError("Wbar must consist of internal signals")
    keep = [w for w in model.internals if w not in wbar]
    cols = tuple(keep) + tuple(xbar)
    col_pos = {c: k for k, c in enumerate(cols)}
    cells = np.zeros((model.L, len(cols)), dtype=np.int8)
    fixed: dict = {}
    for i, w in enumerate(model.internals):
        if w in col_pos:
            cells[i, col_pos[w]] = CellKind.FIXED
            fixed[(i, col_pos[w])] = -1.0
    for en in model.entries:
        if en.source in col_pos:
            i, k = en.target.index, col_pos[en.source]
            if en.is_parametrized:
                cells[i, k] = CellKind.PARAM
            else:
                cells[i, k] = CellKind.FIXED
                fixed[(i, k)] = en.status.tf
    labels = tuple(c.name for c in cols)
    return SparsityPattern(tuple(w.name for w in model.internals), labels, cells, fixed)


def generic_rank_T(model: NetworkModelSet, Wbar, Xbar) -> int:
    """Generic rank of the external-to-internal submatrix, from the graph.

    Equals the maximum number of vertex-disjoint paths from ``Xbar`` to
    ``Wbar``; run ``check_assumption5`` first when the model has known
    entries, since conspiring fixed values can void the equality.
    """
    count, _ = max_vdp(derive_graph(model), set(Xbar), set(Wbar))
    return count


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IdentVerdict:
    """Outcome of an identifiability check for one query.

    ``certificate`` always carries the three path counts of the counting
    condition; the witness (a path packing plus a disconnecting set) is
    present exactly when the verdict is positive and the method is
    structural.
    """

    identifiable: bool
    method: str
    certificate: dict
    witness_paths: PathFamily | None = None
    witness_cut: frozenset | None = None
    samples: tuple = ()

    def to_json(self) -> dict:
        out = {
            "identifiable": self.identifiable,
            "method": self.method,
            "certificate": dict(self.certificate),
        }
        if self.witness_cut is not None:
            out["witness_disconnecting_set"] = [v.name for v in sorted(self.witness_cut)]
        if self.witness_paths is not None:
            out["witness_paths"] = [[v.name for v in p] for p in self.witness_paths]
        if self.samples:
            out["samples"] = [dict(s) for s in self.samples]
        return out


def _query_sets(model: NetworkModelSet, query: Query):
    query.validate(model)
    wj = compute_Wj(model, query.j)
    xj = compute_Xj(model, query.j)
    wbar = query.targets
    return wj, xj, wbar, wj - wbar


def _theorem3_counts(graph: DiGraph, xj, wbar, wj, rest) -> dict:
    b_bar, _ = max_vdp(graph, xj, wbar)
    b_all, _ = max_vdp(graph, xj, wj)
    b_rest, _ = max_vdp(graph, xj, rest)
    return {
        "b_X_to_targets": b_bar,
        "b_X_to_inputs": b_all,
        "b_X_to_other_inputs": b_rest,
        "target_count": len(wbar),
    }


def check_path_conditions(model: NetworkModelSet, query: Query) -> IdentVerdict:
    """Decide identifiability by the vertex-disjoint path counting condition.

    The query's modules are generically identifiable iff the usable
    external signals reach the target inputs through a full-size disjoint
    packing, and the packing to all inputs splits additively between the
    target inputs and the remaining ones.  When all parametrized inputs of
    the row are queried this collapses to the single full-excitation
    count.
    """
    wj, xj, wbar, rest = _query_sets(model, query)
    graph = derive_graph(model)
    cert = _theorem3_counts(graph, xj, wbar, wj, rest)
    identifiable = (
        cert["b_X_to_targets"] == len(wbar)
        and cert["b_X_to_inputs"] == cert["b_X_to_targets"] + cert["b_X_to_other_inputs"]
    )
    witness_paths = witness_cut = None
    if identifiable:
        cut = min_disconnecting_set(graph, xj, rest)
        count, family = max_vdp(graph, xj, set(cut) | wbar)
        assert count == len(cut) + len(wbar)
        witness_paths, witness_cut = family, cut.vertices
    return IdentVerdict(identifiable, "path", cert, witness_paths, witness_cut)


def canonical_disconnecting_set(
    model: NetworkModelSet,
    query: Query,
    extra_sources=(),
    internal_only: bool = True,
) -> DisconnectingSet:
    """The canonical cut separating the target inputs from the other inputs.

    Minimum disconnecting set from the out-neighborhood of the target
    inputs (plus any extra source signals) to the remaining parametrized
    inputs of the row.  Taking out-neighbors as sources is what keeps the
    cut away from the target inputs themselves.
    """
    wj, _, wbar, rest = _query_sets(model, query)
    graph = derive_graph(model)
    sources = set(graph.out_neighbors(wbar)) | set(extra_sources)
    forbidden = model.externals if internal_only else ()
    cut = min_disconnecting_set(graph, sources, rest, forbidden=forbidden)
    assert not cut.vertices & wbar, "a minimum cut from the out-neighborhood never needs target inputs"
    return cut


def check_disconnecting_conditions(model: NetworkModelSet, query: Query) -> IdentVerdict:
    """Decide identifiability through a disconnecting-set witness.

    The query is identifiable iff some set ``D`` blocking every path from
    the usable externals to the non-target inputs is, together with the
    target inputs, reached by a full-size disjoint packing.  It suffices
    to test the canonical minimum cut: an internal-vertex cut is tried
    first (it makes the nicer witness), then the unrestricted one, which
    succeeds whenever any witness exists.
    """
    wj, xj, wbar, rest = _query_sets(model, query)
    graph = derive_graph(model)
    cert = _theorem3_counts(graph, xj, wbar, wj, rest)

    identifiable = False
    witness_paths = witness_cut = None
    for internal_only in (True, False):
        cut = canonical_disconnecting_set(model, query, extra_sources=xj, internal_only=internal_only)
        count, family = max_vdp(graph, xj, set(cut) | wbar)
        cert["cut_size"] = len(cut)
        cert["b_X_to_targets_and_cut"] = count
        if count == len(cut) + len(wbar):
            identifiable, witness_paths, witness_cut = True, family, cut.vertices
            break
    return IdentVerdict(identifiable, "disconnecting", cert, witness_paths, witness_cut)


def check_algebraic_conditions(
    numeric_model: NumericModel,
    query: Query,
    tol: float = RANK_RTOL,
    n_points: int = 5,
    seed: int = 0,
) -> IdentVerdict:
    """Evaluate the rank conditions on one instantiated model.

    At each sampled frequency point the map from the usable externals must
    have full row rank onto the target inputs, and its rank onto all
    inputs must split additively.  Ill-conditioned sample points are
    redrawn.  Per-sample outcomes are reported; the verdict requires all
    samples to agree.
    """
    model = numeric_model.model_set
    wj, xj, wbar, rest = _query_sets(model, query)
    rng = np.random.default_rng(seed)
    records = []
    attempts = 0
    while len(records) < n_points:
        attempts += 1
        if attempts > 20 * n_points:
            raise SingularSampleError("could not find enough well-conditioned sample points")
        z = complex(sample_points(rng, 1)[0])
        try:
            r_bar = numeric_rank(transfer_submatrix(numeric_model, z, wbar, xj), tol)
            r_all = numeric_rank(transfer_submatrix(numeric_model, z, wj, xj), tol)
            r_rest = numeric_rank(transfer_submatrix(numeric_model, z, rest, xj), tol)
        except SingularSampleError:
            continue
        ok = r_bar == len(wbar) and r_all == r_bar + r_rest
        records.append(
            {
                "z": (z.real, z.imag),
                "rank_targets": r_bar,
                "rank_inputs": r_all,
                "rank_other_inputs": r_rest,
                "ok": ok,
            }
        )
    cert = {
        "target_count": len(wbar),
        "points_checked": len(records),
        "points_passed": sum(r["ok"] for r in records),
    }
    identifiable = all(r["ok"] for r in records)
    return IdentVerdict(identifiable, "algebraic", cert, samples=tuple(records))


# ---------------------------------------------------------------------------
# parallel-path / loop characterisation
# ---------------------------------------------------------------------------


def _simple_paths(graph: DiGraph, start, goal):
    """All simple directed paths from start to goal (small graphs only).

    With ``start == goal`` this enumerates the simple cycles through the
    vertex.
    """
    succ = graph.successors
    path = [start]
    on_path = {start}

    def extend(v):
        for w in succ[v]:
            if w == goal:
                yield tuple(path) + (goal,)
            elif w not in on_path:
                path.append(w)
                on_path.add(w)
                yield from extend(w)
                path.pop()
                on_path.remove(w)

    yield from extend(start)


def parallel_path_loop_equivalence(model: NetworkModelSet, i: int, j: int, D) -> bool:
    """Cross-check the cut test against the classical signal-selection rule.

    For a single module from ``w_i`` to ``w_j`` in a fully parametrized
    model, a set ``D`` of internal signals (not containing ``w_i``)
    disconnects ``w_i`` from the other inputs of ``w_j`` exactly when it
    hits an internal vertex of every parallel path from ``w_i`` to ``w_j``
    and a vertex of every loop through ``w_j`` other than loops closed by
    the module's own edge.  Both sides are computed independently and
    asserted equal.
    """
    wi, wjv = SignalRef.internal(i), SignalRef.internal(j)
    model.signal(wi), model.signal(wjv)
    d = frozenset(D)
    if any(en.matrix == "G" and not en.is_parametrized for en in model.entries):
        raise ValueError("this characterisation needs all nonzero modules parametrized")
    if wi in d:
        raise ValueError("the target input itself cannot be in D")
    if any(v.kind is not SignalKind.INTERNAL for v in d):
        raise ValueError("D must contain internal signals only")
    wj = compute_Wj(model, j)
    if wi not in wj:
        raise ValueError(f"no module from {wi.name} to {wjv.name}")
    graph = derive_graph(model)

    cut_side = is_disconnecting_set(graph, {wi}, wj - {wi}, d)

    paths_covered = all(
        set(p[1:-1]) & d
        for p in _simple_paths(graph, wi, wjv)
        if len(p) > 2  # the module's own edge is not a parallel path
    )
    loops_covered = True
    for u in sorted(graph.in_neighbors({wjv})):
        if u == wi:
            continue  # loops closed by the module's own edge are exempt
        for p in _simple_paths(graph, wjv, u):
            if not set(p) & d:
                loops_covered = False
                break
        if not loops_covered:
            break
    rule_side = paths_covered and loops_covered

    assert cut_side == rule_side, (
        f"cut test ({cut_side}) and parallel-path/loop rule ({rule_side}) disagree"
    )
    return cut_side


# ---------------------------------------------------------------------------
# fixed-entry rank consistency
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Assumption5Report:
    """Partial verification that fixed entries behave generically.

    Submatrices of the stacked structure matrix made purely of fixed/zero
    cells are enumerated exhaustively up to ``size_cap`` and probed
    randomly above it; each must have numeric rank equal to structural
    rank.  The result is evidence up to the cap, never a proof.
    """

    size_cap: int
    exhaustive_complete: bool
    checked: int
    random_trials: int
    violations: tuple  # ((row indices), (col indices), structural, numeric)

    @property
    def passed(self) -> bool:
        return not self.violations


def _stacked_pattern(model: NetworkModelSet) -> SparsityPattern:
    """Cells of ``[(G - I)  R  H]`` with the fixed -1 diagonal."""
    L, K, p = model.L, model.K, model.p
    cells = np.zeros((L, L + K + p), dtype=np.int8)
    fixed: dict = {}
    for i in range(L):
        cells[i, i] = CellKind.FIXED
        fixed[(i, i)] = -1.0
    for en in model.entries:
        col = {
            SignalKind.INTERNAL: en.source.index,
            SignalKind.EXCITATION: L + en.source.index,
            SignalKind.NOISE: L + K + en.source.index,
        }[en.source.kind]
        if en.is_parametrized:
            cells[en.target.index, col] = CellKind.PARAM
        else:
            cells[en.target.index, col] = CellKind.FIXED
            fixed[(en.target.index, col)] = en.status.tf
    rows = tuple(w.name for w in model.internals)
    cols = rows + tuple(x.name for x in model.externals)
    return SparsityPattern(rows, cols, cells, fixed)


def _rank_gap(pattern: SparsityPattern, rows, cols, zs) -> tuple[int, int] | None:
    sub = pattern.cells[np.ix_(rows, cols)]
    if (sub == CellKind.PARAM).any():
        return None
    mask = sub == CellKind.FIXED
    if not mask.any():
        return None
    srank = structural_rank(mask)
    best = 0
    for z in zs:
        mat = np.zeros(sub.shape, dtype=complex)
        for a, i in enumerate(rows):
            for b, jj in enumerate(cols):
                if sub[a, b] == CellKind.FIXED:
                    mat[a, b] = pattern.evaluate_fixed(i, jj, z)
        best = max(best, numeric_rank(mat))
        if best == srank:
            return None
    return srank, best


def check_assumption5(
    model: NetworkModelSet,
    size_cap: int = 5,
    trials: int = 200,
    seed: int = 0,
    budget: int = 200_000,
) -> Assumption5Report:
    """Search for fixed-value rank degeneracies in the stacked structure matrix."""
    pattern = _stacked_pattern(model)
    n_rows, n_cols = pattern.shape
    rng = np.random.default_rng(seed)
    zs = sample_points(rng, 3)
    violations = []
    checked = 0
    complete = True

    fixed_mask = pattern.cells == CellKind.FIXED
    param_mask = pattern.cells == CellKind.PARAM
    for k in range(1, min(size_cap, n_rows, n_cols) + 1):
        for rows in combinations(range(n_rows), k):
            r = list(rows)
            allowed = [c for c in range(n_cols) if not param_mask[r, c].any() and fixed_mask[r, c].any()]
            if len(allowed) < k:
                continue
            for cols in combinations(allowed, k):
                checked += 1
                if checked > budget:
                    complete = False
                    break
                gap = _rank_gap(pattern, r, list(cols), zs)
                if gap is not None:
                    violations.append((rows, cols, gap[0], gap[1]))
            if not complete:
                break
        if not complete:
            break

    random_trials = 0
    max_k = min(n_rows, n_cols)
    if max_k > size_cap and not violations:
        for _ in range(trials):
            k = int(rng.integers(size_cap + 1, max_k + 1))
            rows = sorted(rng.choice(n_rows, size=k, replace=False).tolist())
            allowed = [c for c in range(n_cols) if not param_mask[rows, c].any() and fixed_mask[rows, c].any()]
            if len(allowed) < k:
                continue
            cols = sorted(rng.choice(len(allowed), size=k, replace=False).tolist())
            cols = [allowed[c] for c in cols]
            random_trials += 1
            gap = _rank_gap(pattern, rows, cols, zs)
            if gap is not None:
                violations.append((tuple(rows), tuple(cols), gap[0], gap[1]))
    return Assumption5Report(
        size_cap=size_cap,
        exhaustive_complete=complete,
        checked=checked,
        random_trials=random_trials,
        violations=tuple(violations),
    )
