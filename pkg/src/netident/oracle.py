"""Numeric instantiation and rank/factorization verification.

Everything the structural layer claims from the graph alone is checked
here against concrete numbers: random members of a model set are drawn,
the external-to-internal transfer matrix is evaluated at complex sample
points, and ranks / factorizations are measured with an SVD cutoff.  The
sampling scheme keeps every instantiated model automatically stable, so
the closed-loop map exists at every sample point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import DiGraph, is_disconnecting_set, max_vdp, partition_SDP
from .model import (
    Known,
    NetworkModelSet,
    Parametrized,
    SignalKind,
    SignalRef,
    derive_graph,
)
from .tf import RationalTF

__all__ = [
    "RationalTF",
    "NumericModel",
    "FrequencySamples",
    "SingularSampleError",
    "RANK_RTOL",
    "instantiate_random",
    "transfer_matrix_T",
    "transfer_submatrix",
    "evaluate_F",
    "numeric_rank",
    "sample_points",
    "verify_generic_rank",
    "GenericRankReport",
    "factorization_K",
]

# Singular values below RANK_RTOL times the largest one count as zero.
RANK_RTOL = 1e-8

# Sample points sit just outside the unit circle to stay clear of poles.
SAMPLE_RADIUS_OFFSET = 1e-3


class SingularSampleError(ArithmeticError):
    """The closed-loop map is (numerically) singular at the sample point."""


@dataclass(frozen=True, eq=False)
class NumericModel:
    """One concrete network: a rational transfer function per entry.

    ``G``, ``R`` and ``H`` map ``(target, source)`` pairs to transfer
    functions; absent pairs are zero.  ``Lambda`` is the driving-noise
    covariance.  The originating model set is kept for structural lookups.
    """

    model_set: NetworkModelSet
    G: dict
    R: dict
    H: dict
    Lambda: np.ndarray

    @property
    def L(self) -> int:
        return self.model_set.L

    @property
    def K(self) -> int:
        return self.model_set.K

    @property
    def p(self) -> int:
        return self.model_set.p

    def entry_tf(self, target: SignalRef, source: SignalRef) -> RationalTF | None:
        table = {SignalKind.INTERNAL: self.G, SignalKind.EXCITATION: self.R, SignalKind.NOISE: self.H}
        return table[source.kind].get((target, source))

    def G_at(self, z: complex) -> np.ndarray:
        out = np.zeros((self.L, self.L), dtype=complex)
        for (t, s), tf in self.G.items():
            out[t.index, s.index] = tf(z)
        return out

    def X_at(self, z: complex) -> np.ndarray:
        """The stacked input matrix ``[R H]`` evaluated at ``z``."""
        out = np.zeros((self.L, self.K + self.p), dtype=complex)
        for (t, s), tf in self.R.items():
            out[t.index, s.index] = tf(z)
        for (t, s), tf in self.H.items():
            out[t.index, self.K + s.index] = tf(z)
        return out

    def external_column(self, x: SignalRef) -> int:
        return x.index if x.kind is SignalKind.EXCITATION else self.K + x.index


@dataclass(frozen=True)
class FrequencySamples:
    """Complex matrix samples of a transfer map on a set of points."""

    points: tuple
    rows: tuple
    cols: tuple
    values: np.ndarray  # shape (len(points), len(rows), len(cols))

    def __post_init__(self):
        expected = (len(self.points), len(self.rows), len(self.cols))
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")

    def row_index(self, ref: SignalRef) -> int:
        return self.rows.index(ref)

    def col_index(self, ref: SignalRef) -> int:
        return self.cols.index(ref)


def instantiate_random(model_set: NetworkModelSet, seed: int) -> NumericModel:
    """Draw one concrete model: random short FIR transfers for every unknown.

    Each parametrized entry becomes an independent strictly proper FIR of
    length 3 with coefficients uniform in [-1, 1]; known entries are taken
    from the model set.  The assembled internal coupling is then scaled to
    half its peak gain over a frequency grid, which makes the closed loop
    invertible and stable by construction (known couplings are scaled
    along, so fixed-value degeneracies such as vanishing determinants are
    preserved).  The noise covariance is the identity.
    """
    rng = np.random.default_rng(seed)
    G: dict = {}
    R: dict = {}
    H: dict = {}
    table = {SignalKind.INTERNAL: G, SignalKind.EXCITATION: R, SignalKind.NOISE: H}
    for en in model_set.entries:
        if isinstance(en.status, Parametrized):
            tf = RationalTF.fir((0.0, rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
        else:
            tf = en.status.tf
        table[en.source.kind][(en.target, en.source)] = tf

    if G:
        grid = np.exp(1j * np.linspace(0.0, 2.0 * np.pi, 128, endpoint=False))
        peak = 0.0
        for z in grid:
            mat = np.zeros((model_set.L, model_set.L), dtype=complex)
            for (t, s), tf in G.items():
                mat[t.index, s.index] = tf(z)
            peak = max(peak, float(np.linalg.norm(mat, 2)))
        if peak > 0.0:
            factor = 0.5 / peak
            G = {key: tf.scaled(factor) for key, tf in G.items()}

    return NumericModel(model_set, G, R, H, np.eye(model_set.p))


def sample_points(rng: np.random.Generator, count: int = 2) -> np.ndarray:
    """Random evaluation points just outside the unit circle."""
    omega = rng.uniform(0.0, 2.0 * np.pi, size=count)
    return (1.0 + SAMPLE_RADIUS_OFFSET) * np.exp(1j * omega)


def transfer_matrix_T(model: NumericModel, z: complex) -> np.ndarray:
    """The external-to-internal map ``(I - G)^-1 [R H]`` at point ``z``."""
    A = np.eye(model.L, dtype=complex) - model.G_at(z)
    X = model.X_at(z)
    try:
        if np.linalg.cond(A) > 1e13:
            raise SingularSampleError(f"closed loop ill-conditioned at z={z}")
        return np.linalg.solve(A, X)
    except np.linalg.LinAlgError as exc:
        raise SingularSampleError(f"closed loop singular at z={z}") from exc


def transfer_submatrix(model: NumericModel, z: complex, rows, cols) -> np.ndarray:
    """Rows (internal signals) by columns (external signals) of the map at ``z``."""
    T = transfer_matrix_T(model, z)
    ridx = [r.index for r in sorted(rows)]
    cidx = [model.external_column(x) for x in sorted(cols)]
    return T[np.ix_(ridx, cidx)] if ridx and cidx else np.zeros((len(ridx), len(cidx)), dtype=complex)


def evaluate_F(model: NumericModel, Wbar, Xbar, z: complex) -> np.ndarray:
    """The rank-shift companion ``[(G - I) columns off the row set | X columns]``.

    Its rank differs from the rank of the transfer submatrix by the fixed
    offset ``L - |Wbar|``, which lets rank questions be settled without
    inverting the closed loop.
    """
    wbar = set(Wbar)
    keep = [w.index for w in model.model_set.internals if w not in wbar]
    GmI = model.G_at(z) - np.eye(model.L)
    left = GmI[:, keep]
    cols = [model.external_column(x) for x in sorted(Xbar)]
    right = model.X_at(z)[:, cols] if cols else np.zeros((model.L, 0), dtype=complex)
    return np.hstack([left, right])


def numeric_rank(matrix: np.ndarray, tol: float = RANK_RTOL) -> int:
    """Number of singular values above ``tol`` times the largest one."""
    if matrix.size == 0:
        return 0
    s = np.linalg.svd(matrix, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


@dataclass(frozen=True)
class GenericRankReport:
    Wbar: tuple
    Xbar: tuple
    structural_count: int
    trials: int
    agreements: int
    mismatches: tuple  # (trial, seed, observed rank)
    seed: int
    fixed_rank_violation: bool

    @property
    def fraction(self) -> float:
        return 1.0 if self.trials == 0 else self.agreements / self.trials

    @property
    def ok(self) -> bool:
        return self.trials == 0 or self.fraction >= 0.99


def verify_generic_rank(
    model_set: NetworkModelSet,
    Wbar,
    Xbar,
    trials: int = 100,
    seed: int = 0,
) -> GenericRankReport:
    """Monte-Carlo check that the path count predicts the numeric rank.

    For each trial a random instantiation is drawn and the rank of the
    transfer submatrix at two random sample points is compared against the
    maximum number of vertex-disjoint paths.  Disagreement on almost every
    trial is the signature of fixed entries conspiring against the
    sparsity pattern, so that diagnostic is attached when triggered.
    """
    from .ident import check_assumption5

    graph = derive_graph(model_set)
    wbar, xbar = sorted(Wbar), sorted(Xbar)
    b, _ = max_vdp(graph, xbar, wbar)
    rng = np.random.default_rng(seed)
    agreements = 0
    mismatches = []
    for trial in range(trials):
        sub_seed = int(rng.integers(0, 2**32))
        nm = instantiate_random(model_set, sub_seed)
        point_rng = np.random.default_rng(sub_seed + 1)
        rank = 0
        for z in sample_points(point_rng, count=2):
            rank = max(rank, numeric_rank(transfer_submatrix(nm, z, wbar, xbar)))
        if rank == b:
            agreements += 1
        else:
            mismatches.append((trial, sub_seed, rank))
    flagged = False
    if trials > 0 and agreements / trials < 0.99:
        flagged = not check_assumption5(model_set).passed
    return GenericRankReport(
        Wbar=tuple(wbar),
        Xbar=tuple(xbar),
        structural_count=b,
        trials=trials,
        agreements=agreements,
        mismatches=tuple(mismatches),
        seed=seed,
        fixed_rank_violation=flagged,
    )


def factorization_K(model: NumericModel, D, Wbar, Xbar, z: complex) -> tuple[np.ndarray, float]:
    """Factor the map to ``Wbar`` through the signals of a disconnecting set.

    Given a vertex set ``D`` meeting every path from the externals ``Xbar``
    to the internals ``Wbar``, the map onto ``Wbar`` factors as a proper
    matrix times the map onto ``D``.  The matrix is assembled blockwise
    from the reachability partition around ``D``: rows are ordered
    ``Wbar`` outside ``D`` first then inside, columns follow the rows of
    the ``D``-map (internal members, then external members inside
    ``Xbar``, then the remaining external members).  Returns the matrix
    and the relative factorization residual at ``z``.
    """
    d = frozenset(D)
    wbar = sorted(Wbar)
    xbar = sorted(Xbar)
    graph = derive_graph(model.model_set)
    if not is_disconnecting_set(graph, xbar, wbar, d):
        raise ValueError("D does not meet every path from Xbar to Wbar")
    _, _, P = partition_SDP(graph, xbar, d)

    internals = model.model_set.internals
    P_w = [w for w in internals if w in P]
    D_w = [w for w in internals if w in d]
    D_x = [x for x in model.model_set.externals if x in d]
    Dx_in_xbar = [x for x in D_x if x in set(xbar)]
    Dx_rest = [x for x in D_x if x not in set(xbar)]
    W_P = [w for w in wbar if w in P]
    W_D = [w for w in wbar if w in d]
    if len(W_P) + len(W_D) != len(wbar):
        raise AssertionError("Wbar escapes the cut partition")

    Gz = model.G_at(z)
    Xz = model.X_at(z)
    p_idx = [w.index for w in P_w]
    A = np.eye(len(P_w), dtype=complex) - Gz[np.ix_(p_idx, p_idx)]
    inv = np.linalg.inv(A) if P_w else np.zeros((0, 0), dtype=complex)
    wp_pos = [P_w.index(w) for w in W_P]
    inv_rows = inv[wp_pos, :]

    G_PD = Gz[np.ix_(p_idx, [w.index for w in D_w])] if P_w else np.zeros((0, len(D_w)), dtype=complex)
    X_PD = (
        Xz[np.ix_(p_idx, [model.external_column(x) for x in Dx_in_xbar])]
        if P_w
        else np.zeros((0, len(Dx_in_xbar)), dtype=complex)
    )
    top = np.hstack(
        [inv_rows @ G_PD, inv_rows @ X_PD, np.zeros((len(W_P), len(Dx_rest)), dtype=complex)]
    )
    C = np.zeros((len(W_D), len(D_w)), dtype=complex)
    for i, w in enumerate(W_D):
        C[i, D_w.index(w)] = 1.0
    bottom = np.hstack([C, np.zeros((len(W_D), len(Dx_in_xbar) + len(Dx_rest)), dtype=complex)])
    Kmat = np.vstack([top, bottom])

    # evaluate both sides of the factorization for the residual
    Tz = transfer_matrix_T(model, z)
    xcols = [model.external_column(x) for x in xbar]
    T_WX = Tz[np.ix_([w.index for w in W_P + W_D], xcols)]
    rows_D = []
    for w in D_w:
        rows_D.append(Tz[w.index, xcols])
    for x in Dx_in_xbar:
        row = np.zeros(len(xbar), dtype=complex)
        row[xbar.index(x)] = 1.0
        rows_D.append(row)
    for _ in Dx_rest:
        rows_D.append(np.zeros(len(xbar), dtype=complex))
    T_DX = np.array(rows_D, dtype=complex).reshape(len(D_w) + len(D_x), len(xbar))

    diff = T_WX - Kmat @ T_DX
    denom = np.linalg.norm(T_WX)
    residual = float(np.linalg.norm(diff) / denom) if denom > 0 else float(np.linalg.norm(diff))
    return Kmat, residual
