"""Indirect module reconstruction from measured signals only.

When the identifiability condition holds on the strength of measured
excitation signals alone, the target modules can be computed without
touching the unmeasured noise channels: the map from the excitations to
the non-target inputs factors through a disconnecting set, so a right
inverse of the stacked map onto the target inputs and the cut recovers
the modules per frequency.  The price is measuring only the target
inputs, the cut and the output itself, which is usually far less than
every in-neighbor of the output.

The desk-scale pipeline here feeds the reconstruction either with exact
transfer evaluations or with estimates from simulated time series.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import max_vdp, min_disconnecting_set
from .model import (
    Known,
    NetworkModelSet,
    Query,
    SignalKind,
    SignalRef,
    compute_Wj,
    compute_Xj,
    derive_graph,
)
from .oracle import RANK_RTOL, FrequencySamples, NumericModel, numeric_rank, transfer_matrix_T

__all__ = [
    "IndirectSetup",
    "TimeSeries",
    "ExcitationSpec",
    "NoRonlySetupError",
    "KnownEntriesError",
    "InsufficientExcitationError",
    "ReconstructionResult",
    "default_grid",
    "select_indirect_setup",
    "reconstruct_modules",
    "exact_transfer_samples",
    "simulate",
    "estimate_frequency_response",
]


class NoRonlySetupError(RuntimeError):
    """Identifiability relies on noise signals; no excitation-only setup exists."""


class KnownEntriesError(ValueError):
    """Known nonzero modules or noise shapes fall outside this method's setting."""


class InsufficientExcitationError(RuntimeError):
    """The excitation spectrum is too poor for a frequency-response estimate."""


@dataclass(frozen=True)
class IndirectSetup:
    """A measurement/excitation plan that supports indirect reconstruction."""

    j: int
    Wbar: frozenset
    D: frozenset
    Xbar: frozenset
    measured: frozenset

    @property
    def output(self) -> SignalRef:
        return SignalRef.internal(self.j)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Sampled signals, one column per signal; column reads are tracked.

    The access log lets tests assert that a pipeline only ever touched the
    signals it claims to need.
    """

    signals: tuple
    data: np.ndarray  # shape (length, len(signals))
    sample_rate: float = 1.0
    accessed: set = field(default_factory=set, compare=False, repr=False)

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[1] != len(self.signals):
            raise ValueError("data must have one column per signal")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("time series contains non-finite samples")

    @property
    def length(self) -> int:
        return self.data.shape[0]

    def get(self, signal) -> np.ndarray:
        ref = signal if isinstance(signal, SignalRef) else SignalRef.from_name(signal)
        self.accessed.add(ref)
        return self.data[:, self.signals.index(ref)]

    def to_csv(self) -> str:
        header = ",".join(s.name for s in self.signals)
        body = "\n".join(",".join(f"{v:.12g}" for v in row) for row in self.data)
        return f"{header}\n{body}\n"

    @classmethod
    def from_csv(cls, text: str) -> "TimeSeries":
        lines = [ln for ln in text.strip().splitlines() if ln]
        signals = tuple(SignalRef.from_name(name) for name in lines[0].split(","))
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
        return cls(signals, data)


def select_indirect_setup(model: NetworkModelSet, query: Query) -> IndirectSetup:
    """Choose excitations, a cut and a measurement set for the query.

    Usable excitations are the measured external signals with no entry of
    any kind into the output row.  The canonical cut from those signals
    and the targets' out-neighborhood to the other inputs is then tested
    for the full-packing condition.  Failure means identifiability (if
    any) hinges on noise signals, where the indirect route is unavailable
    and a direct method is the fallback.
    """
    query.validate(model)
    j = query.j
    out = SignalRef.internal(j)
    wbar = query.targets
    rest = compute_Wj(model, j) - wbar
    xj = compute_Xj(model, j)
    entries_into_j = {en.source for en in model.entries if en.target == out}
    xbar = frozenset(
        x for x in model.excitations if x in xj and x not in entries_into_j
    )

    graph = derive_graph(model)
    sources = set(graph.out_neighbors(wbar)) | set(xbar)
    cut = min_disconnecting_set(graph, sources, rest)
    count, _ = max_vdp(graph, xbar, set(cut) | wbar)
    if count != len(cut) + len(wbar):
        raise NoRonlySetupError(
            "the query is not identifiable from measured excitations alone; "
            "use a direct method if noise channels are to carry the excitation"
        )
    if any(en.matrix in ("G", "H") and isinstance(en.status, Known) for en in model.entries):
        raise KnownEntriesError(
            "known nonzero modules/noise shapes are outside the indirect setting"
        )
    measured = wbar | {v for v in cut if v.kind is SignalKind.INTERNAL} | {out}
    return IndirectSetup(j, wbar, cut.vertices, xbar, frozenset(measured))


def default_grid(n: int = 64) -> np.ndarray:
    """Frequencies uniform in the open interval (0, pi)."""
    return np.linspace(0.0, np.pi, n + 2)[1:-1]


@dataclass(frozen=True)
class ReconstructionResult:
    """Per-frequency values of the reconstructed modules."""

    points: tuple
    modules: tuple  # (input vertex, output vertex) pairs, target inputs sorted
    values: np.ndarray  # shape (len(points), len(modules)); NaN where skipped
    skipped: tuple  # indices of rank-deficient points


def reconstruct_modules(samples: FrequencySamples, setup: IndirectSetup) -> ReconstructionResult:
    """Recover the target modules from transfer samples by a right inverse.

    Per frequency, the row of the map onto the output is multiplied by the
    right inverse of the stack of the maps onto the target inputs and the
    cut; the leading block of the product is the module row.  Cut members
    that are excitation signals contribute constant indicator rows.  Points
    where the stack loses row rank are skipped and reported.
    """
    wbar = sorted(setup.Wbar)
    d_int = sorted(v for v in setup.D if v.kind is SignalKind.INTERNAL)
    d_ext = sorted(v for v in setup.D if v.kind is not SignalKind.INTERNAL)
    xbar = sorted(setup.Xbar)
    cols = [samples.col_index(x) for x in xbar]
    out_row = samples.row_index(setup.output)
    stack_rows = [samples.row_index(w) for w in wbar + d_int]

    n_need = len(wbar) + len(d_int) + len(d_ext)
    values = np.full((len(samples.points), len(wbar)), np.nan, dtype=complex)
    skipped = []
    selector = np.vstack(
        [np.eye(len(wbar)), np.zeros((n_need - len(wbar), len(wbar)))]
    )
    for k in range(len(samples.points)):
        T = samples.values[k]
        stack = T[np.ix_(stack_rows, cols)]
        ext_rows = np.zeros((len(d_ext), len(cols)), dtype=complex)
        for a, x in enumerate(d_ext):
            if x in setup.Xbar:
                ext_rows[a, xbar.index(x)] = 1.0
        M = np.vstack([stack, ext_rows])
        if numeric_rank(M) < n_need:
            skipped.append(k)
            continue
        row = T[out_row, cols]
        values[k] = row @ np.linalg.pinv(M, rcond=RANK_RTOL) @ selector
    modules = tuple((w, setup.output) for w in wbar)
    return ReconstructionResult(tuple(samples.points), modules, values, tuple(skipped))


def exact_transfer_samples(model: NumericModel, setup: IndirectSetup, grid: np.ndarray) -> FrequencySamples:
    """Analytic transfer evaluations on the unit circle for the setup's signals."""
    rows = tuple(sorted(setup.measured))
    cols = tuple(sorted(setup.Xbar))
    points = tuple(np.exp(1j * np.asarray(grid)))
    values = np.zeros((len(points), len(rows), len(cols)), dtype=complex)
    for k, z in enumerate(points):
        T = transfer_matrix_T(model, z)
        ridx = [r.index for r in rows]
        cidx = [model.external_column(x) for x in cols]
        values[k] = T[np.ix_(ridx, cidx)]
    return FrequencySamples(points, rows, cols, values)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExcitationSpec:
    """White-noise driving variances, one per excitation and noise channel."""

    r_variance: tuple
    e_variance: tuple

    @classmethod
    def white(cls, model: NetworkModelSet, r_var: float = 1.0, e_var: float = 1.0) -> "ExcitationSpec":
        return cls((float(r_var),) * model.K, (float(e_var),) * model.p)


def _impulse_response(model: NumericModel, tol: float = 1e-12, max_len: int = 1 << 15) -> np.ndarray:
    """Impulse response of the external-to-internal map, by frequency sampling.

    The closed loop is stable by construction, so the response decays
    geometrically; the FFT length doubles until circular aliasing is
    below ``tol``.
    """
    nfft = 256
    while True:
        freqs = np.exp(2j * np.pi * np.arange(nfft // 2 + 1) / nfft)
        T = np.array([transfer_matrix_T(model, z) for z in freqs])
        h = np.fft.irfft(T, n=nfft, axis=0)
        peak = np.abs(h).max() if h.size else 0.0
        tail = np.abs(h[nfft // 2 :]).max() if h.size else 0.0
        if h.size == 0 or peak == 0.0 or tail <= tol * max(peak, 1.0):
            return h
        if nfft >= max_len:
            raise RuntimeError("impulse response decays too slowly to truncate")
        nfft *= 2


def simulate(
    model: NumericModel,
    excitation: ExcitationSpec,
    N: int,
    seed: int,
    burn_in: int = 512,
) -> TimeSeries:
    """Generate ``N`` samples of all internal signals under white-noise driving.

    The internal signals are the stable closed-loop response to the drawn
    excitation and noise sequences (computed exactly, zero initial state,
    by convolution with the closed-loop impulse response); the first
    ``burn_in`` samples are discarded.  Returned columns are the internal
    signals followed by the measured excitations.
    """
    if len(excitation.r_variance) != model.K or len(excitation.e_variance) != model.p:
        raise ValueError("excitation spec does not match the model dimensions")
    rng = np.random.default_rng(seed)
    total = N + burn_in
    std = np.sqrt(np.concatenate([excitation.r_variance, excitation.e_variance]))
    u = rng.standard_normal((total, model.K + model.p)) * std

    if model.K + model.p == 0:
        w = np.zeros((total, model.L))
    else:
        h = _impulse_response(model)
        nfft = int(2 ** np.ceil(np.log2(total + h.shape[0])))
        U = np.fft.rfft(u, n=nfft, axis=0)
        H = np.fft.rfft(h, n=nfft, axis=0)
        w = np.fft.irfft(np.einsum("fij,fj->fi", H, U), n=nfft, axis=0)[:total]
    if w.size and np.abs(w).max() > 1e9:
        raise RuntimeError("simulation diverged; the instantiated model is not stable")

    signals = model.model_set.internals + model.model_set.excitations
    data = np.hstack([w[burn_in:], u[burn_in:, : model.K]])
    return TimeSeries(signals, data)


def estimate_frequency_response(
    data: TimeSeries,
    inputs,
    outputs,
    grid: np.ndarray,
    n_taps: int = 32,
) -> tuple[FrequencySamples, dict]:
    """Least-squares frequency response of the map from ``inputs`` to ``outputs``.

    A finite impulse response of ``n_taps`` lags per input is fitted by
    linear least squares over the whole record and evaluated on the grid.
    Diagnostics carry the regressor conditioning and, per grid point, the
    condition number of the averaged input cross-spectrum (poor excitation
    at a frequency shows up there).
    """
    inputs = tuple(i if isinstance(i, SignalRef) else SignalRef.from_name(i) for i in inputs)
    outputs = tuple(o if isinstance(o, SignalRef) else SignalRef.from_name(o) for o in outputs)
    U = np.column_stack([data.get(x) for x in inputs])
    Y = np.column_stack([data.get(y) for y in outputs])
    N, m = U.shape
    if N <= n_taps * m * 4:
        raise InsufficientExcitationError("record too short for the requested lag count")

    windows = np.lib.stride_tricks.sliding_window_view(U, n_taps, axis=0)[:, :, ::-1]
    design = windows.reshape(N - n_taps + 1, m * n_taps)
    target = Y[n_taps - 1 :]
    theta, _, rank, sv = np.linalg.lstsq(design, target, rcond=None)
    regressor_cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if rank < m * n_taps or regressor_cond > 1e10:
        raise InsufficientExcitationError("near-singular regressor; inputs are not exciting enough")

    grid = np.asarray(grid, dtype=float)
    phases = np.exp(-1j * np.outer(grid, np.arange(n_taps)))  # (n_f, n_taps)
    coeffs = theta.reshape(m, n_taps, len(outputs))
    values = np.einsum("fk,mko->fom", phases, coeffs)

    # Bartlett-averaged input cross-spectrum conditioning per grid point
    seg_len = min(256, N // 8)
    n_seg = N // seg_len
    segs = U[: n_seg * seg_len].reshape(n_seg, seg_len, m)
    dft = np.exp(-1j * np.outer(grid, np.arange(seg_len)))  # (n_f, seg_len)
    spectra = np.einsum("ft,stm->sfm", dft, segs) / np.sqrt(seg_len)
    phi = np.einsum("sfm,sfn->fmn", spectra, spectra.conj()) / n_seg
    cond_input = np.array([np.linalg.cond(phi[f]) for f in range(len(grid))])

    samples = FrequencySamples(tuple(np.exp(1j * grid)), outputs, inputs, values)
    diagnostics = {"regressor_cond": regressor_cond, "input_spectrum_cond": cond_input, "n_taps": n_taps}
    return samples, diagnostics
