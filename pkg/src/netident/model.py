"""Network model sets: structure, parsing, validation and graph induction.

A model set describes a family of linear dynamic networks over ``L``
measured internal signals driven by ``K`` measured excitation signals and
``p`` unmeasured white-noise sources.  Entries of the internal coupling
matrix ``G`` and of the input matrices ``R`` (excitations) and ``H``
(noise shaping) are each either parametrized (unknown), known (a fixed
rational transfer function) or absent (fixed zero).  The sparsity pattern
induces a directed graph on which all structural analysis runs.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from functools import cached_property, total_ordering
from typing import Iterable, Union

from .graph import DiGraph, PathFamily
from .tf import RationalTF

__all__ = [
    "SignalKind",
    "SignalRef",
    "Parametrized",
    "Known",
    "EdgeEntry",
    "FeedthroughMode",
    "AssumptionFlags",
    "NetworkModelSet",
    "Query",
    "ModelFormatError",
    "InvalidQueryError",
    "parse_model",
    "serialize_model",
    "compute_Wj",
    "compute_Xj",
    "known_in_neighbors",
    "derive_graph",
    "validate_assumptions",
    "AssumptionReport",
    "to_dot",
]

SCHEMA_VERSION = 1


class ModelFormatError(ValueError):
    """The model document violates the schema or a structural invariant."""


class InvalidQueryError(ValueError):
    """The query does not address parametrized modules of the output row."""


class SignalKind(enum.Enum):
    INTERNAL = "w"
    EXCITATION = "r"
    NOISE = "e"


_KIND_ORDER = {SignalKind.INTERNAL: 0, SignalKind.EXCITATION: 1, SignalKind.NOISE: 2}


@total_ordering
@dataclass(frozen=True)
class SignalRef:
    """A signal/vertex: one of the internal ``w``, excitation ``r`` or noise ``e``."""

    kind: SignalKind
    index: int

    @property
    def name(self) -> str:
        return f"{self.kind.value}{self.index + 1}"

    @classmethod
    def internal(cls, index: int) -> "SignalRef":
        return cls(SignalKind.INTERNAL, index)

    @classmethod
    def excitation(cls, index: int) -> "SignalRef":
        return cls(SignalKind.EXCITATION, index)

    @classmethod
    def noise(cls, index: int) -> "SignalRef":
        return cls(SignalKind.NOISE, index)

    @classmethod
    def from_name(cls, name: str) -> "SignalRef":
        name = name.strip().lower()
        kinds = {k.value: k for k in SignalKind}
        if len(name) < 2 or name[0] not in kinds or not name[1:].isdigit() or int(name[1:]) < 1:
            raise ValueError(f"not a signal name: {name!r} (expected e.g. 'w3', 'r1', 'e2')")
        return cls(kinds[name[0]], int(name[1:]) - 1)

    def __lt__(self, other: "SignalRef") -> bool:
        return (_KIND_ORDER[self.kind], self.index) < (_KIND_ORDER[other.kind], other.index)

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Parametrized:
    strictly_proper: bool = True


@dataclass(frozen=True)
class Known:
    tf: RationalTF


EntryStatus = Union[Parametrized, Known]

_MATRIX_OF_KIND = {SignalKind.INTERNAL: "G", SignalKind.EXCITATION: "R", SignalKind.NOISE: "H"}


@dataclass(frozen=True)
class EdgeEntry:
    """One nonzero entry of ``G``, ``R`` or ``H`` (the matrix follows from the source kind)."""

    target: SignalRef
    source: SignalRef
    status: EntryStatus

    @property
    def matrix(self) -> str:
        return _MATRIX_OF_KIND[self.source.kind]

    @property
    def is_parametrized(self) -> bool:
        return isinstance(self.status, Parametrized)

    @property
    def feedthrough(self) -> bool:
        """Whether the entry reacts instantaneously (no delay)."""
        if isinstance(self.status, Parametrized):
            return not self.status.strictly_proper
        return self.status.tf.feedthrough != 0.0


class FeedthroughMode(enum.Enum):
    STRICTLY_PROPER = "strictly_proper"
    NO_ALGEBRAIC_LOOPS = "no_algebraic_loops"


@dataclass(frozen=True)
class AssumptionFlags:
    """Declared (not structurally checkable) parametrization properties."""

    independent_parametrization: bool = True
    open_parametrization: bool = True


@dataclass(frozen=True)
class NetworkModelSet:
    L: int
    K: int
    p: int
    entries: tuple
    feedthrough_mode: FeedthroughMode = FeedthroughMode.STRICTLY_PROPER
    assumption_flags: AssumptionFlags = AssumptionFlags()

    def __post_init__(self):
        object.__setattr__(self, "entries", _canonical_entries(self.entries))
        _check_invariants(self)

    # -- convenience views -------------------------------------------------

    @cached_property
    def entry_map(self) -> dict:
        return {(en.target, en.source): en for en in self.entries}

    @cached_property
    def internals(self) -> tuple:
        return tuple(SignalRef.internal(i) for i in range(self.L))

    @cached_property
    def excitations(self) -> tuple:
        return tuple(SignalRef.excitation(k) for k in range(self.K))

    @cached_property
    def noises(self) -> tuple:
        return tuple(SignalRef.noise(k) for k in range(self.p))

    @property
    def externals(self) -> tuple:
        return self.excitations + self.noises

    def entry(self, target: SignalRef, source: SignalRef) -> EdgeEntry | None:
        return self.entry_map.get((target, source))

    def signal(self, name_or_ref) -> SignalRef:
        ref = name_or_ref if isinstance(name_or_ref, SignalRef) else SignalRef.from_name(name_or_ref)
        bound = {SignalKind.INTERNAL: self.L, SignalKind.EXCITATION: self.K, SignalKind.NOISE: self.p}
        if not 0 <= ref.index < bound[ref.kind]:
            raise ValueError(f"signal {ref.name} out of range for this model")
        return ref

    def with_excitation_at(self, vertex: SignalRef, tf: RationalTF | None = None) -> "NetworkModelSet":
        """A new model set with one fresh excitation signal entering ``vertex``.

        The new column of ``R`` carries a known entry (unit transfer by
        default), so the fresh signal never adds unknowns to any row.
        """
        if vertex.kind is not SignalKind.INTERNAL:
            raise ValueError("excitation signals attach to internal vertices")
        new = EdgeEntry(vertex, SignalRef.excitation(self.K), Known(tf or RationalTF.constant(1.0)))
        return NetworkModelSet(
            self.L, self.K + 1, self.p, self.entries + (new,), self.feedthrough_mode, self.assumption_flags
        )


def _canonical_entries(entries: Iterable[EdgeEntry]) -> tuple:
    order = lambda en: (("G", "R", "H").index(en.matrix), en.target.index, en.source.index)
    result = tuple(sorted(entries, key=order))
    seen = set()
    for en in result:
        key = (en.target, en.source)
        if key in seen:
            raise ModelFormatError(f"duplicate entry for ({en.target}, {en.source})")
        seen.add(key)
    return result


def _check_invariants(model: NetworkModelSet) -> None:
    if min(model.L, model.K, model.p) < 0 or model.L == 0:
        raise ModelFormatError("need L >= 1 and nonnegative K, p")
    if model.p > model.L:
        raise ModelFormatError("noise dimension p cannot exceed L")
    used_noise_cols = set()
    for en in model.entries:
        if en.target.kind is not SignalKind.INTERNAL or not 0 <= en.target.index < model.L:
            raise ModelFormatError(f"entry target {en.target} is not a valid internal signal")
        bound = {SignalKind.INTERNAL: model.L, SignalKind.EXCITATION: model.K, SignalKind.NOISE: model.p}
        if not 0 <= en.source.index < bound[en.source.kind]:
            raise ModelFormatError(f"entry source {en.source} is out of range")
        if en.source == en.target:
            raise ModelFormatError(f"self-loop entry at {en.target} (the coupling matrix is hollow)")
        if isinstance(en.status, Known):
            if en.status.tf.is_zero:
                raise ModelFormatError(
                    f"known transfer at ({en.target}, {en.source}) is zero; omit the entry instead"
                )
            if not en.status.tf.is_stable():
                raise ModelFormatError(f"known transfer at ({en.target}, {en.source}) is unstable")
            if (
                model.feedthrough_mode is FeedthroughMode.STRICTLY_PROPER
                and en.matrix == "G"
                and not en.status.tf.is_strictly_proper
            ):
                raise ModelFormatError(
                    f"known module at ({en.target}, {en.source}) has feedthrough in strictly-proper mode"
                )
        elif (
            model.feedthrough_mode is FeedthroughMode.STRICTLY_PROPER
            and en.matrix == "G"
            and not en.status.strictly_proper
        ):
            raise ModelFormatError(
                f"module at ({en.target}, {en.source}) is not strictly proper but the mode demands it"
            )
        if en.source.kind is SignalKind.NOISE:
            used_noise_cols.add(en.source.index)
    missing = set(range(model.p)) - used_noise_cols
    if missing:
        raise ModelFormatError(f"noise columns with no entry: {sorted(missing)}")


@dataclass(frozen=True)
class Query:
    """Ask about the modules from ``targets`` into output row ``j``."""

    j: int
    targets: frozenset

    def __init__(self, j: int, targets: Iterable[SignalRef]):
        object.__setattr__(self, "j", int(j))
        object.__setattr__(self, "targets", frozenset(targets))
        if not self.targets:
            raise InvalidQueryError("query needs a non-empty target set")

    @property
    def output(self) -> SignalRef:
        return SignalRef.internal(self.j)

    def validate(self, model: NetworkModelSet) -> None:
        if not 0 <= self.j < model.L:
            raise InvalidQueryError(f"output index {self.j} out of range")
        wj = compute_Wj(model, self.j)
        extra = self.targets - wj
        if extra:
            raise InvalidQueryError(
                f"targets {sorted(extra)} are not parametrized inputs of {self.output.name}"
            )


# ---------------------------------------------------------------------------
# derived structure
# ---------------------------------------------------------------------------


def compute_Wj(model: NetworkModelSet, j: int) -> frozenset:
    """Internal signals with a parametrized (unknown) module into row ``j``."""
    tgt = SignalRef.internal(j)
    model.signal(tgt)
    return frozenset(
        en.source for en in model.entries if en.target == tgt and en.matrix == "G" and en.is_parametrized
    )


def compute_Xj(model: NetworkModelSet, j: int) -> frozenset:
    """External signals whose entry into row ``j`` is absent or known.

    These are the signals that add no unknowns to the row and therefore
    act as usable excitation sources in identifiability analysis.
    """
    tgt = SignalRef.internal(j)
    model.signal(tgt)
    unknown_into_j = {
        en.source for en in model.entries if en.target == tgt and en.matrix != "G" and en.is_parametrized
    }
    return frozenset(x for x in model.externals if x not in unknown_into_j)


def known_in_neighbors(model: NetworkModelSet, j: int) -> frozenset:
    """Internal signals entering row ``j`` through a known module."""
    tgt = SignalRef.internal(j)
    return frozenset(
        en.source for en in model.entries if en.target == tgt and en.matrix == "G" and not en.is_parametrized
    )


def derive_graph(model: NetworkModelSet) -> DiGraph:
    """The directed graph induced by all entries that are not fixed zero.

    Known entries contribute edges just like parametrized ones; external
    vertices have no incoming edges.
    """
    vertices = model.internals + model.excitations + model.noises
    edges = [(en.source, en.target) for en in model.entries]
    return DiGraph(vertices, edges)


# ---------------------------------------------------------------------------
# assumption diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionReport:
    hollow: bool
    feedthrough_mode: FeedthroughMode
    feedthrough_ok: bool
    algebraic_loops: tuple
    declared_independent_parametrization: bool
    declared_open_parametrization: bool
    fixed_rank_report: object | None
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def _feedthrough_cycles(model: NetworkModelSet) -> list:
    """Cycles of instantaneous (delay-free) modules, if any."""
    feed = {v: [] for v in model.internals}
    for en in model.entries:
        if en.matrix == "G" and en.feedthrough:
            feed[en.source].append(en.target)
    color = {v: 0 for v in model.internals}
    stack: list = []
    cycles = []

    def visit(v):
        color[v] = 1
        stack.append(v)
        for w in feed[v]:
            if color[w] == 0:
                visit(w)
            elif color[w] == 1:
                cycles.append(tuple(stack[stack.index(w) :]))
        stack.pop()
        color[v] = 2

    for v in model.internals:
        if color[v] == 0:
            visit(v)
    return cycles


def validate_assumptions(model: NetworkModelSet, check_fixed_rank: bool = True, **fixed_rank_kwargs) -> AssumptionReport:
    """Structural diagnostics for the standing well-posedness assumptions.

    Hollowness and flag consistency are re-checked, algebraic loops are
    searched on the feedthrough subgraph when that mode is declared, the
    user-declared parametrization flags are echoed, and (optionally) the
    fixed-entry rank consistency check is run.  Violations are reported,
    never raised.
    """
    violations = []
    hollow = all(en.source != en.target for en in model.entries)
    if not hollow:
        violations.append("coupling matrix is not hollow")

    loops: tuple = ()
    feedthrough_ok = True
    if model.feedthrough_mode is FeedthroughMode.STRICTLY_PROPER:
        bad = [
            en
            for en in model.entries
            if en.matrix == "G" and en.feedthrough
        ]
        if bad:
            feedthrough_ok = False
            violations.append("strictly-proper mode but modules with feedthrough present")
    else:
        loops = tuple(_feedthrough_cycles(model))
        if loops:
            feedthrough_ok = False
            names = ["->".join(v.name for v in c) for c in loops]
            violations.append(f"algebraic loop(s) through {names}")

    fixed_report = None
    if check_fixed_rank:
        from .ident import check_assumption5

        fixed_report = check_assumption5(model, **fixed_rank_kwargs)
        if not fixed_report.passed:
            violations.append(
                "fixed entries create a rank deficiency not visible in the sparsity pattern"
            )

    flags = model.assumption_flags
    if not flags.independent_parametrization:
        violations.append("declared: parameters are not independently parametrized")
    if not flags.open_parametrization:
        violations.append("declared: parametrized family is not open in its structure class")

    return AssumptionReport(
        hollow=hollow,
        feedthrough_mode=model.feedthrough_mode,
        feedthrough_ok=feedthrough_ok,
        algebraic_loops=loops,
        declared_independent_parametrization=flags.independent_parametrization,
        declared_open_parametrization=flags.open_parametrization,
        fixed_rank_report=fixed_report,
        violations=tuple(violations),
    )


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------


def parse_model(document: Union[str, bytes, dict]) -> NetworkModelSet:
    """Parse and validate a model document (JSON text or an already-loaded dict).

    Schema::

        { "L": int, "K": int, "p": int,
          "feedthrough_mode": "strictly_proper" | "no_algebraic_loops",
          "entries": [ { "matrix": "G"|"R"|"H", "row": int, "col": int,
                         "status": "parametrized"|"known",
                         "strictly_proper": bool,
                         "tf": {"num": [...], "den": [...]} } ] }

    Rows and columns are 0-based.  ``tf`` is required for known entries;
    ``strictly_proper`` defaults to true for parametrized entries and is
    derived from ``tf`` for known ones.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ModelFormatError("model document must be a JSON object")

    def need(key, types):
        if key not in document:
            raise ModelFormatError(f"missing field {key!r}")
        if not isinstance(document[key], types):
            raise ModelFormatError(f"field {key!r} has the wrong type")
        return document[key]

    version = document.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ModelFormatError(f"unsupported schema_version {version!r}")
    L = need("L", int)
    K = need("K", int)
    p = need("p", int)
    mode_raw = document.get("feedthrough_mode", "strictly_proper")
    try:
        mode = FeedthroughMode(mode_raw)
    except ValueError:
        raise ModelFormatError(f"unknown feedthrough_mode {mode_raw!r}") from None
    raw_entries = need("entries", list)

    kind_of_matrix = {"G": SignalKind.INTERNAL, "R": SignalKind.EXCITATION, "H": SignalKind.NOISE}
    entries = []
    for i, raw in enumerate(raw_entries):
        if not isinstance(raw, dict):
            raise ModelFormatError(f"entries[{i}] must be an object")
        matrix = raw.get("matrix")
        if matrix not in kind_of_matrix:
            raise ModelFormatError(f"entries[{i}].matrix must be 'G', 'R' or 'H'")
        if not isinstance(raw.get("row"), int) or not isinstance(raw.get("col"), int):
            raise ModelFormatError(f"entries[{i}] needs integer 'row' and 'col'")
        target = SignalRef.internal(raw["row"])
        source = SignalRef(kind_of_matrix[matrix], raw["col"])
        status_raw = raw.get("status")
        if status_raw == "parametrized":
            status: EntryStatus = Parametrized(bool(raw.get("strictly_proper", True)))
        elif status_raw == "known":
            if "tf" not in raw:
                raise ModelFormatError(f"entries[{i}] is known but has no 'tf'")
            try:
                tf = RationalTF.from_json(raw["tf"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ModelFormatError(f"entries[{i}].tf is malformed: {exc}") from exc
            if "strictly_proper" in raw and bool(raw["strictly_proper"]) != tf.is_strictly_proper:
                raise ModelFormatError(
                    f"entries[{i}]: strictly_proper flag contradicts the given transfer"
                )
            status = Known(tf)
        else:
            raise ModelFormatError(f"entries[{i}].status must be 'parametrized' or 'known'")
        entries.append(EdgeEntry(target, source, status))

    flags_raw = document.get("assumption_flags", {})
    if not isinstance(flags_raw, dict):
        raise ModelFormatError("assumption_flags must be an object")
    flags = AssumptionFlags(
        independent_parametrization=bool(flags_raw.get("independent_parametrization", True)),
        open_parametrization=bool(flags_raw.get("open_parametrization", True)),
    )
    return NetworkModelSet(L, K, p, tuple(entries), mode, flags)


def serialize_model(model: NetworkModelSet) -> dict:
    """The JSON document of a model set; re-parsing reproduces the model."""
    entries = []
    for en in model.entries:
        raw = {"matrix": en.matrix, "row": en.target.index, "col": en.source.index}
        if isinstance(en.status, Parametrized):
            raw["status"] = "parametrized"
            raw["strictly_proper"] = en.status.strictly_proper
        else:
            raw["status"] = "known"
            raw["strictly_proper"] = en.status.tf.is_strictly_proper
            raw["tf"] = en.status.tf.to_json()
        entries.append(raw)
    return {
        "schema_version": SCHEMA_VERSION,
        "L": model.L,
        "K": model.K,
        "p": model.p,
        "feedthrough_mode": model.feedthrough_mode.value,
        "assumption_flags": {
            "independent_parametrization": model.assumption_flags.independent_parametrization,
            "open_parametrization": model.assumption_flags.open_parametrization,
        },
        "entries": entries,
    }


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------


def to_dot(
    model: NetworkModelSet,
    query: Query | None = None,
    witness_cut: Iterable[SignalRef] = (),
    witness_paths: PathFamily | None = None,
) -> str:
    """Graphviz rendering of the induced graph.

    Internal vertices are circles and external ones squares; known edges
    are drawn doubled, the queried modules bold.  A witness disconnecting
    set is filled red and witness paths are colored blue.
    """
    cut = set(witness_cut)
    path_edges = set()
    path_vertices = set()
    if witness_paths is not None:
        for pth in witness_paths:
            path_vertices.update(pth)
            path_edges.update(zip(pth, pth[1:]))
    target_edges = set()
    if query is not None:
        target_edges = {(t, query.output) for t in query.targets}

    lines = ["digraph network {", "  rankdir=LR;"]
    for v in model.internals + model.excitations + model.noises:
        shape = "circle" if v.kind is SignalKind.INTERNAL else "square"
        attrs = [f"shape={shape}"]
        if v in cut:
            attrs.append('style=filled fillcolor="indianred1"')
        elif v in path_vertices:
            attrs.append('color="blue3"')
        lines.append(f'  "{v.name}" [{" ".join(attrs)}];')
    for en in model.entries:
        attrs = []
        if not en.is_parametrized:
            attrs.append('color="black:invis:black"')
        if (en.source, en.target) in target_edges:
            attrs.append("penwidth=2.5 style=bold")
        if (en.source, en.target) in path_edges:
            attrs.append('color="blue3" penwidth=2.0')
        suffix = f' [{" ".join(attrs)}]' if attrs else ""
        lines.append(f'  "{en.source.name}" -> "{en.target.name}"{suffix};')
    lines.append("}")
    return "\n".join(lines)
