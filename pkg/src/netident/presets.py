"""Built-in example networks used by the demos and the verification suite.

The four-node pair (``chain4``/``chain4_excited``) is the canonical
illustration of how one extra excitation signal turns an unidentifiable
module query into an identifiable one.  The diamond pair
(``diamond4``/``diamond4_degenerate``) shows fixed couplings conspiring
to defeat a structural rank prediction.  ``mesh8`` is an eight-node
network whose query needs a two-vertex cut and two fresh signals.  The
remaining fixtures drive the indirect reconstruction pipeline.
"""

from __future__ import annotations

import json
from pathlib import Path

from .model import (
    EdgeEntry,
    FeedthroughMode,
    Known,
    NetworkModelSet,
    Parametrized,
    SignalRef,
    serialize_model,
)
from .tf import RationalTF

__all__ = [
    "chain4",
    "chain4_excited",
    "diamond4",
    "diamond4_degenerate",
    "mesh8",
    "mesh8_excited",
    "indirect4",
    "ref5",
    "all_presets",
    "write_preset_files",
]


def _g(t: int, s: int, status=None) -> EdgeEntry:
    return EdgeEntry(SignalRef.internal(t), SignalRef.internal(s), status or Parametrized())


def _r(t: int, k: int, status=None) -> EdgeEntry:
    return EdgeEntry(SignalRef.internal(t), SignalRef.excitation(k), status or Known(RationalTF.constant(1.0)))


def _h(t: int, k: int) -> EdgeEntry:
    return EdgeEntry(SignalRef.internal(t), SignalRef.noise(k), Parametrized())


def chain4() -> NetworkModelSet:
    """Four nodes in a chain with two shortcuts into the last node.

    One noise source excites the head of the chain; the module from node 1
    into node 4 is the usual query target, and the shortcut from node 2 is
    a known coupling.
    """
    entries = (
        _g(1, 0),  # w1 -> w2
        _g(2, 1),  # w2 -> w3
        _g(3, 2),  # w3 -> w4
        _g(3, 0),  # w1 -> w4 (query target)
        _g(3, 1, Known(RationalTF.fir((0.0, 0.5)))),  # w2 -> w4, known
        _h(0, 0),  # e1 -> w1
    )
    return NetworkModelSet(L=4, K=0, p=1, entries=entries)


def chain4_excited() -> NetworkModelSet:
    """The chain network with one extra excitation signal entering node 2."""
    return chain4().with_excitation_at(SignalRef.internal(1))


def diamond4() -> NetworkModelSet:
    """Two excited sources each feeding two sinks; all couplings free."""
    entries = (
        _g(2, 0),
        _g(2, 1),
        _g(3, 0),
        _g(3, 1),
        _r(0, 0),
        _r(1, 1),
    )
    return NetworkModelSet(L=4, K=2, p=0, entries=entries)


def diamond4_degenerate() -> NetworkModelSet:
    """The diamond with fixed couplings chosen so the 2x2 map drops rank.

    The four known one-delay gains satisfy g31*g42 = g41*g32, so the map
    from the two excitations to the two sinks is singular for every member
    of the set even though two disjoint paths exist.
    """
    entries = (
        _g(2, 0, Known(RationalTF.fir((0.0, 0.4)))),
        _g(2, 1, Known(RationalTF.fir((0.0, 0.2)))),
        _g(3, 0, Known(RationalTF.fir((0.0, 0.6)))),
        _g(3, 1, Known(RationalTF.fir((0.0, 0.3)))),
        _r(0, 0),
        _r(1, 1),
    )
    return NetworkModelSet(L=4, K=2, p=0, entries=entries)


def mesh8() -> NetworkModelSet:
    """Eight nodes; the module from node 3 into node 7 is the query target.

    Node 7 collects free couplings from nodes 3, 4, 6 and 8 plus a known
    one from node 5; a single noise source enters node 4; node 7 loops
    back through node 8.  Identifying the target needs a two-vertex cut
    and, with only the noise source present, two fresh signals.
    """
    entries = (
        _g(2, 0),  # w1 -> w3
        _g(2, 1),  # w2 -> w3
        _g(6, 2),  # w3 -> w7 (query target)
        _g(6, 3),  # w4 -> w7
        _g(6, 5),  # w6 -> w7
        _g(6, 7),  # w8 -> w7
        _g(6, 4, Known(RationalTF.fir((0.0, 0.5)))),  # w5 -> w7, known
        _g(7, 6),  # w7 -> w8
        _h(3, 0),  # e1 -> w4
    )
    return NetworkModelSet(L=8, K=0, p=1, entries=entries)


def mesh8_excited() -> NetworkModelSet:
    """The eight-node network after exciting nodes 1 and 5."""
    model = mesh8().with_excitation_at(SignalRef.internal(0))
    return model.with_excitation_at(SignalRef.internal(4))


def indirect4() -> NetworkModelSet:
    """A fully parametrized four-node chain driven by two excitations.

    No couplings are fixed, so the indirect reconstruction setting
    applies; measuring nodes 1, 2 and 4 suffices for the module from
    node 1 into node 4.
    """
    entries = (
        _g(1, 0),
        _g(2, 1),
        _g(3, 2),
        _g(3, 0),
        _g(3, 1),
        _r(0, 0),
        _r(1, 1),
    )
    return NetworkModelSet(L=4, K=2, p=0, entries=entries)


def ref5() -> NetworkModelSet:
    """Five-node reference network for the end-to-end estimation pipeline.

    Three excitations and one noise source; the module from node 1 into
    node 5 is recoverable from measurements of nodes 1, 4 and 5 alone.
    """
    entries = (
        _g(1, 0),  # w1 -> w2
        _g(3, 1),  # w2 -> w4
        _g(3, 2),  # w3 -> w4
        _g(4, 0),  # w1 -> w5 (query target)
        _g(4, 3),  # w4 -> w5
        _r(0, 0),
        _r(1, 1),
        _r(2, 2),
        _h(2, 0),  # e1 -> w3
    )
    return NetworkModelSet(L=5, K=3, p=1, entries=entries)


def all_presets() -> dict:
    return {
        "chain4": chain4(),
        "chain4_excited": chain4_excited(),
        "diamond4": diamond4(),
        "diamond4_degenerate": diamond4_degenerate(),
        "mesh8": mesh8(),
        "mesh8_excited": mesh8_excited(),
        "indirect4": indirect4(),
        "ref5": ref5(),
    }


def write_preset_files(directory) -> list:
    """Write every preset as a JSON model file; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, model in all_presets().items():
        path = directory / f"{name}.json"
        path.write_text(json.dumps(serialize_model(model), indent=2) + "\n")
        paths.append(path)
    return paths
