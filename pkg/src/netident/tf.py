"""Scalar rational transfer functions in the unit-delay operator.

A transfer function is stored as a pair of real coefficient vectors in
``q^-1`` (one sample of delay), i.e. ``num = [b0, b1, ...]`` encodes
``b0 + b1 q^-1 + b2 q^-2 + ...``.  With the denominator normalised to a
leading (constant) coefficient of 1, every such fraction is proper: its
value stays finite as ``z -> inf``.  Strict properness means a zero
constant numerator term.  Stability is checked on the denominator roots,
which must lie strictly outside the unit disk in the ``q^-1`` variable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RationalTF"]


def _trim(coeffs: tuple[float, ...]) -> tuple[float, ...]:
    """Drop trailing (highest-delay) zero coefficients, keeping at least one."""
    n = len(coeffs)
    while n > 1 and coeffs[n - 1] == 0.0:
        n -= 1
    return coeffs[:n]


@dataclass(frozen=True)
class RationalTF:
    """A proper scalar rational transfer function of the delay operator.

    Invariants enforced at construction: the denominator has a nonzero
    constant coefficient (normalised to 1), so the function is proper.
    """

    num: tuple[float, ...]
    den: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        num = _trim(tuple(float(c) for c in self.num))
        den = _trim(tuple(float(c) for c in self.den))
        if den[0] == 0.0:
            raise ValueError("denominator constant coefficient must be nonzero")
        if den[0] != 1.0:
            num = tuple(c / den[0] for c in num)
            den = tuple(c / den[0] for c in den)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def constant(cls, value: float) -> "RationalTF":
        return cls((float(value),))

    @classmethod
    def fir(cls, coeffs) -> "RationalTF":
        """Finite impulse response: ``coeffs[k]`` multiplies ``q^-k``."""
        return cls(tuple(float(c) for c in coeffs))

    @property
    def is_strictly_proper(self) -> bool:
        return self.num[0] == 0.0

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.num)

    @property
    def feedthrough(self) -> float:
        """The instantaneous (delay-free) gain, i.e. the value at ``z = inf``."""
        return self.num[0] / self.den[0]

    def is_stable(self) -> bool:
        """True when all denominator roots in ``q^-1`` lie outside the unit disk."""
        if len(self.den) == 1:
            return True
        roots = np.roots(self.den[::-1])
        return bool(np.all(np.abs(roots) > 1.0))

    def __call__(self, z: complex) -> complex:
        """Evaluate at a point ``z`` of the complex plane (``x = 1/z``)."""
        x = 1.0 / complex(z)
        return complex(np.polyval(self.num[::-1], x) / np.polyval(self.den[::-1], x))

    def scaled(self, factor: float) -> "RationalTF":
        return RationalTF(tuple(factor * c for c in self.num), self.den)

    def to_json(self) -> dict:
        return {"num": list(self.num), "den": list(self.den)}

    @classmethod
    def from_json(cls, obj: dict) -> "RationalTF":
        return cls(tuple(obj["num"]), tuple(obj.get("den", [1.0])))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"RationalTF(num={list(self.num)}, den={list(self.den)})"
