"""Numeric helpers shared across the package.

Probabilities are plain floats by default.  Operations that accumulate many
small disjoint-event masses use compensated (Kahan) summation so running
totals such as sink masses stay within 1e-9 of the true sum.  An exact mode
backed by fractions.Fraction is available for audits of graphs whose
realization probabilities underflow doubles; in that mode a float is read as
the exact decimal value of its shortest repr.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

Probability = Union[float, Fraction]

PROB_TOLERANCE = 1e-9


class KahanSum:
    """Compensated accumulator for nonnegative probability masses."""

    __slots__ = ("_total", "_carry")

    def __init__(self, start: float = 0.0) -> None:
        self._total = float(start)
        self._carry = 0.0

    def add(self, x: float) -> None:
        y = x - self._carry
        t = self._total + y
        self._carry = (t - self._total) - y
        self._total = t

    @property
    def value(self) -> float:
        return self._total


def to_fraction(x: Probability) -> Fraction:
    """Exact rational reading of a probability.

    Floats are interpreted through their shortest decimal repr, so 0.1 maps
    to 1/10 rather than to the binary double closest to it.  Thresholded
    integer computations (sample-count floors) then land exactly where the
    decimal arithmetic says they should.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x))


def clamp(x: Probability, lo: Probability, hi: Probability) -> Probability:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def round_sig(x: float, digits: int = 12) -> float:
    """Round to a number of significant digits for stable report output."""
    if x == 0.0:
        return 0.0
    return float(f"{x:.{digits}g}")
