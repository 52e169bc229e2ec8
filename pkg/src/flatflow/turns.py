"""Exact elements of O(2) whose rotation angles are rational fractions of a turn.

A :class:`RationalTurn` ``p/q`` stands for the rotation angle ``2*pi*p/q``.
An :class:`OrthogonalPart` is either the rotation by a turn, or the reflection
about the line through the origin at angle ``pi*turn`` (matrix
``[[cos 2pi t, sin 2pi t], [sin 2pi t, -cos 2pi t]]``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import BadFraction, RationalitySnapAmbiguous, RationalitySnapFailure

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, order=True)
class RationalTurn:
    numerator: int
    denominator: int

    def __post_init__(self):
        if self.denominator <= 0:
            raise BadFraction(f"denominator must be positive, got {self.denominator}")
        if not 0 <= self.numerator < self.denominator:
            raise BadFraction(f"{self.numerator}/{self.denominator} is not in [0, 1)")
        if math.gcd(self.numerator, self.denominator) != 1:
            raise BadFraction(f"{self.numerator}/{self.denominator} is not reduced")

    @classmethod
    def of(cls, value) -> "RationalTurn":
        """Reduce any rational (int, Fraction, "p/q" string) modulo one full turn."""
        f = Fraction(value) % 1
        return cls(f.numerator, f.denominator)

    @classmethod
    def parse(cls, text: str) -> "RationalTurn":
        """Strict parser for the document format: ``"p/q"``, reduced, ``0 <= p < q``."""
        if not isinstance(text, str):
            raise BadFraction(f"turn must be a string 'p/q', got {text!r}")
        parts = text.strip().split("/")
        if len(parts) != 2 or not all(s.isdigit() for s in parts):
            raise BadFraction(f"turn {text!r} is not of the form 'p/q'")
        return cls(int(parts[0]), int(parts[1]))

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    @property
    def radians(self) -> float:
        return TWO_PI * self.numerator / self.denominator

    def __add__(self, other: "RationalTurn") -> "RationalTurn":
        return RationalTurn.of(self.value + other.value)

    def __sub__(self, other: "RationalTurn") -> "RationalTurn":
        return RationalTurn.of(self.value - other.value)

    def __neg__(self) -> "RationalTurn":
        return RationalTurn.of(-self.value)

    def __str__(self):
        return f"{self.numerator}/{self.denominator}"


ZERO = RationalTurn(0, 1)


def cos_sin(turn: RationalTurn) -> tuple[float, float]:
    """cos and sin of ``2*pi*turn``, exact at multiples of a quarter turn."""
    q = turn.value * 4
    if q.denominator == 1:
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][q.numerator]
    if (turn.value * 8).denominator == 1:
        h = math.sqrt(0.5)
        k = (turn.value * 8).numerator
        return [(h, h), (-h, h), (-h, -h), (h, -h)][k // 2]
    a = turn.radians
    return math.cos(a), math.sin(a)


@dataclass(frozen=True, order=True)
class OrthogonalPart:
    turn: RationalTurn = ZERO
    reflect: bool = False

    @classmethod
    def rotation(cls, value) -> "OrthogonalPart":
        return cls(RationalTurn.of(value), False)

    @classmethod
    def reflection(cls, value) -> "OrthogonalPart":
        return cls(RationalTurn.of(value), True)

    @property
    def is_identity(self) -> bool:
        return not self.reflect and self.turn == ZERO

    @property
    def det(self) -> int:
        return -1 if self.reflect else 1

    def __matmul__(self, other: "OrthogonalPart") -> "OrthogonalPart":
        """Composition ``self o other`` (apply ``other`` first)."""
        if not self.reflect and not other.reflect:
            return OrthogonalPart(self.turn + other.turn, False)
        if not self.reflect and other.reflect:
            return OrthogonalPart(self.turn + other.turn, True)
        if self.reflect and not other.reflect:
            return OrthogonalPart(self.turn - other.turn, True)
        return OrthogonalPart(self.turn - other.turn, False)

    def inverse(self) -> "OrthogonalPart":
        if self.reflect:
            return self
        return OrthogonalPart(-self.turn, False)

    def matrix(self) -> tuple[tuple[float, float], tuple[float, float]]:
        c, s = cos_sin(self.turn)
        if self.reflect:
            return ((c, s), (s, -c))
        return ((c, -s), (s, c))

    def apply(self, v) -> tuple[float, float]:
        (a, b), (c, d) = self.matrix()
        return (a * v[0] + b * v[1], c * v[0] + d * v[1])

    def map_angle(self, angle: float) -> float:
        """Image of a direction angle (radians), not reduced."""
        if self.reflect:
            return self.turn.radians - angle
        return angle + self.turn.radians

    def __str__(self):
        return f"{'ref' if self.reflect else 'rot'}({self.turn})"


IDENTITY = OrthogonalPart()


def wrap_angle(a: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


def snap_rational(x: float, tol: float, max_denominator: int) -> Fraction | None:
    """Closest fraction p/q (q <= max_denominator) to ``x`` if within ``tol``.

    Returns None when nothing qualifies. Raises RationalitySnapAmbiguous if two
    distinct fractions both lie within ``tol``.
    """
    best = Fraction(x).limit_denominator(max_denominator)
    if abs(float(best) - x) > tol:
        return None
    # Any other candidate p'/q' differs from best by at least 1/(q q').
    if 2 * tol < 1.0 / (best.denominator * max_denominator):
        return best
    others = []
    for q in range(1, max_denominator + 1):
        p = round(x * q)
        f = Fraction(p, q)
        if f != best and abs(p / q - x) <= tol and f not in others:
            others.append(f)
    if others:
        raise RationalitySnapAmbiguous(x, [best] + others)
    return best


def snap_turn_of_angle(angle: float, tol_radians: float, max_denominator: int,
                       period: float = TWO_PI) -> Fraction:
    """Rational r in [0,1) with ``angle ~ r * period``; raises if irrational at this cap."""
    x = (angle / period) % 1.0
    r = snap_rational(x, tol_radians / period, max_denominator)
    if r is None:
        raise RationalitySnapFailure(
            f"angle {angle!r} is not a rational multiple of {period!r} "
            f"with denominator <= {max_denominator}"
        )
    return r % 1
