"""Closed intervals and axis-aligned boxes over exact rationals or floats."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator, Sequence


@dataclass(frozen=True)
class Interval:
    lo: object
    hi: object

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def center(self):
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def contains_open(self, x) -> bool:
        return self.lo < x < self.hi

    def inside_interior_of(self, other: "Interval") -> bool:
        """True iff this interval lies in the open interior of ``other``."""
        return other.lo < self.lo and self.hi < other.hi

    def subset_of(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def intersects(self, other: "Interval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def intersection(self, other: "Interval") -> "Interval | None":
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return None
        return Interval(lo, hi)

    def shifted(self, d) -> "Interval":
        return Interval(self.lo + d, self.hi + d)

    def affine(self, slope, offset) -> "Interval":
        """Image under x -> slope*x + offset."""
        a = slope * self.lo + offset
        b = slope * self.hi + offset
        return Interval(a, b) if a <= b else Interval(b, a)

    def __iter__(self):
        yield self.lo
        yield self.hi


class Box:
    """Product of closed intervals; the norm is the largest side length."""

    __slots__ = ("sides",)

    def __init__(self, sides: Sequence[Interval]):
        self.sides = tuple(sides)

    @classmethod
    def from_bounds(cls, *bounds) -> "Box":
        return cls([Interval(lo, hi) for lo, hi in bounds])

    @property
    def dim(self) -> int:
        return len(self.sides)

    def __getitem__(self, i) -> Interval:
        return self.sides[i]

    def __eq__(self, other):
        return isinstance(other, Box) and self.sides == other.sides

    def __hash__(self):
        return hash(self.sides)

    def __repr__(self):
        inner = ", ".join(f"[{s.lo}, {s.hi}]" for s in self.sides)
        return f"Box({inner})"

    @property
    def norm(self):
        return max(s.width for s in self.sides)

    @property
    def center(self) -> tuple:
        return tuple(s.center for s in self.sides)

    def contains(self, point) -> bool:
        return all(s.contains(x) for s, x in zip(self.sides, point))

    def intersects(self, other: "Box") -> bool:
        return all(a.intersects(b) for a, b in zip(self.sides, other.sides))

    def intersection(self, other: "Box") -> "Box | None":
        out = []
        for a, b in zip(self.sides, other.sides):
            c = a.intersection(b)
            if c is None:
                return None
            out.append(c)
        return Box(out)

    def subset_of(self, other: "Box") -> bool:
        return all(a.subset_of(b) for a, b in zip(self.sides, other.sides))

    def shifted(self, delta) -> "Box":
        return Box([s.shifted(d) for s, d in zip(self.sides, delta)])

    def corners(self) -> Iterator[tuple]:
        return product(*[(s.lo, s.hi) for s in self.sides])

    def __mul__(self, other: "Box") -> "Box":
        return Box(self.sides + other.sides)
