"""Two-sided enclosures for metric and distance quantities.

A Bracket is a certified (lower, upper) interval with provenance tags: lowers
come from closed forms, projections or superdomain inclusions, uppers from
constructive candidates (oracle values, certified analytic discs, inscribed
subdomains, curves).  Combining brackets always rounds conservatively.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

_SLOP = 1e-12

#: provenance tags used by estimators
TAGS = ("oracle", "disc-optimization", "half-space", "curve", "inclusion",
        "heuristic", "vacuous")


@dataclass(frozen=True)
class Bracket:
    lower: float
    upper: float
    method_lower: str = "vacuous"
    method_upper: str = "vacuous"

    def __post_init__(self):
        lo, up = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(up)):
            raise ValueError(f"bracket bounds must be finite, got [{lo}, {up}]")
        if lo > up + _SLOP:
            raise ValueError(f"inconsistent bracket [{lo}, {up}]")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x: float, slop: float = 1e-9) -> bool:
        return self.lower - slop <= x <= self.upper + slop

    def __str__(self):
        return (f"[{self.lower:.9g}, {self.upper:.9g}] "
                f"({self.method_lower}/{self.method_upper})")


def exact(value: float, tag: str = "oracle") -> Bracket:
    return Bracket(value, value, tag, tag)


def from_bounds(lowers, uppers) -> Bracket:
    """Best bracket from candidate (value, tag) bounds on both sides."""
    lo, lo_tag = max(lowers, key=lambda p: p[0]) if lowers else (0.0, "vacuous")
    up, up_tag = min(uppers, key=lambda p: p[0])
    if lo > up:
        # numerically crossed certificates; keep validity, flag the slop
        if lo > up + 1e-7:
            raise ValueError(
                f"certified bounds crossed: lower {lo} ({lo_tag}) > upper {up} ({up_tag})"
            )
        lo = up
    return Bracket(lo, up, lo_tag, up_tag)


def add(a: Bracket, b: Bracket) -> Bracket:
    return Bracket(a.lower + b.lower, a.upper + b.upper,
                   _join(a.method_lower, b.method_lower),
                   _join(a.method_upper, b.method_upper))


def sub(a: Bracket, b: Bracket) -> Bracket:
    """Conservative a - b (may be negative)."""
    return Bracket(a.lower - b.upper, a.upper - b.lower,
                   _join(a.method_lower, b.method_upper),
                   _join(a.method_upper, b.method_lower))


def scale(a: Bracket, c: float) -> Bracket:
    if c < 0:
        raise ValueError("scale factor must be nonnegative")
    return Bracket(a.lower * c, a.upper * c, a.method_lower, a.method_upper)


def mul(a: Bracket, b: Bracket) -> Bracket:
    """Product of nonnegative brackets."""
    if a.lower < -_SLOP or b.lower < -_SLOP:
        raise ValueError("mul expects nonnegative brackets")
    return Bracket(max(a.lower, 0.0) * max(b.lower, 0.0), a.upper * b.upper,
                   _join(a.method_lower, b.method_lower),
                   _join(a.method_upper, b.method_upper))


def div(a: Bracket, b: Bracket, floor: float = 1e-9) -> Bracket:
    """Conservative a / b for nonnegative a and strictly positive b.

    Refuses (returns None) when b's certified lower does not clear ``floor``;
    callers flag such rows instead of dividing.
    """
    if b.lower <= floor:
        return None
    return Bracket(max(a.lower, 0.0) / b.upper, a.upper / b.lower,
                   _join(a.method_lower, b.method_upper),
                   _join(a.method_upper, b.method_lower))


def minimum(brs) -> Bracket:
    """Bracket of min over finitely many bracketed values."""
    brs = list(brs)
    lo = min(brs, key=lambda b: b.lower)
    up = min(brs, key=lambda b: b.upper)
    return Bracket(lo.lower, up.upper, lo.method_lower, up.method_upper)


def tanh_inv(a: Bracket) -> Bracket:
    """Monotone map atanh on a bracket in [0, 1)."""
    up = a.upper
    if up >= 1.0:
        raise ValueError("atanh needs upper < 1")
    return Bracket(math.atanh(max(a.lower, 0.0)), math.atanh(up),
                   a.method_lower, a.method_upper)


def tanh(a: Bracket) -> Bracket:
    return Bracket(math.tanh(max(a.lower, 0.0)), math.tanh(a.upper),
                   a.method_lower, a.method_upper)


def _join(t1: str, t2: str) -> str:
    if t1 == t2:
        return t1
    if "heuristic" in (t1, t2):
        return "heuristic"
    return f"{t1}+{t2}"
