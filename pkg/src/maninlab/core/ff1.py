"""Arithmetic of the projective line over a prime field.

Closed points are monic irreducible polynomials over F_q plus the point at
infinity. Global sections of O(d) are binary forms of degree d, stored as
coefficient tuples of length d + 1 from the x^d coefficient down to the
constant term (sympy ``galoistools`` dense order). A form vanishes at infinity
exactly when its leading coefficient is zero.
"""

from __future__ import annotations

import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple

from sympy import divisors, isprime
from sympy.functions.combinatorial.numbers import mobius
from sympy.polys.domains import GF, ZZ
from sympy.polys.galoistools import (
    gf_add,
    gf_factor,
    gf_gcd,
    gf_irreducible_p,
    gf_mul,
    gf_strip,
)
from sympy.polys.matrices import DomainMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CurveContext:
    """The base curve P^1 over F_q."""

    q: int
    genus: int = 0
    class_number: int = 1

    def __post_init__(self) -> None:
        if not isprime(self.q):
            raise ValueError(f"q must be prime, got {self.q}")


@dataclass(frozen=True, order=True)
class ClosedPoint:
    """A closed point of P^1: a monic irreducible polynomial, or infinity.

    Infinity is encoded by the empty coefficient tuple and has degree 1.
    """

    degree: int
    poly: Tuple[int, ...] = ()

    @classmethod
    def infinity(cls) -> "ClosedPoint":
        return cls(degree=1, poly=())

    @classmethod
    def from_poly(cls, coeffs: Sequence[int]) -> "ClosedPoint":
        coeffs = tuple(int(c) for c in coeffs)
        if not coeffs or coeffs[0] != 1 or len(coeffs) < 2:
            raise ValueError(f"closed point polynomial must be monic of degree >= 1: {coeffs}")
        return cls(degree=len(coeffs) - 1, poly=coeffs)

    @property
    def is_infinity(self) -> bool:
        return not self.poly

    def form(self) -> Tuple[int, ...]:
        """Binary form cutting out this point."""
        if self.is_infinity:
            return (0, 1)
        return self.poly

    def __repr__(self) -> str:
        if self.is_infinity:
            return "ClosedPoint(inf)"
        return f"ClosedPoint({list(self.poly)})"


@dataclass(frozen=True)
class EffectiveDivisor:
    """A finitely supported multiplicity map from closed points to positive integers."""

    terms: Tuple[Tuple[ClosedPoint, int], ...] = ()
    degree: int = field(init=False, compare=False)

    def __post_init__(self) -> None:
        merged: Dict[ClosedPoint, int] = {}
        for point, mult in self.terms:
            if mult < 0:
                raise ValueError(f"negative multiplicity {mult} at {point!r}")
            if mult:
                merged[point] = merged.get(point, 0) + mult
        normalized = tuple(sorted(merged.items()))
        object.__setattr__(self, "terms", normalized)
        object.__setattr__(self, "degree", sum(p.degree * m for p, m in normalized))

    @classmethod
    def zero(cls) -> "EffectiveDivisor":
        return cls(())

    @classmethod
    def of(cls, points: Iterable[ClosedPoint] | Mapping[ClosedPoint, int]) -> "EffectiveDivisor":
        """Build a divisor from a mapping of multiplicities or a list of points with repeats."""
        if isinstance(points, Mapping):
            return cls(tuple(points.items()))
        return cls(tuple(Counter(points).items()))

    def multiplicity(self, point: ClosedPoint) -> int:
        for p, m in self.terms:
            if p == point:
                return m
        return 0

    @property
    def support(self) -> Tuple[ClosedPoint, ...]:
        return tuple(p for p, _ in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_reduced(self) -> bool:
        """True when every multiplicity is at most one."""
        return all(m <= 1 for _, m in self.terms)

    def as_dict(self) -> Dict[ClosedPoint, int]:
        return dict(self.terms)

    def __add__(self, other: "EffectiveDivisor") -> "EffectiveDivisor":
        return EffectiveDivisor(self.terms + other.terms)

    def scaled(self, factor: int) -> "EffectiveDivisor":
        return EffectiveDivisor(tuple((p, m * factor) for p, m in self.terms))


@dataclass(frozen=True)
class Section:
    """A binary form of degree ``len(coeffs) - 1``; the zero form is allowed."""

    coeffs: Tuple[int, ...]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def vanishes_at_infinity(self) -> bool:
        return self.coeffs[0] == 0


def h0(d: int) -> int:
    """Dimension of the space of global sections of O(d) on P^1."""
    return max(d + 1, 0)


# Binary form arithmetic


def _pad(poly: Sequence[int], degree: int) -> Tuple[int, ...]:
    poly = [int(c) for c in poly]
    if len(poly) > degree + 1:
        raise ValueError(f"polynomial of length {len(poly)} exceeds form degree {degree}")
    return tuple([0] * (degree + 1 - len(poly)) + poly)


def form_mul(a: Sequence[int], b: Sequence[int], p: int) -> Tuple[int, ...]:
    """Product of two binary forms; the degree is the sum of the degrees."""
    degree = len(a) - 1 + len(b) - 1
    return _pad(gf_mul(gf_strip(list(a)), gf_strip(list(b)), p, ZZ), degree)


def form_pow(a: Sequence[int], n: int, p: int) -> Tuple[int, ...]:
    result: Tuple[int, ...] = (1,)
    for _ in range(n):
        result = form_mul(result, a, p)
    return result


def form_add(a: Sequence[int], b: Sequence[int], p: int) -> Tuple[int, ...]:
    if len(a) != len(b):
        raise ValueError(f"cannot add forms of degrees {len(a) - 1} and {len(b) - 1}")
    return _pad(gf_add(gf_strip(list(a)), gf_strip(list(b)), p, ZZ), len(a) - 1)


def forms_have_common_zero(forms: Sequence[Sequence[int]], p: int) -> bool:
    """True when the given binary forms share a zero on P^1 over the algebraic closure."""
    if not forms:
        return True
    if all(f[0] == 0 for f in forms):
        return True
    g: List[int] = []
    for f in forms:
        g = gf_gcd(g, gf_strip(list(f)), p, ZZ)
    # the zero polynomial (every form zero) vanishes everywhere
    return not g or len(g) > 1


# Closed points and divisors


def closed_point_count(q: int, f: int) -> int:
    """Number of degree-f closed points of P^1 over F_q (q may be a prime power)."""
    if f < 1:
        raise ValueError(f"closed point degree must be >= 1, got {f}")
    total = sum(int(mobius(d)) * q ** (f // d) for d in divisors(f))
    return total // f + (1 if f == 1 else 0)


@lru_cache(maxsize=None)
def _points_of_degree(q: int, f: int) -> Tuple[ClosedPoint, ...]:
    points = []
    for tail in itertools.product(range(q), repeat=f):
        poly = [1, *tail]
        if gf_irreducible_p(ZZ.map(poly), q, ZZ):
            points.append(ClosedPoint(degree=f, poly=tuple(poly)))
    logger.debug("Found %s closed points of degree %s over F_%s", len(points), f, q)
    return tuple(points)


def closed_points(ctx: CurveContext, max_degree: int) -> List[ClosedPoint]:
    """Infinity plus every monic irreducible polynomial of degree <= max_degree."""
    if max_degree < 1:
        raise ValueError(f"max_degree must be >= 1, got {max_degree}")
    points = [ClosedPoint.infinity()]
    for f in range(1, max_degree + 1):
        points.extend(_points_of_degree(ctx.q, f))
    return points


def effective_divisors(ctx: CurveContext, degree: int) -> Iterator[EffectiveDivisor]:
    """Yield every effective divisor of the given degree exactly once."""
    if degree < 0:
        raise ValueError(f"divisor degree must be >= 0, got {degree}")
    if degree == 0:
        yield EffectiveDivisor.zero()
        return
    points = closed_points(ctx, degree)

    def extend(start: int, remaining: int, chosen: List[ClosedPoint]) -> Iterator[EffectiveDivisor]:
        if remaining == 0:
            yield EffectiveDivisor.of(chosen)
            return
        for k in range(start, len(points)):
            point = points[k]
            if point.degree > remaining:
                break
            chosen.append(point)
            yield from extend(k, remaining - point.degree, chosen)
            chosen.pop()

    yield from extend(0, degree, [])


def reduced_divisors(points: Sequence[ClosedPoint], max_degree: int) -> Iterator[EffectiveDivisor]:
    """Yield every reduced divisor supported on ``points`` with degree <= max_degree."""
    if max_degree < 0:
        return
    for size in range(len(points) + 1):
        for subset in itertools.combinations(points, size):
            if sum(p.degree for p in subset) <= max_degree:
                yield EffectiveDivisor.of(subset)


def divisor_gcd(divisors_: Sequence[EffectiveDivisor]) -> EffectiveDivisor:
    """Pointwise minimum of multiplicities."""
    if not divisors_:
        raise ValueError("divisor_gcd needs at least one divisor")
    common = divisors_[0].as_dict()
    for other in divisors_[1:]:
        common = {p: min(m, other.multiplicity(p)) for p, m in common.items()}
    return EffectiveDivisor.of(common)


def section_of(divisor: EffectiveDivisor, ctx: CurveContext) -> Section:
    """The canonical section s_D, a form of degree deg(D) vanishing exactly on D."""
    result: Tuple[int, ...] = (1,)
    for point, mult in divisor.terms:
        result = form_mul(result, form_pow(point.form(), mult, ctx.q), ctx.q)
    return Section(result)


def vanishing_divisor(section: Section, ctx: CurveContext) -> EffectiveDivisor:
    """Divisor of zeros of a nonzero form."""
    if section.is_zero():
        raise ValueError("the zero section has no divisor")
    at_infinity = 0
    while section.coeffs[at_infinity] == 0:
        at_infinity += 1
    finite = list(section.coeffs[at_infinity:])
    mults: Dict[ClosedPoint, int] = {}
    if at_infinity:
        mults[ClosedPoint.infinity()] = at_infinity
    if len(finite) > 1:
        _, factors = gf_factor(ZZ.map(finite), ctx.q, ZZ)
        for factor, mult in factors:
            mults[ClosedPoint.from_poly(factor)] = mult
    return EffectiveDivisor.of(mults)


def kernel_count(terms: Sequence[Tuple[Section, int]], ctx: CurveContext) -> int:
    """Dimension of {(t_j) in prod H0(O(d_j)) : sum_j t_j w_j = 0}.

    ``terms`` lists pairs (w_j, d_j). A negative d_j means the unknown t_j is
    forced to vanish. The number of solutions is q ** kernel_count(...).
    """
    active = [(w, d) for w, d in terms if d >= 0]
    if not active:
        return 0
    targets = {w.degree + d for w, d in active}
    if len(targets) != 1:
        raise ValueError(f"degree mismatch among terms: products land in degrees {sorted(targets)}")
    target = targets.pop()
    if len(active) == 1 and not active[0][0].is_zero():
        return 0
    columns: List[List[int]] = []
    for w, d in active:
        low_first = list(reversed(w.coeffs))
        for shift in range(d + 1):
            column = [0] * (target + 1)
            for k, c in enumerate(low_first):
                column[shift + k] = c
            columns.append(column)
    rows = [[col[r] for col in columns] for r in range(target + 1)]
    rank = DomainMatrix.from_list(rows, GF(ctx.q)).rank()
    return len(columns) - rank


def all_forms(degree: int, ctx: CurveContext, nonzero: bool = True) -> Iterator[Tuple[int, ...]]:
    """Every binary form of the given degree over F_q."""
    if degree < 0:
        return
    for coeffs in itertools.product(range(ctx.q), repeat=degree + 1):
        if nonzero and not any(coeffs):
            continue
        yield coeffs
