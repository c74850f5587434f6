"""Rational polyhedral geometry on the dual of the Picard lattice.

Points y are integer or rational vectors in the dual basis of the surface's
Picard basis, so <y, D> is the dot product with the class coordinates. The
anticanonical section {y in C_eff^dual : <y, -K> = 1} is the base polytope of
every volume computed here, and volumes are Leray-normalized with respect to
the form <., -K>: the lattice volume of {0 <= <., -K> <= 1} over a polytope
equals the polytope's volume divided by the rank.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import Matrix, Rational, ilcm
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from maninlab.core.errors import SurfaceDataError
from maninlab.core.surface import (
    AdmissibleChoice,
    CoxPresentation,
    PicClass,
    admissible_choices,
    anticanonical,
    pairing,
)
from maninlab.models.records import ConeRow

logger = logging.getLogger(__name__)

Vector = Tuple[Fraction, ...]
Constraint = Tuple[Vector, Fraction]

UNION_METHODS = ("complement", "inclusion_exclusion")


def _vector(values: Iterable[Union[int, Fraction]]) -> Vector:
    return tuple(Fraction(v) for v in values)


def _dot(a: Sequence[Fraction], x: Sequence[Fraction]) -> Fraction:
    return sum((ai * xi for ai, xi in zip(a, x)), Fraction(0))


def _qq(rows: Sequence[Sequence[Fraction]], ncols: int) -> DomainMatrix:
    entries = [[(Fraction(x).numerator, Fraction(x).denominator) for x in row] for row in rows]
    if not entries:
        return DomainMatrix.zeros((0, ncols), QQ)
    return DomainMatrix.from_list(entries, QQ)


def _fraction(value) -> Fraction:
    return Fraction(int(QQ.numer(value)), int(QQ.denom(value)))


def _solve(rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> Optional[Vector]:
    """Unique solution of a square system, or None when it is singular."""
    n = len(rows)
    matrix = _qq(rows, n)
    if matrix.det() == QQ.zero:
        return None
    solution = matrix.lu_solve(_qq([[b] for b in rhs], 1))
    return tuple(_fraction(row[0]) for row in solution.to_list())


def _rank(rows: Sequence[Sequence[Fraction]]) -> int:
    if not rows:
        return 0
    return _qq(rows, len(rows[0])).rank()


def _independent(constraints: Sequence[Constraint]) -> List[Constraint]:
    """A maximal subfamily with linearly independent normals, in input order."""
    kept: List[Constraint] = []
    for constraint in constraints:
        if _rank([a for a, _ in kept] + [constraint[0]]) > len(kept):
            kept.append(constraint)
    return kept


def _affine_dim(points: Sequence[Vector]) -> int:
    if not points:
        return -1
    base = points[0]
    return _rank([[x - y for x, y in zip(p, base)] for p in points[1:]])


def _det(rows: Sequence[Sequence[Fraction]]) -> Fraction:
    return _fraction(_qq(rows, len(rows)).det())


@dataclass(frozen=True)
class HPolytope:
    """{x : a.x >= b for every inequality, a.x = b for every equality}."""

    ambient: int
    inequalities: Tuple[Constraint, ...]
    equalities: Tuple[Constraint, ...] = ()

    def __post_init__(self) -> None:
        for a, _ in self.inequalities + self.equalities:
            if len(a) != self.ambient:
                raise ValueError(f"constraint of length {len(a)} in ambient dimension {self.ambient}")

    @classmethod
    def build(
        cls,
        ambient: int,
        inequalities: Iterable[Tuple[Sequence[Union[int, Fraction]], Union[int, Fraction]]],
        equalities: Iterable[Tuple[Sequence[Union[int, Fraction]], Union[int, Fraction]]] = (),
    ) -> "HPolytope":
        return cls(
            ambient,
            tuple((_vector(a), Fraction(b)) for a, b in inequalities),
            tuple((_vector(a), Fraction(b)) for a, b in equalities),
        )

    def with_inequalities(self, extra: Iterable[Constraint]) -> "HPolytope":
        return HPolytope(self.ambient, self.inequalities + tuple(extra), self.equalities)

    def intersect(self, other: "HPolytope") -> "HPolytope":
        """Both constraint systems, each distinct constraint kept once."""
        return HPolytope(
            self.ambient,
            tuple(dict.fromkeys(self.inequalities + other.inequalities)),
            tuple(dict.fromkeys(self.equalities + other.equalities)),
        )

    def contains(self, x: Sequence[Union[int, Fraction]]) -> bool:
        x = _vector(x)
        return all(_dot(a, x) >= b for a, b in self.inequalities) and all(
            _dot(a, x) == b for a, b in self.equalities
        )

    @property
    def normal(self) -> Vector:
        """The form l with l.x = 1 on the polytope, used for Leray normalization."""
        for a, b in self.equalities:
            if b == 1:
                return a
        raise ValueError("polytope lies in no hyperplane l.x = 1")


@dataclass(frozen=True)
class Region:
    """A finite union of polytopes in a common hyperplane."""

    pieces: Tuple[HPolytope, ...]

    def contains(self, x: Sequence[Union[int, Fraction]]) -> bool:
        return any(p.contains(x) for p in self.pieces)

    def volume(self) -> Fraction:
        """Union volume by inclusion-exclusion over the pieces."""
        total = Fraction(0)
        for size in range(1, len(self.pieces) + 1):
            for subset in itertools.combinations(self.pieces, size):
                meet = subset[0]
                for piece in subset[1:]:
                    meet = meet.intersect(piece)
                total += (-1) ** (size + 1) * volume(meet)
        return total


# Vertices and volume


@lru_cache(maxsize=512)
def vertices(polytope: HPolytope) -> Tuple[Vector, ...]:
    """Every vertex, from the nonsingular subsystems of tight constraints."""
    n = polytope.ambient
    equalities = _independent(polytope.equalities)
    free = n - len(equalities)
    found = set()
    for chosen in itertools.combinations(polytope.inequalities, free):
        system = equalities + list(chosen)
        point = _solve([a for a, _ in system], [b for _, b in system])
        if point is not None and polytope.contains(point):
            found.add(point)
    return tuple(sorted(found))


def _facets(
    face: FrozenSet[int], points: Sequence[Vector], polytope: HPolytope, dim: int
) -> List[FrozenSet[int]]:
    facets = set()
    for a, b in polytope.inequalities:
        tight = frozenset(k for k in face if _dot(a, points[k]) == b)
        if tight == face or not tight:
            continue
        if _affine_dim([points[k] for k in sorted(tight)]) == dim - 1:
            facets.add(tight)
    return sorted(facets, key=sorted)


def _triangulate(polytope: HPolytope) -> List[Tuple[int, ...]]:
    """Pulling triangulation: cone the lowest vertex over the facets avoiding it."""
    points = vertices(polytope)
    cache: Dict[FrozenSet[int], List[Tuple[int, ...]]] = {}

    def pull(face: FrozenSet[int], dim: int) -> List[Tuple[int, ...]]:
        if face in cache:
            return cache[face]
        if dim == 0:
            result = [tuple(face)]
        else:
            apex = min(face)
            result = []
            for facet in _facets(face, points, polytope, dim):
                if apex in facet:
                    continue
                result.extend((apex,) + simplex for simplex in pull(facet, dim - 1))
        cache[face] = result
        return result

    everything = frozenset(range(len(points)))
    dim = _affine_dim(list(points))
    if dim < 0:
        return []
    return pull(everything, dim)


def volume(polytope: HPolytope) -> Fraction:
    """Leray-normalized volume of a polytope inside {l.x = 1}.

    Zero when the polytope is empty or not full-dimensional in the hyperplane.
    """
    normal = polytope.normal
    n = polytope.ambient
    points = vertices(polytope)
    if _affine_dim(list(points)) < n - 1:
        return Fraction(0)
    if any(_dot(normal, p) != 1 for p in points):
        raise ValueError("vertices leave the normalizing hyperplane")
    total = Fraction(0)
    for simplex in _triangulate(polytope):
        total += abs(_det([points[k] for k in simplex]))
    return total / math.factorial(n - 1)


def monte_carlo_volume(polytope: HPolytope, samples: int = 1_000_000, seed: int = 0) -> float:
    """Rejection-sampling estimate of ``volume`` in the hyperplane chart x_k = ...

    The chart drops the first coordinate k with l_k != 0; the Leray measure is
    the chart's Lebesgue measure divided by |l_k|.
    """
    normal = [float(c) for c in polytope.normal]
    k = next(i for i, c in enumerate(normal) if c)
    points = vertices(polytope)
    if not points:
        return 0.0
    rest = [i for i in range(polytope.ambient) if i != k]
    projected = np.array([[float(p[i]) for i in rest] for p in points])
    low, high = projected.min(axis=0), projected.max(axis=0)
    box = float(np.prod(high - low))
    if box == 0.0:
        return 0.0
    rng = np.random.default_rng(seed)
    chart = rng.uniform(low, high, size=(samples, len(rest)))
    full = np.empty((samples, polytope.ambient))
    full[:, rest] = chart
    full[:, k] = (1.0 - chart @ np.array([normal[i] for i in rest])) / normal[k]
    a = np.array([[float(c) for c in row] for row, _ in polytope.inequalities])
    b = np.array([float(rhs) for _, rhs in polytope.inequalities])
    inside = np.all(full @ a.T >= b - 1e-12, axis=1)
    return float(inside.mean()) * box / abs(normal[k])


def boundary_distance(polytope: HPolytope, y: Sequence[Union[int, Fraction]]) -> float:
    """Euclidean distance from y to the boundary; 0 on the boundary or outside.

    The minimum over facet hyperplanes of the normalized slack.
    """
    if not polytope.contains(y):
        return 0.0
    y = _vector(y)
    best = math.inf
    for a, b in polytope.inequalities:
        slack = _dot(a, y) - b
        if slack == 0:
            return 0.0
        norm = math.sqrt(float(_dot(a, a)))
        if norm:
            best = min(best, float(slack) / norm)
    return best


def region_depth_lower_bound(region: Region, y: Sequence[Union[int, Fraction]]) -> float:
    """Largest boundary distance of y within a single piece containing it.

    The distance from y to the boundary of the union is at least this value.
    """
    return max((boundary_distance(p, y) for p in region.pieces if p.contains(y)), default=0.0)


# The dual effective cone


@lru_cache(maxsize=32)
def dual_cone_rays(cox: CoxPresentation) -> Tuple[Tuple[int, ...], ...]:
    """Primitive integer generators of {y : <y, g> >= 0 for every effective generator g}."""
    gens = [list(g.coords) for g in cox.effective_cone]
    n = cox.picard_rank
    rays = set()
    for chosen in itertools.combinations(gens, n - 1):
        kernel = Matrix(chosen).nullspace() if chosen else [Matrix([1])]
        if len(kernel) != 1:
            continue
        vec = kernel[0]
        scale = ilcm(*[Rational(c).q for c in vec])
        vec = [int(c * scale) for c in vec]
        common = math.gcd(*vec)
        vec = [c // common for c in vec]
        for sign in (1, -1):
            candidate = tuple(sign * c for c in vec)
            if all(sum(x * g for x, g in zip(candidate, gen)) >= 0 for gen in gens):
                rays.add(candidate)
    return tuple(sorted(rays))


def in_dual_cone(cox: CoxPresentation, y: Sequence[int]) -> bool:
    """y pairs nonnegatively with every generator of the effective cone."""
    return all(pairing(y, g) >= 0 for g in cox.effective_cone)


def in_effective_interior(cox: CoxPresentation, cls: PicClass) -> bool:
    """Strict membership of a class in the interior of the effective cone."""
    rays = dual_cone_rays(cox)
    if not rays:
        return False
    return all(pairing(r, cls) > 0 for r in rays)


def dual_cone_section(cox: CoxPresentation) -> HPolytope:
    """{y in C_eff^dual : <y, -K> = 1}."""
    minus_k = anticanonical(cox)
    if not in_effective_interior(cox, minus_k):
        raise SurfaceDataError(
            f"-K = {list(minus_k.coords)} is not interior to the effective cone of {cox.name}; "
            "the anticanonical section is unbounded",
            path="effective_cone",
        )
    return HPolytope.build(
        cox.picard_rank,
        [(g.coords, 0) for g in cox.effective_cone],
        [(minus_k.coords, 1)],
    )


def section_volume(cox: CoxPresentation) -> Fraction:
    """The normalized volume alpha of the anticanonical section."""
    return volume(dual_cone_section(cox))


def degree_vectors(cox: CoxPresentation, bound: int) -> List[Tuple[int, ...]]:
    """Lattice points y of the dual cone with <y, -K> <= bound, by degree then coordinates."""
    if bound < 0:
        return []
    minus_k = anticanonical(cox)
    points = vertices(dual_cone_section(cox))
    ranges = []
    for k in range(cox.picard_rank):
        coords = [p[k] * bound for p in points] + [Fraction(0)]
        ranges.append(range(math.floor(min(coords)), math.ceil(max(coords)) + 1))
    found = [
        y
        for y in itertools.product(*ranges)
        if in_dual_cone(cox, y) and pairing(y, minus_k) <= bound
    ]
    found.sort(key=lambda y: (pairing(y, minus_k), y))
    logger.info("Found %s degree vectors of %s up to degree %s", len(found), cox.name, bound)
    return found


# Regions covered by the error-term estimates


def lambda_constraint(
    cox: CoxPresentation, choice: AdmissibleChoice, j0: int, lam: Fraction
) -> Constraint:
    """<y, (1 - lambda)(G_j1 + G_j2) - D_tot> >= 0 for {j1, j2} = J minus j0."""
    if choice.size != 3:
        raise ValueError(f"regions need three linear variables, got {choice.size}")
    lam = Fraction(lam)
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    others = [j for j in range(3) if j != j0]
    coords = []
    for k in range(cox.picard_rank):
        g = sum(choice.g_classes[j].coords[k] for j in others)
        coords.append((1 - lam) * g - cox.d_tot.coords[k])
    return _vector(coords), Fraction(0)


def c_lambda(cox: CoxPresentation, choice: AdmissibleChoice, j0: int, lam: Fraction) -> HPolytope:
    return dual_cone_section(cox).with_inequalities([lambda_constraint(cox, choice, j0, lam)])


def lambda_region(
    cox: CoxPresentation, lam: Fraction, union_over_j0: bool = True
) -> Region:
    """The union of the C_lambda over admissible choices (and every j0 when asked)."""
    pieces = []
    for choice in admissible_choices(cox):
        labels = range(choice.size) if union_over_j0 else (0,)
        pieces.extend(c_lambda(cox, choice, j0, lam) for j0 in labels)
    return Region(tuple(pieces))


def _distinct(halfspaces: Iterable[Constraint]) -> List[Constraint]:
    seen, result = set(), []
    for a, b in halfspaces:
        scale = next((abs(x) for x in a if x), Fraction(1))
        key = (tuple(x / scale for x in a), b / scale)
        if key not in seen:
            seen.add(key)
            result.append((a, b))
    return result


def union_volume(
    base: HPolytope, halfspaces: Sequence[Constraint], method: str = "complement"
) -> Fraction:
    """Volume of base intersected with the union of the halfspaces a.x >= b."""
    if method not in UNION_METHODS:
        raise ValueError(f"unknown union method {method!r}; expected one of {UNION_METHODS}")
    total = volume(base)
    points = vertices(base)
    halfspaces = _distinct(halfspaces)
    if not halfspaces or total == 0:
        return Fraction(0)
    if any(all(_dot(a, p) >= b for p in points) for a, b in halfspaces):
        return total
    if method == "complement":
        reversed_ = [(tuple(-x for x in a), -b) for a, b in halfspaces]
        return total - volume(base.with_inequalities(reversed_))
    union = Fraction(0)

    def extend(start: int, chosen: List[Constraint]) -> None:
        nonlocal union
        for k in range(start, len(halfspaces)):
            part = chosen + [halfspaces[k]]
            piece = volume(base.with_inequalities(part))
            if piece == 0:
                continue
            union += (-1) ** (len(part) + 1) * piece
            extend(k + 1, part)

    extend(0, [])
    return union


def coverage_ratio(
    cox: CoxPresentation,
    lam: Fraction,
    method: str = "complement",
    union_over_j0: bool = True,
) -> Fraction:
    """Share of the anticanonical section covered by the region at lambda."""
    base = dual_cone_section(cox)
    full = volume(base)
    halfspaces = []
    for choice in admissible_choices(cox):
        labels = range(choice.size) if union_over_j0 else (0,)
        halfspaces.extend(lambda_constraint(cox, choice, j0, lam) for j0 in labels)
    covered = union_volume(base, halfspaces, method)
    return covered / full


def coverage_sup(
    cox: CoxPresentation,
    grid: Sequence[Fraction],
    method: str = "complement",
    union_over_j0: bool = True,
) -> Fraction:
    if not grid:
        raise ValueError("the lambda grid is empty")
    return max(coverage_ratio(cox, lam, method, union_over_j0) for lam in grid)


def cone_rows(
    cox: CoxPresentation,
    grid: Sequence[Fraction],
    method: str = "complement",
    union_over_j0: bool = True,
) -> List[ConeRow]:
    """One ConeRow per lambda, in decreasing order of lambda."""
    base = dual_cone_section(cox)
    full = volume(base)
    rows = []
    for lam in sorted((Fraction(x) for x in grid), reverse=True):
        ratio = coverage_ratio(cox, lam, method, union_over_j0)
        rows.append(
            ConeRow(surface=cox.name, lam=lam, vol_full=full, vol_covered=ratio * full, ratio=ratio)
        )
        logger.info("Coverage of %s at lambda=%s: %s", cox.name, lam, ratio)
    return rows
