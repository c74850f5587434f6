"""Finite-field counts on an intrinsic linear surface and the curves on it.

Torsor counts, the section counts N, N*, N_j0 of a multidegree, the sums M,
the morphism count as a sum over (G, D) of nu * N*, its split into a dominant
term n0 and error terms n1, n2, and the leading constant gamma as an Euler
product. Section and morphism counts need a surface (dimension 2, three
linear variables); the torsor and constant functions work for any
presentation.

Every count is an exact integer. The Euler products are accumulated as
logarithms in floating point and carry an explicit bound on the omitted
factors.
"""

from __future__ import annotations

import itertools
import logging
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

import sympy
from sympy.polys.domains import ZZ
from sympy.polys.galoistools import gf_div, gf_strip

from maninlab.core.cones import degree_vectors, in_dual_cone, section_volume
from maninlab.core.errors import BudgetExceeded, IdentityFailure, SurfaceDataError
from maninlab.core.ff1 import (
    ClosedPoint,
    CurveContext,
    EffectiveDivisor,
    all_forms,
    closed_point_count,
    closed_points,
    divisor_gcd,
    effective_divisors,
    form_add,
    form_mul,
    form_pow,
    forms_have_common_zero,
    kernel_count,
    reduced_divisors,
    section_of,
)
from maninlab.core.genfun import (
    LocalLayout,
    MultiPoly,
    euler_factor_parts,
    f2_closed_form,
    h1_closed_form,
    local_point,
)
from maninlab.core.moebius import mu_zero, nu_divisor, nu_zero, pointwise_valuations
from maninlab.core.surface import (
    AdmissibleChoice,
    CoxPresentation,
    RelationTerm,
    anticanonical,
    default_choice,
    kx_divisibility,
    pairing,
)
from maninlab.models.records import CertificationRecord, CountRecord, DegreeSummary

logger = logging.getLogger(__name__)

DegreeVector = Tuple[int, ...]

X = sympy.Symbol("x")


class _Budget:
    """Counts enumeration steps and raises once the limit is passed."""

    def __init__(self, what: str, limit: Optional[int]):
        self.what = what
        self.limit = limit
        self.used = 0

    def spend(self, steps: int = 1) -> None:
        self.used += steps
        if self.limit is not None and self.used > self.limit:
            raise BudgetExceeded(self.what, self.used, self.limit)


def _default_choice(cox: CoxPresentation) -> AdmissibleChoice:
    choice = default_choice(cox)
    if choice is None:
        raise SurfaceDataError(f"surface {cox.name} has no default admissible choice")
    return choice


def _require_surface(cox: CoxPresentation, choice: AdmissibleChoice) -> None:
    if cox.dim != 2 or choice.size != 3:
        raise SurfaceDataError(
            f"section and morphism counts need a surface with three linear variables; "
            f"{cox.name} has dimension {cox.dim} and {choice.size}"
        )


# Torsor counts


def torsor_count_closed(
    cox: CoxPresentation, e: Sequence[int], q: int, choice: Optional[AdmissibleChoice] = None
) -> Fraction:
    """#T_e(F_q) / q^{dim T} for a 0/1 vector e over the generators.

    T_e is the set of torsor points whose coordinates vanish where e is 1.
    ``q`` may be any prime power.
    """
    if len(e) != cox.num_generators or any(x not in (0, 1) for x in e):
        raise ValueError(f"e must be a 0/1 vector over {cox.num_generators} generators, got {e}")
    choice = choice or _default_choice(cox)
    x = Fraction(1, q)
    product = Fraction(1)
    for linear, part in zip(choice.J, choice.parts):
        if e[linear] + sum(e[i] for i in part) == 0:
            product *= 1 - (1 - x) ** len(part)
    return x ** sum(e) * (1 + (q - 1) * product)


def _term_value(term: RelationTerm, s: Sequence[int], p: int) -> int:
    value = s[term.linear]
    for i, b in term.factors:
        value = value * pow(s[i], b, p)
    return value % p


def torsor_count_brute(
    cox: CoxPresentation, e: Sequence[int], ctx: CurveContext, max_terms: Optional[int] = None
) -> int:
    """Number of s in F_q^n with s_i = 0 where e_i = 1 and F(s) = 0."""
    if not cox.relation:
        raise SurfaceDataError(f"surface {cox.name} has an empty relation", path="relation")
    if len(e) != cox.num_generators:
        raise ValueError(f"e must have {cox.num_generators} entries, got {len(e)}")
    p = ctx.q
    open_ = [i for i, x in enumerate(e) if not x]
    _Budget(f"torsor enumeration of {cox.name}", max_terms).spend(p ** len(open_))
    s = [0] * cox.num_generators
    count = 0
    for values in itertools.product(range(p), repeat=len(open_)):
        for i, v in zip(open_, values):
            s[i] = v
        if sum(_term_value(term, s, p) for term in cox.relation) % p == 0:
            count += 1
    return count


def local_density(cox: CoxPresentation, q: int) -> Fraction:
    """(1 - 1/q)^rho #X(F_q) / q^{dim X}, from the Moebius-weighted torsor counts."""
    choice = _default_choice(cox)
    total = Fraction(0)
    for e in itertools.product((0, 1), repeat=cox.num_generators):
        mu = mu_zero(cox, e)
        if mu:
            total += mu * torsor_count_closed(cox, e, q, choice)
    return total


def surface_point_count(cox: CoxPresentation, q: int) -> int:
    """#X(F_q) for a prime power q."""
    value = Fraction(q) ** cox.dim * Fraction(q, q - 1) ** cox.picard_rank * local_density(cox, q)
    if value.denominator != 1 or value < 0:
        raise SurfaceDataError(
            f"surface {cox.name} gives the point count {value} over F_{q}; "
            "the incidence data is inconsistent"
        )
    return int(value)


@lru_cache(maxsize=32)
def local_density_polynomial(cox: CoxPresentation) -> sympy.Poly:
    """The local density as a polynomial in x = 1/q."""
    choice = _default_choice(cox)
    total = sympy.Integer(0)
    for e in itertools.product((0, 1), repeat=cox.num_generators):
        mu = mu_zero(cox, e)
        if not mu:
            continue
        product = sympy.Integer(1)
        for linear, part in zip(choice.J, choice.parts):
            if e[linear] + sum(e[i] for i in part) == 0:
                product *= 1 - (1 - X) ** len(part)
        total += mu * X ** sum(e) * (1 + (1 / X - 1) * product)
    return sympy.Poly(sympy.expand(total), X)


def _density_value(poly: sympy.Poly, q: int) -> Fraction:
    return sum((Fraction(int(c), q**k) for (k,), c in poly.terms()), Fraction(0))


# Section counts


@dataclass(frozen=True)
class SectionCounts:
    """N, N*, the N_j0 and the exponents phi_j, psi_j, Theta of one (y, G, D)."""

    N: int
    N_star: int
    N_j0: Tuple[int, ...]
    phi: Tuple[int, ...]
    psi: Tuple[int, ...]
    theta: int


def _weighted_divisors(
    choice: AdmissibleChoice, G: Sequence[EffectiveDivisor], D: Sequence[EffectiveDivisor]
) -> List[EffectiveDivisor]:
    """G_j + sum_{I_j} b_i D_i, the divisor of w_j."""
    result = []
    for j, part in enumerate(choice.parts):
        total = G[j]
        for i, b in zip(part, choice.exponents[j]):
            total = total + D[choice.position(i)].scaled(b)
        result.append(total)
    return result


def _check_section_data(
    choice: AdmissibleChoice,
    y: Sequence[int],
    G: Sequence[EffectiveDivisor],
    D: Sequence[EffectiveDivisor],
) -> None:
    if len(G) != choice.size or len(D) != len(choice.I):
        raise ValueError(f"expected {choice.size} divisors G and {len(choice.I)} divisors D")
    for k, (divisor, d) in enumerate(zip(D, choice.f_pairings(y))):
        if divisor.degree != d:
            raise ValueError(f"deg D_{k} = {divisor.degree} but <y, F_{k}> = {d}")
    for j, (divisor, c) in enumerate(zip(G, choice.g_pairings(y))):
        if divisor.degree > c:
            raise ValueError(f"deg G_{j} = {divisor.degree} exceeds <y, G_{j}> = {c}")


def _exponents(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    y: Sequence[int],
    G: Sequence[EffectiveDivisor],
    weighted: Sequence[EffectiveDivisor],
) -> Tuple[List[int], List[int], int]:
    c = choice.g_pairings(y)
    delta = pairing(y, cox.d_tot)
    full_gcd = divisor_gcd(list(weighted)).degree
    phis, psis, thetas = [], [], set()
    for j0 in range(choice.size):
        rest = [j for j in range(choice.size) if j != j0]
        rest_gcd = divisor_gcd([weighted[j] for j in rest]).degree
        phi = sum(c[j] - G[j].degree for j in rest) - delta + rest_gcd
        psi = c[j0] - G[j0].degree + full_gcd - rest_gcd
        phis.append(phi)
        psis.append(psi)
        thetas.add(phi + psi)
    if len(thetas) != 1:
        raise IdentityFailure("Theta depends on j0", witness=sorted(thetas))
    return phis, psis, thetas.pop()


def phi_psi_theta(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    j0: int,
    y: Sequence[int],
    G: Sequence[EffectiveDivisor],
    D: Sequence[EffectiveDivisor],
) -> Tuple[int, int, int]:
    """(phi_j0, psi_j0, Theta) of a multidegree y and divisors G over J, D over I."""
    _check_section_data(choice, y, G, D)
    phis, psis, theta = _exponents(cox, choice, y, G, _weighted_divisors(choice, G, D))
    return phis[j0], psis[j0], theta


def count_sections(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    y: Sequence[int],
    G: Sequence[EffectiveDivisor],
    D: Sequence[EffectiveDivisor],
    ctx: CurveContext,
) -> SectionCounts:
    """Solutions (t_j) of sum_j t_j w_j = 0, with t_j of degree <y, G_j> - deg G_j.

    N counts all solutions, N_j0 those with t_j0 = 0 and N* those with every
    t_j nonzero. The closed forms N_j0 = q^{max(0, 1 + phi_j0)} and, when
    phi_j0 and psi_j0 are at least -1, N = q^{2 + Theta} are checked against
    the linear algebra.
    """
    _require_surface(cox, choice)
    _check_section_data(choice, y, G, D)
    q = ctx.q
    weighted = _weighted_divisors(choice, G, D)
    forms = [section_of(divisor, ctx) for divisor in weighted]
    degrees = [c - g.degree for c, g in zip(choice.g_pairings(y), G)]

    def solutions(zeroed: FrozenSet[int]) -> int:
        terms = [(w, -1 if j in zeroed else n) for j, (w, n) in enumerate(zip(forms, degrees))]
        return q ** kernel_count(terms, ctx)

    subsets = [
        frozenset(s) for size in range(choice.size + 1) for s in itertools.combinations(range(choice.size), size)
    ]
    counts = {s: solutions(s) for s in subsets}
    N = counts[frozenset()]
    N_star = sum((-1) ** len(s) * counts[s] for s in subsets)
    N_j0 = tuple(counts[frozenset({j})] for j in range(choice.size))
    phis, psis, theta = _exponents(cox, choice, y, G, weighted)

    for j0 in range(choice.size):
        expected = q ** max(0, cox.dim - 1 + phis[j0])
        if N_j0[j0] != expected:
            raise IdentityFailure(
                f"N_j0 closed form fails at j0={j0}: {N_j0[j0]} != {expected}",
                witness=(tuple(y), j0),
            )
        if phis[j0] >= -1 and psis[j0] >= -1 and N != q ** (cox.dim + theta):
            raise IdentityFailure(
                f"N = {N} but q^(2 + Theta) = {q ** (cox.dim + theta)}",
                witness=(tuple(y), j0),
            )
    return SectionCounts(N, N_star, N_j0, tuple(phis), tuple(psis), theta)


@lru_cache(maxsize=None)
def _divisors_of_degree(ctx: CurveContext, degree: int) -> Tuple[EffectiveDivisor, ...]:
    return tuple(effective_divisors(ctx, degree))


@lru_cache(maxsize=None)
def _reduced_up_to(ctx: CurveContext, degree: int) -> Tuple[EffectiveDivisor, ...]:
    if degree < 1:
        return (EffectiveDivisor.zero(),)
    return tuple(reduced_divisors(closed_points(ctx, degree), degree))


def _random_divisor(rng: random.Random, points: Sequence[ClosedPoint], degree: int) -> EffectiveDivisor:
    chosen, remaining = [], degree
    while remaining:
        point = rng.choice([p for p in points if p.degree <= remaining])
        chosen.append(point)
        remaining -= point.degree
    return EffectiveDivisor.of(chosen)


def random_section_data(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    ctx: CurveContext,
    rng: random.Random,
    max_degree: int = 6,
    max_pairing: int = 2,
) -> Tuple[DegreeVector, List[EffectiveDivisor], List[EffectiveDivisor]]:
    """A random admissible (y, G, D): y in the dual cone, deg D_i = <y, F_i>, deg G_j <= <y, G_j>.

    G is drawn with a bias towards the points of D so that the gcds are often
    nontrivial.
    """
    minus_k = anticanonical(cox)
    points = closed_points(ctx, 2)
    for _ in range(1000):
        d = [rng.randint(0, max_pairing) for _ in choice.I]
        y = choice.y_from_pairings(d)
        if in_dual_cone(cox, y) and pairing(y, minus_k) <= max_degree:
            break
    else:
        raise ValueError(f"no multidegree of {cox.name} found in the dual cone")
    D = [_random_divisor(rng, points, k) for k in d]
    pool = list(points) + 3 * [p for divisor in D for p in divisor.support]
    G = [_random_divisor(rng, pool, rng.randint(0, c)) for c in choice.g_pairings(y)]
    return y, G, D


def section_bounds_report(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    q_values: Sequence[int] = (2, 3),
    instances: int = 500,
    max_degree: int = 6,
    seed: int = 0,
) -> List[CertificationRecord]:
    """Closed forms and bounds of the section counts on random (y, G, D).

    Per j0: phi >= 0 gives N_j0 <= q^{2+phi}; psi < 0 gives N* = 0; psi >= 0 and
    phi <= -2 give N* <= q^{1+psi} - 1; phi, psi >= 0 give N* <= q^{2+Theta}.
    """
    _require_surface(cox, choice)
    records = []
    for q in q_values:
        ctx = CurveContext(q)
        rng = random.Random(f"{seed}:{q}")
        hits: Dict[str, int] = {}
        failures: Dict[str, str] = {}

        def note(prop: str, ok: bool, witness: str) -> None:
            hits[prop] = hits.get(prop, 0) + 1
            if not ok and prop not in failures:
                failures[prop] = witness

        for _ in range(instances):
            y, G, D = random_section_data(cox, choice, ctx, rng, max_degree)
            witness = f"y={y} G={[g.terms for g in G]} D={[d.terms for d in D]}"
            try:
                counts = count_sections(cox, choice, y, G, D, ctx)
            except IdentityFailure as e:
                note("section_closed_forms", False, f"{witness}: {e}")
                continue
            note("section_closed_forms", True, witness)
            for j0 in range(choice.size):
                phi, psi = counts.phi[j0], counts.psi[j0]
                if phi >= 0:
                    note("N_j0_upper", counts.N_j0[j0] <= q ** (2 + phi), witness)
                if psi < 0:
                    note("N_star_vanishes", counts.N_star == 0, witness)
                elif phi <= -2:
                    note("N_star_low_phi", counts.N_star <= q ** (1 + psi) - 1, witness)
                if phi >= 0 and psi >= 0:
                    note("N_star_upper", counts.N_star <= q ** (2 + counts.theta), witness)

        for prop in sorted(hits):
            status = "fail" if prop in failures else "pass"
            records.append(
                CertificationRecord(
                    instance=f"{cox.name} q={q}",
                    property=prop,
                    status=status,
                    witness=failures.get(prop, f"{hits[prop]} cases"),
                )
            )
        logger.info("Checked %s random section data of %s over F_%s", instances, cox.name, q)
    return records


# The sums M


def _incident_tuples(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    degrees: Sequence[int],
    ctx: CurveContext,
    budget: _Budget,
) -> Iterator[Tuple[EffectiveDivisor, ...]]:
    """Tuples D over I with deg D_k = degrees[k] whose support pattern at each point is a face."""
    options = [_divisors_of_degree(ctx, d) for d in degrees]

    def extend(k: int, chosen: List[EffectiveDivisor], patterns: Dict[ClosedPoint, FrozenSet[int]]):
        if k == len(options):
            yield tuple(chosen)
            return
        for divisor in options[k]:
            budget.spend()
            updated = dict(patterns)
            for point in divisor.support:
                face = updated.get(point, frozenset()) | {choice.I[k]}
                if not cox.in_incidence(face):
                    break
                updated[point] = face
            else:
                chosen.append(divisor)
                yield from extend(k + 1, chosen, updated)
                chosen.pop()

    yield from extend(0, [], {})


def M_sum(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    d: Sequence[int],
    G: Sequence[EffectiveDivisor],
    ctx: CurveContext,
    max_terms: Optional[int] = None,
) -> int:
    """sum over D with deg D = d of nu(G, D) q^{deg gcd_j (G_j + sum b_i D_i)}."""
    if any(x < 0 for x in d):
        raise ValueError(f"degrees must be nonnegative, got {d}")
    if not all(g.is_reduced() for g in G):
        return 0
    budget = _Budget(f"divisor tuples of degree {tuple(d)}", max_terms)
    total = 0
    for D in _incident_tuples(cox, choice, d, ctx, budget):
        nu = nu_divisor(cox, choice, G, D)
        if nu:
            total += nu * ctx.q ** divisor_gcd(_weighted_divisors(choice, G, D)).degree
    return total


def M_j0_eta(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    d: Sequence[int],
    G: Sequence[EffectiveDivisor],
    ctx: CurveContext,
    j0: int,
    eta: Fraction,
    max_terms: Optional[int] = None,
) -> float:
    """The |nu|-weighted sum with the extra factor q^{eta deg gcd_{j != j0}}."""
    if not all(g.is_reduced() for g in G):
        return 0.0
    budget = _Budget(f"divisor tuples of degree {tuple(d)}", max_terms)
    rest = [j for j in range(choice.size) if j != j0]
    total = 0.0
    for D in _incident_tuples(cox, choice, d, ctx, budget):
        nu = nu_divisor(cox, choice, G, D)
        if not nu:
            continue
        weighted = _weighted_divisors(choice, G, D)
        full = divisor_gcd(weighted).degree
        partial = divisor_gcd([weighted[j] for j in rest]).degree
        total += abs(nu) * ctx.q ** (full + float(eta) * partial)
    return total


def _local_factor(
    layout: LocalLayout, g: Sequence[int], qv: int, fv: int, caps: Sequence[int]
) -> MultiPoly:
    """F_g(q_v, t^{f_v}) truncated at caps."""
    terms: Dict[Tuple[int, ...], int] = {}
    bounds = [cap // fv for cap in caps]
    for f in itertools.product(*(range(b + 1) for b in bounds)):
        nu = nu_zero(layout.cox, layout.choice, g, f)
        if not nu:
            continue
        key = (0, 0, *(fv * x for x in f))
        terms[key] = terms.get(key, 0) + nu * qv ** min(layout.levels(g, f))
    return MultiPoly(layout.names, terms)


def euler_coefficient(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    d: Sequence[int],
    G: Sequence[EffectiveDivisor],
    ctx: CurveContext,
) -> int:
    """Coefficient of t^d in prod_v F_{v(G)}(q_v, t^{f_v}); equals M_sum(d, G)."""
    d = tuple(d)
    layout = LocalLayout(cox, choice)
    valuations = dict(pointwise_valuations(list(G)))
    points = set(valuations)
    top = max(d, default=0)
    if top >= 1:
        points.update(closed_points(ctx, top))
    product = MultiPoly.one(layout.names)
    zero = (0,) * choice.size
    for point in sorted(points):
        factor = _local_factor(layout, valuations.get(point, zero), ctx.q**point.degree, point.degree, d)
        product = product.mul_truncated(factor, d)
    return product.coefficient((0, 0, *d))


# Morphism counts


@dataclass
class HomTerms:
    """The morphism count of one y with its three-way decomposition."""

    hom: int = 0
    n0: int = 0
    n1: int = 0
    n2: int = 0
    terms: int = 0


def _g_tuples(ctx: CurveContext, choice: AdmissibleChoice, y: Sequence[int]):
    return itertools.product(*(_reduced_up_to(ctx, c) for c in choice.g_pairings(y)))


def hom_terms(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    y: Sequence[int],
    ctx: CurveContext,
    max_terms: Optional[int] = None,
) -> HomTerms:
    """One pass over the (G, D) domain of y accumulating #Hom, n0, n1 and n2.

    n1 collects nu (N* - q^{2+Theta}) where some psi_j < 0 or some phi_j >= -1,
    n2 the same where every psi_j >= 0 and every phi_j <= -2.
    """
    _require_surface(cox, choice)
    result = HomTerms()
    y = tuple(y)
    if not in_dual_cone(cox, y):
        return result
    budget = _Budget(f"(G, D) enumeration at y={y}", max_terms)
    d = choice.f_pairings(y)
    for D in _incident_tuples(cox, choice, d, ctx, budget):
        for G in _g_tuples(ctx, choice, y):
            budget.spend()
            nu = nu_divisor(cox, choice, G, D)
            if not nu:
                continue
            counts = count_sections(cox, choice, y, G, D, ctx)
            main = ctx.q ** (cox.dim + counts.theta)
            result.hom += nu * counts.N_star
            result.n0 += nu * main
            error = nu * (counts.N_star - main)
            if any(p < 0 for p in counts.psi) or any(p >= -1 for p in counts.phi):
                result.n1 += error
            else:
                result.n2 += error
            result.terms += 1
    if result.hom < 0:
        raise IdentityFailure(f"negative morphism count {result.hom}", witness=y)
    logger.debug("y=%s: %s nonzero terms, hom=%s", y, result.terms, result.hom)
    return result


def hom_count(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    y: Sequence[int],
    ctx: CurveContext,
    max_terms: Optional[int] = None,
) -> int:
    """Number of morphisms P^1 -> X of multidegree y meeting the open part."""
    return hom_terms(cox, choice, y, ctx, max_terms).hom


def check_n0_rearrangement(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    y: Sequence[int],
    ctx: CurveContext,
    n0: int,
    max_terms: Optional[int] = None,
) -> Fraction:
    """q^{-2 - <y,-K>} n0 = sum_G q^{-sum d - |deg G|} M(d, G); returns the common value."""
    q = ctx.q
    d = choice.f_pairings(y)
    left = Fraction(n0, q ** (cox.dim + pairing(y, anticanonical(cox))))
    right = Fraction(0)
    for G in _g_tuples(ctx, choice, y):
        value = M_sum(cox, choice, d, G, ctx, max_terms)
        if value:
            right += Fraction(value, q ** (sum(d) + sum(g.degree for g in G)))
    if left != right:
        raise IdentityFailure(f"n0 rearrangement fails at y={tuple(y)}", witness=(left, right))
    return left


def n_terms(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    y: Sequence[int],
    ctx: CurveContext,
    max_terms: Optional[int] = None,
    check_rearrangement: bool = True,
) -> Tuple[int, int, int]:
    terms = hom_terms(cox, choice, y, ctx, max_terms)
    if terms.n0 + terms.n1 + terms.n2 != terms.hom:
        raise IdentityFailure(
            f"n0 + n1 + n2 = {terms.n0 + terms.n1 + terms.n2} but hom = {terms.hom}",
            witness=tuple(y),
        )
    if check_rearrangement and in_dual_cone(cox, y):
        check_n0_rearrangement(cox, choice, y, ctx, terms.n0, max_terms)
    return terms.n0, terms.n1, terms.n2


@lru_cache(maxsize=32)
def _minimal_nonfaces(cox: CoxPresentation) -> Tuple[Tuple[int, ...], ...]:
    found = []
    for size in range(1, cox.num_generators + 1):
        for subset in itertools.combinations(range(cox.num_generators), size):
            s = frozenset(subset)
            if not cox.in_incidence(s) and all(cox.in_incidence(s - {x}) for x in s):
                found.append(subset)
    return tuple(found)


def _term_form(term: RelationTerm, s: Sequence[Tuple[int, ...]], p: int) -> Tuple[int, ...]:
    form = s[term.linear]
    for i, b in term.factors:
        form = form_mul(form, form_pow(s[i], b, p), p)
    return form


def _divide_form(
    numerator: Tuple[int, ...], divisor: Tuple[int, ...], degree: int, p: int
) -> Optional[Tuple[int, ...]]:
    """The form s of the given degree with s * divisor = numerator, if any."""
    num = gf_strip([int(c) for c in numerator])
    if not num:
        return (0,) * (degree + 1)
    quotient, remainder = gf_div(num, gf_strip([int(c) for c in divisor]), p, ZZ)
    if remainder or len(quotient) - 1 > degree:
        return None
    quotient = [int(c) for c in quotient]
    return tuple([0] * (degree + 1 - len(quotient)) + quotient)


def hom_count_oracle(
    cox: CoxPresentation,
    y: Sequence[int],
    ctx: CurveContext,
    max_terms: Optional[int] = None,
    choice: Optional[AdmissibleChoice] = None,
) -> int:
    """Morphism count by enumerating torsor points over P^1 directly.

    Counts tuples of nonzero binary forms s_i of degree <y, [E_i]> with F(s) = 0
    whose common zeros respect the incidence complex (no minimal non-face has a
    common zero), divided by the torus order (q - 1)^rho. The linear variable of
    the last monomial is solved for by division.
    """
    y = tuple(y)
    if not in_dual_cone(cox, y):
        return 0
    choice = choice or _default_choice(cox)
    p = ctx.q
    degrees = [pairing(y, cls) for cls in cox.classes]
    if any(e < 0 for e in degrees):
        return 0
    solved = choice.J[-1]
    others = [i for i in range(cox.num_generators) if i != solved]
    _Budget(f"torsor forms at y={y}", max_terms).spend(math.prod(p ** (degrees[i] + 1) for i in others))
    last = cox.relation[-1]
    position = last.variables.index(solved)
    cofactor_term = [(last.linear, 1)] + list(last.factors)
    del cofactor_term[position]
    delta = pairing(y, cox.d_tot)
    minimal = _minimal_nonfaces(cox)
    spaces = [list(all_forms(degrees[i], ctx)) for i in others]
    s: List[Tuple[int, ...]] = [()] * cox.num_generators
    total = 0
    for values in itertools.product(*spaces):
        for i, form in zip(others, values):
            s[i] = form
        rest = (0,) * (delta + 1)
        for term in cox.relation[:-1]:
            rest = form_add(rest, _term_form(term, s, p), p)
        cofactor: Tuple[int, ...] = (1,)
        for i, b in cofactor_term:
            cofactor = form_mul(cofactor, form_pow(s[i], b, p), p)
        quotient = _divide_form(tuple((-c) % p for c in rest), cofactor, degrees[solved], p)
        if quotient is None or not any(quotient):
            continue
        s[solved] = quotient
        if any(forms_have_common_zero([s[i] for i in face], p) for face in minimal):
            continue
        total += 1
    torus = (p - 1) ** cox.picard_rank
    if total % torus:
        raise IdentityFailure(
            f"{total} torsor points at y={y} are not a multiple of (q-1)^rho = {torus}",
            witness=y,
        )
    return total // torus


# The leading constant


@dataclass(frozen=True)
class GammaEstimate:
    """gamma truncated after the closed points of degree <= depth."""

    depth: int
    value: float
    # relative bound on the omitted factors
    tail_bound: float
    prefactor: Fraction


def gamma_prefactor(cox: CoxPresentation, q: int) -> Fraction:
    """(q/(q-1))^rho q^{dim X}, the lattice factor for the projective line."""
    return Fraction(q, q - 1) ** cox.picard_rank * Fraction(q) ** cox.dim


def gamma_tail_bound(cox: CoxPresentation, q: int, depth: int) -> float:
    """Relative bound on prod_{f > depth} of the local densities.

    With density 1 + sum_{k >= 2} c_k x^k and C = sum |c_k|, each omitted factor
    is within C q^{-2f} of 1 and there are at most 2 q^f points of degree f.
    """
    coeffs = {k: int(c) for (k,), c in local_density_polynomial(cox).terms()}
    if coeffs.get(0) != 1:
        raise IdentityFailure(f"local density of {cox.name} does not start with 1", witness=coeffs)
    if coeffs.get(1, 0):
        return math.inf
    c = sum(abs(v) for k, v in coeffs.items() if k >= 2)
    worst = c / q ** (2 * (depth + 1))
    if worst >= 1:
        return math.inf
    tail = 2 * c * q ** (-depth) / ((q - 1) * (1 - worst))
    return math.expm1(tail)


def gamma_table(cox: CoxPresentation, q: int, depth: int) -> List[GammaEstimate]:
    """Partial products of gamma for every depth 0..depth."""
    if depth < 0:
        raise ValueError(f"depth must be >= 0, got {depth}")
    poly = local_density_polynomial(cox)
    prefactor = gamma_prefactor(cox, q)
    log_value = math.log(prefactor)
    rows = [GammaEstimate(0, float(prefactor), gamma_tail_bound(cox, q, 0), prefactor)]
    for f in range(1, depth + 1):
        local = _density_value(poly, q**f)
        log_value += closed_point_count(q, f) * math.log1p(float(local - 1))
        rows.append(GammaEstimate(f, math.exp(log_value), gamma_tail_bound(cox, q, f), prefactor))
    return rows


def gamma(cox: CoxPresentation, q: int, depth: int) -> GammaEstimate:
    return gamma_table(cox, q, depth)[-1]


@lru_cache(maxsize=None)
def local_H(cox: CoxPresentation, choice: AdmissibleChoice, g: Tuple[int, ...], qv: int) -> Fraction:
    """H_g(q_v, 1/q_v) = H_{1,g} + H_{2,g} at the place of norm q_v."""
    point = local_point(LocalLayout(cox, choice), qv)
    first = h1_closed_form(cox, choice, g).evaluate(point)
    return first + f2_closed_form(cox, choice, g, multiply_by_t=True).evaluate(point)


def c_princ(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    G: Sequence[EffectiveDivisor],
    ctx: CurveContext,
    depth: int,
) -> float:
    """(q/(q-1))^{#I} prod_v H_{v(G)}(q_v, 1/q_v) over supp G and the points of degree <= depth."""
    if not all(g.is_reduced() for g in G):
        return 0.0
    q = ctx.q
    value = float(Fraction(q, q - 1) ** len(choice.I))
    used: Dict[int, int] = {}
    for point, g in pointwise_valuations(list(G)):
        value *= float(local_H(cox, choice, g, q**point.degree))
        used[point.degree] = used.get(point.degree, 0) + 1
    zero = (0,) * choice.size
    for f in range(1, depth + 1):
        count = closed_point_count(q, f) - used.get(f, 0)
        value *= float(local_H(cox, choice, zero, q**f)) ** count
    return value


def c_princ_total(cox: CoxPresentation, choice: AdmissibleChoice, q: int, depth: int) -> float:
    """q^{dim X} sum_G c_princ(G) q^{-|deg G|}, summed place by place."""
    log_value = cox.dim * math.log(q) + len(choice.I) * math.log(q / (q - 1))
    for f in range(1, depth + 1):
        first, second = euler_factor_parts(cox, choice, q**f)
        log_value += closed_point_count(q, f) * math.log1p(float(first + second - 1))
    return math.exp(log_value)


def c_princ_sum_direct(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    ctx: CurveContext,
    depth: int,
    max_terms: Optional[int] = None,
) -> float:
    """The same sum by enumerating every reduced G supported in degree <= depth."""
    if depth < 1:
        return c_princ_total(cox, choice, ctx.q, 0)
    points = closed_points(ctx, depth)
    patterns = list(itertools.product((0, 1), repeat=choice.size))
    _Budget(f"c_princ enumeration to depth {depth}", max_terms).spend(len(patterns) ** len(points))
    total = 0.0
    for assignment in itertools.product(patterns, repeat=len(points)):
        G = [
            EffectiveDivisor.of([p for p, g in zip(points, assignment) if g[j]])
            for j in range(choice.size)
        ]
        total += c_princ(cox, choice, G, ctx, depth) * ctx.q ** -sum(g.degree for g in G)
    return ctx.q**cox.dim * total


def check_euler_factor(cox: CoxPresentation, choice: AdmissibleChoice, qv: int) -> Fraction:
    """sum_g H_g(q_v, 1/q_v) q_v^{-|g|} equals the local density; returns it."""
    first, second = euler_factor_parts(cox, choice, qv)
    expected = local_density(cox, qv)
    if first != expected:
        raise IdentityFailure(
            f"Euler factor of {cox.name} at q_v={qv}: {first} != {expected}", witness=qv
        )
    if second:
        raise IdentityFailure(
            f"H_2 terms of {cox.name} at q_v={qv} sum to {second}, not 0", witness=qv
        )
    return expected


# Reports


def count_record(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    y: Sequence[int],
    ctx: CurveContext,
    max_terms: Optional[int] = None,
    gamma_value: Optional[float] = None,
    oracle: bool = False,
    oracle_budget: Optional[int] = None,
) -> CountRecord:
    terms = hom_terms(cox, choice, y, ctx, max_terms)
    oracle_count = None
    if oracle:
        oracle_count = hom_count_oracle(cox, y, ctx, oracle_budget, choice)
        if oracle_count != terms.hom:
            raise IdentityFailure(
                f"oracle gives {oracle_count} morphisms at y={tuple(y)}, the Moebius sum {terms.hom}",
                witness=tuple(y),
            )
    degree = pairing(y, anticanonical(cox))
    return CountRecord(
        surface=cox.name,
        q=ctx.q,
        y=list(y),
        d=degree,
        hom=terms.hom,
        n0=terms.n0,
        n1=terms.n1,
        n2=terms.n2,
        predicted=None if gamma_value is None else gamma_value * ctx.q**degree,
        oracle=oracle_count,
    )


def _count_job(args) -> CountRecord:
    return count_record(*args)


@dataclass
class ManinReport:
    records: List[CountRecord]
    summaries: List[DegreeSummary]
    truncated: bool = False


def manin_report(
    cox: CoxPresentation,
    ctx: CurveContext,
    bound: int,
    choice: Optional[AdmissibleChoice] = None,
    gamma_depth: int = 6,
    max_terms: Optional[int] = None,
    oracle: bool = False,
    oracle_budget: Optional[int] = None,
    jobs: int = 1,
) -> ManinReport:
    """Counts for every y with <y, -K> <= bound, and per-degree totals against the main term.

    The main term of anticanonical degree delta*d is alpha gamma d^{rho-1} q^{delta d}.
    When an enumeration budget runs out the rows computed so far are returned
    and the report is flagged as truncated.
    """
    choice = choice or _default_choice(cox)
    estimate = gamma(cox, ctx.q, gamma_depth)
    alpha = float(section_volume(cox))
    delta = kx_divisibility(cox)
    vectors = degree_vectors(cox, bound)
    jobs_args = [
        (cox, choice, y, ctx, max_terms, estimate.value, oracle, oracle_budget) for y in vectors
    ]
    records: List[CountRecord] = []
    truncated = False
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for record in pool.map(_count_job, jobs_args):
                    records.append(record)
        else:
            for args in jobs_args:
                records.append(_count_job(args))
    except BudgetExceeded as e:
        truncated = True
        logger.warning("Stopping the count of %s after %s rows: %s", cox.name, len(records), e)

    complete = len(records) == len(vectors)
    last_degree = records[-1].d if records else -1
    summaries = []
    for d in range(bound // delta + 1):
        anticanonical_degree = delta * d
        if anticanonical_degree > last_degree and not complete:
            break
        total = sum(r.hom for r in records if r.d == anticanonical_degree)
        predicted = alpha * estimate.value * d ** (cox.picard_rank - 1) * ctx.q**anticanonical_degree
        summaries.append(
            DegreeSummary(
                surface=cox.name,
                q=ctx.q,
                d=d,
                total=total,
                predicted=predicted,
                ratio=total / predicted if predicted > 0 else None,
                tail_bound=estimate.tail_bound,
                truncated=not complete and anticanonical_degree == last_degree,
            )
        )
    return ManinReport(records, summaries, truncated)
