"""Tests for divisors, sections and kernels on the projective line."""

import pytest

from maninlab.core.ff1 import (
    ClosedPoint,
    CurveContext,
    EffectiveDivisor,
    Section,
    all_forms,
    closed_point_count,
    closed_points,
    divisor_gcd,
    effective_divisors,
    forms_have_common_zero,
    h0,
    kernel_count,
    reduced_divisors,
    section_of,
    vanishing_divisor,
)

F2 = CurveContext(2)
X = ClosedPoint.from_poly((1, 0))
X_PLUS_1 = ClosedPoint.from_poly((1, 1))
INF = ClosedPoint.infinity()


def test_non_prime_field_rejected():
    """Only prime fields are supported."""
    with pytest.raises(ValueError, match="prime"):
        CurveContext(4)


@pytest.mark.parametrize("d,expected", [(-1, 0), (0, 1), (3, 4)])
def test_h0(d, expected):
    """h0(O(d)) = max(d + 1, 0)."""
    assert h0(d) == expected


@pytest.mark.parametrize(
    "q,max_degree,expected", [(2, 1, 3), (2, 2, 4), (3, 1, 4), (3, 2, 7), (5, 1, 6)]
)
def test_closed_points(q, max_degree, expected):
    """Infinity plus the monic irreducibles of bounded degree."""
    points = closed_points(CurveContext(q), max_degree)
    assert len(points) == expected
    assert points[0] == INF


def test_unique_quadratic_point_over_f2():
    """x^2 + x + 1 is the only irreducible quadratic over F_2."""
    quadratics = [p for p in closed_points(F2, 2) if p.degree == 2]
    assert quadratics == [ClosedPoint.from_poly((1, 1, 1))]


@pytest.mark.parametrize("q", [2, 3, 5])
@pytest.mark.parametrize("f", [1, 2, 3, 4])
def test_closed_point_zeta(q, f):
    """sum_{e | f} e N_e = q^f + 1 for P^1."""
    total = sum(e * closed_point_count(q, e) for e in range(1, f + 1) if f % e == 0)
    assert total == q**f + 1


def test_closed_point_count_matches_enumeration():
    """The Moebius formula agrees with the irreducibility search."""
    ctx = CurveContext(3)
    points = closed_points(ctx, 3)
    for f in (1, 2, 3):
        assert closed_point_count(3, f) == sum(1 for p in points if p.degree == f)


@pytest.mark.parametrize("q,d", [(2, 0), (2, 1), (2, 2), (2, 3), (3, 2)])
def test_effective_divisor_count(q, d):
    """There are (q^{d+1} - 1)/(q - 1) effective divisors of degree d."""
    found = list(effective_divisors(CurveContext(q), d))
    assert len(found) == (q ** (d + 1) - 1) // (q - 1)
    assert len(set(found)) == len(found)
    assert all(D.degree == d for D in found)


def test_reduced_divisors_are_reduced():
    """Every yielded divisor has multiplicities at most one."""
    found = list(reduced_divisors(closed_points(F2, 2), 3))
    assert all(D.is_reduced() and D.degree <= 3 for D in found)
    assert EffectiveDivisor.zero() in found


def test_divisor_gcd():
    """Pointwise minimum of multiplicities."""
    P, Q = X, X_PLUS_1
    D = EffectiveDivisor.of([P, Q])
    assert divisor_gcd([D, EffectiveDivisor.zero()]) == EffectiveDivisor.zero()
    assert divisor_gcd([D, D]) == D
    assert divisor_gcd([EffectiveDivisor.of({P: 2}), D]) == EffectiveDivisor.of([P])


def test_divisor_arithmetic():
    """Sums merge multiplicities and scaling multiplies them."""
    D = EffectiveDivisor.of([X]) + EffectiveDivisor.of([X, INF])
    assert D.multiplicity(X) == 2
    assert D.degree == 3
    assert D.scaled(2).degree == 6
    assert not D.is_reduced()


def test_section_of_zero_divisor():
    """The empty divisor gives the constant form 1."""
    assert section_of(EffectiveDivisor.zero(), F2) == Section((1,))


def test_section_of_rational_point():
    """(x) over F_2 is cut out by the form X."""
    assert section_of(EffectiveDivisor.of([X]), F2) == Section((1, 0))


def test_section_with_infinity():
    """A divisor through infinity has a vanishing leading coefficient."""
    D = EffectiveDivisor.of([INF, X_PLUS_1])
    s = section_of(D, F2)
    assert s.degree == 2
    assert s.vanishes_at_infinity()
    assert vanishing_divisor(s, F2) == D


def test_vanishing_divisor_round_trip():
    """vanishing_divisor inverts section_of on every degree-3 divisor over F_2."""
    for D in effective_divisors(F2, 3):
        assert vanishing_divisor(section_of(D, F2), F2) == D


def test_vanishing_divisor_of_zero_form():
    """The zero form has no divisor."""
    with pytest.raises(ValueError):
        vanishing_divisor(Section((0, 0)), F2)


@pytest.mark.parametrize(
    "terms,expected",
    [
        ([(Section((1,)), 0)] * 3, 2),
        ([(Section((1, 1)), 0)], 0),
        ([(Section((1, 1)), 0), (Section((1, 1)), 0)], 1),
        ([(Section((1,)), -1), (Section((1,)), 0)], 0),
    ],
)
def test_kernel_count(terms, expected):
    """Dimension of the solution space of sum t_j w_j = 0."""
    assert kernel_count(terms, F2) == expected


def test_kernel_count_degree_mismatch():
    """Products must land in a common degree."""
    with pytest.raises(ValueError, match="degree mismatch"):
        kernel_count([(Section((1,)), 0), (Section((1, 0)), 0)], F2)


def test_common_zero():
    """x and x + 1 share no zero; x and x^2 do."""
    assert not forms_have_common_zero([(1, 0), (1, 1)], 2)
    assert forms_have_common_zero([(1, 0), (1, 0, 0)], 2)
    assert forms_have_common_zero([(0, 1), (0, 1, 1)], 2)


def test_all_forms_count():
    """q^{d+1} - 1 nonzero forms of degree d."""
    assert len(list(all_forms(2, CurveContext(3)))) == 26
    assert len(list(all_forms(1, F2, nonzero=False))) == 4
