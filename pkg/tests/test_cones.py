"""Tests for polytope volumes, the anticanonical section and coverage ratios."""

import dataclasses
import math
from fractions import Fraction

import pytest

from maninlab.core.cones import (
    UNION_METHODS,
    HPolytope,
    Region,
    boundary_distance,
    c_lambda,
    cone_rows,
    coverage_ratio,
    coverage_sup,
    degree_vectors,
    dual_cone_section,
    in_dual_cone,
    lambda_constraint,
    monte_carlo_volume,
    region_depth_lower_bound,
    section_volume,
    union_volume,
    vertices,
    volume,
)
from maninlab.core.errors import SurfaceDataError
from maninlab.core.surface import PicClass, change_basis


def _simplex(d, scale=1):
    return HPolytope.build(
        d,
        [(tuple(1 if k == i else 0 for k in range(d)), 0) for i in range(d)],
        [((scale,) * d, 1)],
    )


@pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
def test_standard_simplex_volume(d):
    """{x >= 0, sum x = 1} has Leray volume 1/(d-1)!."""
    assert volume(_simplex(d)) == Fraction(1, math.factorial(d - 1))


def test_scaled_simplex_volume():
    """Halving every vertex divides the determinant by 2^d."""
    assert volume(_simplex(3, scale=2)) == Fraction(1, 2**3 * 2)


def test_polytope_without_normal():
    with pytest.raises(ValueError, match="no hyperplane"):
        volume(HPolytope.build(2, [((1, 0), 0), ((0, 1), 0)]))


def test_constraint_length_checked():
    with pytest.raises(ValueError, match="ambient dimension"):
        HPolytope.build(3, [((1, 0), 0)])


def test_sextic_section_vertices(sextic):
    found = set(vertices(dual_cone_section(sextic)))
    half, third = Fraction(1, 2), Fraction(1, 3)
    zero = Fraction(0)
    assert found == {
        (third, zero, zero, zero),
        (half, half, zero, zero),
        (half, zero, half, zero),
        (half, zero, zero, half),
    }


def test_sextic_alpha(sextic):
    assert section_volume(sextic) == Fraction(1, 144)


def test_alpha_is_basis_invariant(sextic):
    """A unimodular change of Picard basis leaves alpha unchanged."""
    basis = [
        PicClass((1, -1, -1, -1)),
        PicClass((0, 1, 0, 0)),
        PicClass((0, 0, 1, 0)),
        PicClass((0, 0, 0, 1)),
    ]
    moved = change_basis(sextic, basis, ["l", "e1", "e2", "e3"])
    assert section_volume(moved) == section_volume(sextic)


def test_monte_carlo_volume(sextic):
    estimate = monte_carlo_volume(dual_cone_section(sextic), samples=400_000, seed=1)
    assert estimate == pytest.approx(1 / 144, rel=0.02)


def test_monte_carlo_simplex():
    assert monte_carlo_volume(_simplex(3), samples=200_000) == pytest.approx(0.5, rel=0.02)


def test_anticanonical_not_interior(sextic):
    orthant = tuple(PicClass(tuple(1 if k == i else 0 for k in range(4))) for i in range(4))
    broken = dataclasses.replace(sextic, effective_cone=orthant)
    with pytest.raises(SurfaceDataError, match="not interior"):
        dual_cone_section(broken)


def test_degree_vectors(sextic):
    """y = 0, then the three classes of degree 2, then (1, 0, 0, 0) in degree 3."""
    found = degree_vectors(sextic, 3)
    assert found[0] == (0, 0, 0, 0)
    assert set(found[1:4]) == {(1, 1, 0, 0), (1, 0, 1, 0), (1, 0, 0, 1)}
    assert (1, 0, 0, 0) in found
    assert all(in_dual_cone(sextic, y) for y in found)
    assert degree_vectors(sextic, -1) == []


def test_boundary_distance():
    triangle = _simplex(2)
    assert boundary_distance(triangle, (Fraction(1, 2), Fraction(1, 2))) == pytest.approx(0.5)
    assert boundary_distance(triangle, (1, 0)) == 0.0
    assert boundary_distance(triangle, (2, -1)) == 0.0
    depth = region_depth_lower_bound(Region((triangle,)), (Fraction(1, 4), Fraction(3, 4)))
    assert depth == pytest.approx(0.25)


def test_region_volume_of_duplicate_pieces():
    """Inclusion-exclusion counts a repeated piece once."""
    triangle = _simplex(3)
    assert Region((triangle, triangle)).volume() == volume(triangle)


def test_lambda_constraint_rejects_negative(sextic, sextic_choice):
    with pytest.raises(ValueError, match="nonnegative"):
        lambda_constraint(sextic, sextic_choice, 0, Fraction(-1))


def test_c_lambda_is_subset(sextic, sextic_choice):
    base = section_volume(sextic)
    for j0 in range(3):
        assert volume(c_lambda(sextic, sextic_choice, j0, Fraction(1, 2))) <= base


@pytest.mark.parametrize("method", UNION_METHODS)
def test_full_coverage_at_zero(sextic, method):
    assert coverage_ratio(sextic, Fraction(0), method) == 1


@pytest.mark.parametrize("lam", [Fraction(1, 10), Fraction(1, 3), Fraction(1, 2), Fraction(1)])
def test_union_methods_agree(sextic, lam):
    values = {coverage_ratio(sextic, lam, method) for method in UNION_METHODS}
    assert len(values) == 1
    assert 0 <= values.pop() <= 1


def test_coverage_shrinks_with_lambda(sextic):
    ratios = [coverage_ratio(sextic, Fraction(k, 10)) for k in range(0, 11, 2)]
    assert all(a >= b for a, b in zip(ratios, ratios[1:]))


def test_fixed_j0_covers_less(sextic):
    lam = Fraction(1, 3)
    assert coverage_ratio(sextic, lam, union_over_j0=False) <= coverage_ratio(sextic, lam)


def test_union_volume_unknown_method():
    with pytest.raises(ValueError, match="unknown union method"):
        union_volume(_simplex(2), [((1, 0), 0)], method="sampling")


def test_union_volume_without_halfspaces():
    assert union_volume(_simplex(2), []) == 0


def test_coverage_sup_empty_grid(sextic):
    with pytest.raises(ValueError, match="empty"):
        coverage_sup(sextic, [])


def test_cone_rows(sextic):
    rows = cone_rows(sextic, [Fraction(0), Fraction(1, 2)])
    assert [row.lam for row in rows] == [Fraction(1, 2), Fraction(0)]
    assert rows[-1].ratio == 1
    assert all(row.vol_full == Fraction(1, 144) for row in rows)
    assert coverage_sup(sextic, [Fraction(0), Fraction(1, 2)]) == 1


def _segment_piece(low, high):
    """{x + y = 1, low <= x <= high}, a piece of the unit segment."""
    return HPolytope.build(2, [((1, 0), low), ((-1, 0), -high)], [((1, 1), 1)])


def test_region_volume_of_overlapping_pieces():
    """[0, 1/2] and [1/4, 1] cover the segment; their overlap is counted once."""
    first = _segment_piece(0, Fraction(1, 2))
    second = _segment_piece(Fraction(1, 4), 1)
    assert volume(first.intersect(second)) == Fraction(1, 4)
    assert Region((first, second)).volume() == volume(_simplex(2)) == 1


def test_repeated_equality_keeps_vertices():
    """A scaled copy of the normalizing hyperplane does not change the polytope."""
    doubled = HPolytope.build(
        3,
        [((1, 0, 0), 0), ((0, 1, 0), 0), ((0, 0, 1), 0)],
        [((1, 1, 1), 1), ((2, 2, 2), 2)],
    )
    assert vertices(doubled) == vertices(_simplex(3))
    assert volume(doubled) == Fraction(1, 2)


def test_region_depth_is_a_lower_bound():
    first = _segment_piece(0, Fraction(1, 2))
    second = _segment_piece(Fraction(1, 4), 1)
    point = (Fraction(3, 8), Fraction(5, 8))
    depth = region_depth_lower_bound(Region((first, second)), point)
    assert depth == pytest.approx(0.125)
    assert depth <= boundary_distance(_simplex(2), point)
    assert region_depth_lower_bound(Region((first,)), (Fraction(3, 4), Fraction(1, 4))) == 0.0
