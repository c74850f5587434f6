"""Tests for torsor, section and morphism counts and the leading constant."""

import dataclasses
import itertools
import math
from fractions import Fraction

import pytest

from maninlab.core.cones import degree_vectors
from maninlab.core.count import (
    M_sum,
    c_princ_sum_direct,
    c_princ_total,
    check_euler_factor,
    count_sections,
    euler_coefficient,
    gamma,
    gamma_prefactor,
    gamma_table,
    hom_count,
    hom_count_oracle,
    hom_terms,
    local_density,
    manin_report,
    n_terms,
    phi_psi_theta,
    section_bounds_report,
    surface_point_count,
    torsor_count_brute,
    torsor_count_closed,
)
from maninlab.core.errors import BudgetExceeded, SurfaceDataError
from maninlab.core.ff1 import ClosedPoint, CurveContext, EffectiveDivisor
from maninlab.core.moebius import exponent_vector

ZERO = EffectiveDivisor.zero()
ORIGIN = (0, 0, 0, 0)


@pytest.mark.parametrize(
    "labels,q,expected",
    [((), 2, 72), (("lambda",), 2, 36), (("eta1", "eta2", "eta3", "lambda", "m1", "m2", "m3"), 2, 1)],
    ids=["empty", "lambda", "all"],
)
def test_torsor_count_closed(sextic, labels, q, expected):
    """#T_e(F_q) = q^6 times the closed form."""
    e = exponent_vector(sextic, {label: 1 for label in labels})
    assert torsor_count_closed(sextic, e, q) * q**6 == expected


def _check_torsor_counts(cox, q):
    ctx = CurveContext(q)
    for e in itertools.product((0, 1), repeat=cox.num_generators):
        assert torsor_count_brute(cox, e, ctx) == torsor_count_closed(cox, e, q) * q**6, e


def test_torsor_count_brute_matches_closed(sextic):
    """Every 0/1 vector e over F_2."""
    _check_torsor_counts(sextic, 2)


@pytest.mark.slow
@pytest.mark.parametrize("q", [3, 5])
def test_torsor_count_brute_matches_closed_larger_fields(sextic, q):
    _check_torsor_counts(sextic, q)


def test_torsor_count_rejects_bad_vector(sextic):
    with pytest.raises(ValueError, match="0/1 vector"):
        torsor_count_closed(sextic, (2, 0, 0, 0, 0, 0, 0), 2)


def test_torsor_count_empty_relation(sextic):
    empty = dataclasses.replace(sextic, relation=())
    with pytest.raises(SurfaceDataError, match="empty relation"):
        torsor_count_brute(empty, (0,) * 7, CurveContext(2))


@pytest.mark.parametrize("q,expected", [(2, 13), (3, 22), (4, 33), (5, 46)])
def test_surface_point_count(sextic, q, expected):
    """#X(F_q) = q^2 + 4q + 1."""
    assert surface_point_count(sextic, q) == expected


def test_local_density_value(sextic):
    """(1 - 1/q)^4 #X(F_q) / q^2 at q = 3."""
    assert local_density(sextic, 3) == Fraction(2, 3) ** 4 * Fraction(22, 9)


def test_count_sections_at_origin(sextic, sextic_choice, ctx):
    """At y = 0 the t_j are constants with t1 + t2 + t3 = 0."""
    q = ctx.q
    counts = count_sections(sextic, sextic_choice, ORIGIN, [ZERO] * 3, [ZERO] * 4, ctx)
    assert counts.N == q**2
    assert counts.N_j0 == (q, q, q)
    assert counts.N_star == (q - 1) * (q - 2)
    assert (counts.phi, counts.psi, counts.theta) == ((0, 0, 0), (0, 0, 0), 0)


def test_phi_psi_theta_at_origin(sextic, sextic_choice):
    assert phi_psi_theta(sextic, sextic_choice, 1, ORIGIN, [ZERO] * 3, [ZERO] * 4) == (0, 0, 0)


def test_section_data_degree_mismatch(sextic, sextic_choice):
    """deg D_i must equal <y, F_i>."""
    D = [EffectiveDivisor.of([ClosedPoint.from_poly((1, 0))]), ZERO, ZERO, ZERO]
    with pytest.raises(ValueError, match="deg D_0"):
        phi_psi_theta(sextic, sextic_choice, 0, ORIGIN, [ZERO] * 3, D)


def test_section_bounds_report_passes(sextic, sextic_choice):
    records = section_bounds_report(
        sextic, sextic_choice, q_values=(2,), instances=25, max_degree=4, seed=3
    )
    assert records
    assert all(r.status == "pass" for r in records), [r for r in records if r.status != "pass"]


@pytest.mark.slow
def test_section_bounds_full_suite(sextic, sextic_choice):
    """500 random instances over F_2 and F_3 with degrees up to 6."""
    records = section_bounds_report(sextic, sextic_choice)
    assert {r.instance for r in records} == {"sextic_a1 q=2", "sextic_a1 q=3"}
    assert all(r.status == "pass" for r in records), [r for r in records if r.status != "pass"]


def test_hom_at_origin(sextic, sextic_choice):
    """Constant maps land in the open part: (q - 1)(q - 2) of them."""
    assert hom_count(sextic, sextic_choice, ORIGIN, CurveContext(3)) == 2
    assert hom_count(sextic, sextic_choice, ORIGIN, CurveContext(2)) == 0


def test_hom_outside_dual_cone(sextic, sextic_choice):
    terms = hom_terms(sextic, sextic_choice, (0, 1, 0, 0), CurveContext(3))
    assert (terms.hom, terms.n0, terms.n1, terms.n2) == (0, 0, 0, 0)


def test_n_terms_at_origin(sextic, sextic_choice):
    """n0 = q^2, and the whole difference sits in n1."""
    assert n_terms(sextic, sextic_choice, ORIGIN, CurveContext(3)) == (9, -7, 0)


def test_n_terms_sum_to_hom(sextic, sextic_choice, ctx):
    for y in degree_vectors(sextic, 3):
        n0, n1, n2 = n_terms(sextic, sextic_choice, y, ctx)
        assert n0 + n1 + n2 == hom_count(sextic, sextic_choice, y, ctx)


@pytest.mark.slow
def test_n_terms_sum_to_hom_up_to_degree_six(sextic, sextic_choice, ctx):
    for y in degree_vectors(sextic, 6):
        n0, n1, n2 = n_terms(sextic, sextic_choice, y, ctx)
        assert n0 + n1 + n2 == hom_count(sextic, sextic_choice, y, ctx), y


def test_oracle_at_origin(sextic):
    assert hom_count_oracle(sextic, ORIGIN, CurveContext(3)) == 2


def test_oracle_agrees_with_moebius_sum(sextic, sextic_choice, ctx):
    for y in degree_vectors(sextic, 2):
        assert hom_count_oracle(sextic, y, ctx) == hom_count(sextic, sextic_choice, y, ctx), y


@pytest.mark.slow
def test_oracle_agrees_in_degree_three(sextic, sextic_choice):
    ctx = CurveContext(2)
    for y in degree_vectors(sextic, 3):
        assert hom_count_oracle(sextic, y, ctx) == hom_count(sextic, sextic_choice, y, ctx), y


def test_hom_budget(sextic, sextic_choice):
    with pytest.raises(BudgetExceeded):
        hom_terms(sextic, sextic_choice, ORIGIN, CurveContext(3), max_terms=1)


def test_M_sum_trivial(sextic, sextic_choice, ctx):
    assert M_sum(sextic, sextic_choice, (0, 0, 0, 0), [ZERO] * 3, ctx) == 1


def test_M_sum_non_reduced_G(sextic, sextic_choice, ctx):
    G = [EffectiveDivisor.of({ClosedPoint.from_poly((1, 0)): 2}), ZERO, ZERO]
    assert M_sum(sextic, sextic_choice, (1, 0, 0, 0), G, ctx) == 0


@pytest.mark.parametrize("d", [(1, 0, 0, 0), (0, 1, 0, 1), (1, 1, 0, 0)])
def test_euler_coefficient_matches_M_sum(sextic, sextic_choice, d):
    """The Euler product coefficient equals the divisor sum."""
    ctx = CurveContext(2)
    G = [EffectiveDivisor.of([ClosedPoint.from_poly((1, 1))]), ZERO, ZERO]
    for g in ([ZERO] * 3, G):
        assert euler_coefficient(sextic, sextic_choice, d, g, ctx) == M_sum(
            sextic, sextic_choice, d, g, ctx
        )


def test_gamma_prefactor(sextic):
    """(q/(q-1))^4 q^2 at q = 2."""
    assert gamma_prefactor(sextic, 2) == 64


def test_gamma_tail_decreases(sextic):
    tails = [row.tail_bound for row in gamma_table(sextic, 5, 8)]
    assert all(a >= b for a, b in zip(tails, tails[1:]))
    assert tails[-1] < 1e-3


def test_gamma_depth_zero_is_prefactor(sextic):
    assert gamma(sextic, 3, 0).value == pytest.approx(float(gamma_prefactor(sextic, 3)))


def test_gamma_rejects_negative_depth(sextic):
    with pytest.raises(ValueError, match="depth"):
        gamma_table(sextic, 3, -1)


@pytest.mark.parametrize("qv", [2, 3, 4, 5, 8, 9])
def test_check_euler_factor(sextic, sextic_choice, qv):
    assert check_euler_factor(sextic, sextic_choice, qv) == local_density(sextic, qv)


def test_c_princ_total_matches_gamma(sextic, sextic_choice):
    """|I| = rho, so the principal constant is gamma itself."""
    assert c_princ_total(sextic, sextic_choice, 5, 8) == pytest.approx(
        gamma(sextic, 5, 8).value, rel=1e-9
    )


def test_c_princ_direct_enumeration(sextic, sextic_choice):
    ctx = CurveContext(2)
    assert c_princ_sum_direct(sextic, sextic_choice, ctx, 1) == pytest.approx(
        c_princ_total(sextic, sextic_choice, 2, 1), rel=1e-9
    )


def test_manin_report_degree_zero(sextic):
    report = manin_report(sextic, CurveContext(3), bound=0, gamma_depth=2)
    assert not report.truncated
    assert [r.hom for r in report.records] == [2]
    assert report.records[0].n0 == 9
    assert [s.total for s in report.summaries] == [2]


def test_manin_report_truncates_on_budget(sextic):
    report = manin_report(sextic, CurveContext(3), bound=4, gamma_depth=2, max_terms=1)
    assert report.truncated
    assert report.records == []
    assert report.summaries == []


def test_manin_report_predicted(sextic):
    report = manin_report(sextic, CurveContext(2), bound=2, gamma_depth=3)
    assert all(math.isfinite(r.predicted) for r in report.records)
    assert report.summaries[0].predicted == 0
    assert report.summaries[0].ratio is None
