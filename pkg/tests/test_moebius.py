"""Tests for the incidence Moebius function and its partial sums."""

import itertools

import pytest

from maninlab.core.ff1 import ClosedPoint, EffectiveDivisor
from maninlab.core.moebius import (
    all_exponent_vectors,
    exponent_vector,
    incidence_indicator,
    mu_divisor,
    mu_zero,
    nu_divisor,
    nu_pattern_values,
    nu_zero,
    nu_zero_closed,
)
from maninlab.core.surface import default_choice

P = ClosedPoint.from_poly((1, 0))
Q = ClosedPoint.from_poly((1, 1))
ZERO = EffectiveDivisor.zero()


def test_mu_at_origin(sextic):
    """mu_zero(0) = 1 and a single generator contributes nothing."""
    assert mu_zero(sextic, (0,) * 7) == 1
    assert mu_zero(sextic, exponent_vector(sextic, {"m1": 1})) == 0


def test_mu_of_non_face_pair(sextic):
    """m1 and eta2 do not meet, so mu_zero = -1 on their pair."""
    assert mu_zero(sextic, exponent_vector(sextic, {"m1": 1, "eta2": 1})) == -1


def test_mu_vanishes_beyond_one(sextic):
    assert mu_zero(sextic, exponent_vector(sextic, {"lambda": 2})) == 0


def test_mu_rejects_wrong_length(sextic):
    with pytest.raises(ValueError, match="length"):
        mu_zero(sextic, (0, 0))


def test_exponent_vector_rejects_negative(sextic):
    with pytest.raises(ValueError, match="negative"):
        exponent_vector(sextic, {"m1": -1})


def test_partial_sums_are_incidence_indicator(sextic):
    """sum_{e' <= e} mu_zero(e') = 1_inc(supp e) on {0, 1, 2}^7."""
    for e in all_exponent_vectors(sextic.num_generators, 2):
        below = itertools.product(*(range(x + 1) for x in e))
        assert sum(mu_zero(sextic, b) for b in below) == incidence_indicator(sextic, e), e


def test_nu_zero_examples(sextic, sextic_choice):
    """nu_zero(0, f) is the incidence indicator of supp f."""
    assert nu_zero(sextic, sextic_choice, (0, 0, 0), (0, 0, 0, 0)) == 1
    assert nu_zero(sextic, sextic_choice, (0, 0, 0), (1, 1, 0, 0)) == 0
    assert nu_zero(sextic, sextic_choice, (0, 0, 0), (1, 0, 0, 1)) == 1
    assert nu_zero(sextic, sextic_choice, (1, 0, 0), (0, 1, 0, 0)) == -1
    assert nu_zero(sextic, sextic_choice, (2, 0, 0), (0, 0, 0, 0)) == 0


def test_nu_zero_depends_on_support_of_f(sextic, sextic_choice):
    """Raising an entry of f from 1 to 2 changes nothing."""
    for g in itertools.product((0, 1), repeat=3):
        for f in itertools.product((0, 1), repeat=4):
            doubled = tuple(2 * x for x in f)
            assert nu_zero(sextic, sextic_choice, g, doubled) == nu_zero(sextic, sextic_choice, g, f)


@pytest.mark.parametrize("surface", ["sextic", "toy", "branching"])
def test_nu_zero_closed_agrees(surface, request):
    """The inclusion-exclusion form matches the partial sum of mu_zero."""
    cox = request.getfixturevalue(surface)
    choice = default_choice(cox)
    for g in itertools.product((0, 1), repeat=len(choice.J)):
        for f in itertools.product((0, 1), repeat=len(choice.I)):
            assert nu_zero_closed(cox, choice, g, f) == nu_zero(cox, choice, g, f), (g, f)


def test_nu_zero_shape_mismatch(sextic, sextic_choice):
    with pytest.raises(ValueError, match="expected g over 3"):
        nu_zero(sextic, sextic_choice, (0, 0), (0, 0, 0, 0))


def test_nu_pattern_values_keys(sextic, sextic_choice):
    """Only nonzero values are kept; the empty pattern maps to 1."""
    values = nu_pattern_values(sextic, sextic_choice)
    assert values[(frozenset(), frozenset())] == 1
    assert all(values.values())
    assert (frozenset(), frozenset({0, 1})) not in values


def test_mu_divisor(sextic):
    """Pointwise product of mu_zero over the closed points."""
    divisors = [ZERO] * 7
    assert mu_divisor(sextic, divisors) == 1

    doubled = list(divisors)
    doubled[sextic.index("m1")] = EffectiveDivisor.of({P: 2})
    assert mu_divisor(sextic, doubled) == 0

    crossing = list(divisors)
    crossing[sextic.index("m1")] = EffectiveDivisor.of([P])
    crossing[sextic.index("eta2")] = EffectiveDivisor.of([P])
    assert mu_divisor(sextic, crossing) == -1


def test_mu_divisor_length(sextic):
    with pytest.raises(ValueError, match="expected 7 divisors"):
        mu_divisor(sextic, [ZERO] * 3)


def test_nu_divisor_trivial_and_non_reduced(sextic, sextic_choice):
    """nu is 1 on zero divisors and 0 once a G_j is not reduced."""
    assert nu_divisor(sextic, sextic_choice, [ZERO] * 3, [ZERO] * 4) == 1
    G = [EffectiveDivisor.of({P: 2}), ZERO, ZERO]
    assert nu_divisor(sextic, sextic_choice, G, [ZERO] * 4) == 0


def test_nu_divisor_is_multiplicative(sextic, sextic_choice):
    """Divisors supported at distinct points multiply."""
    G1 = [EffectiveDivisor.of([P]), ZERO, ZERO]
    D1 = [ZERO, EffectiveDivisor.of([P]), ZERO, ZERO]
    G2 = [ZERO, ZERO, ZERO]
    D2 = [EffectiveDivisor.of([Q]), ZERO, ZERO, EffectiveDivisor.of([Q])]
    first = nu_divisor(sextic, sextic_choice, G1, D1)
    second = nu_divisor(sextic, sextic_choice, G2, D2)
    joint = nu_divisor(
        sextic,
        sextic_choice,
        [a + b for a, b in zip(G1, G2)],
        [a + b for a, b in zip(D1, D2)],
    )
    assert (first, second) == (-1, 1)
    assert joint == first * second
