"""Generalized Moebius function of an incidence complex and its partial sums.

mu_zero is the unique function on N^n with sum_{e' <= e} mu_zero(e') equal to
the indicator of supp(e) lying in the incidence complex. It vanishes as soon
as a component is at least 2, so it is stored as a table over subsets.
"""

from __future__ import annotations

import itertools
import logging
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Sequence, Tuple

from maninlab.core.ff1 import ClosedPoint, EffectiveDivisor
from maninlab.core.surface import AdmissibleChoice, CoxPresentation

logger = logging.getLogger(__name__)

ExponentVector = Tuple[int, ...]


def exponent_vector(cox: CoxPresentation, multiplicities: Mapping[str, int]) -> ExponentVector:
    """Build a full exponent vector from a label -> multiplicity mapping."""
    e = [0] * cox.num_generators
    for label, mult in multiplicities.items():
        if mult < 0:
            raise ValueError(f"negative multiplicity for {label}")
        e[cox.index(label)] = mult
    return tuple(e)


def support(e: Sequence[int]) -> FrozenSet[int]:
    return frozenset(i for i, x in enumerate(e) if x)


def incidence_indicator(cox: CoxPresentation, e: Sequence[int]) -> int:
    """1 when the support of e is an incidence face, else 0."""
    return 1 if cox.in_incidence(support(e)) else 0


def _subsets(items: Sequence[int]) -> Iterator[FrozenSet[int]]:
    for size in range(len(items) + 1):
        for subset in itertools.combinations(items, size):
            yield frozenset(subset)


@lru_cache(maxsize=32)
def _mu_table(cox: CoxPresentation) -> Dict[FrozenSet[int], int]:
    # mu(S) = 1_inc(S) - sum_{T < S} mu(T), filled by increasing |S|
    table: Dict[FrozenSet[int], int] = {}
    for subset in _subsets(range(cox.num_generators)):
        partial = sum(table[t] for t in _subsets(sorted(subset)) if t != subset)
        table[subset] = (1 if cox.in_incidence(subset) else 0) - partial
    logger.debug(
        "Moebius table for %s: %s nonzero entries",
        cox.name,
        sum(1 for v in table.values() if v),
    )
    return table


def mu_zero(cox: CoxPresentation, e: Sequence[int]) -> int:
    """mu_zero(e) for a full exponent vector over the generators."""
    if len(e) != cox.num_generators:
        raise ValueError(f"exponent vector of length {len(e)}, expected {cox.num_generators}")
    if any(x >= 2 for x in e):
        return 0
    return _mu_table(cox)[support(e)]


def _joint_support(
    cox: CoxPresentation, choice: AdmissibleChoice, g: Sequence[int], f: Sequence[int]
) -> Tuple[FrozenSet[int], FrozenSet[int]]:
    if len(g) != len(choice.J) or len(f) != len(choice.I):
        raise ValueError(
            f"expected g over {len(choice.J)} and f over {len(choice.I)} variables, "
            f"got {len(g)} and {len(f)}"
        )
    g_set = frozenset(choice.J[k] for k, x in enumerate(g) if x)
    k_set = frozenset(choice.I[k] for k, x in enumerate(f) if x)
    return g_set, k_set


def nu_zero(
    cox: CoxPresentation, choice: AdmissibleChoice, g: Sequence[int], f: Sequence[int]
) -> int:
    """sum_{0 <= f' <= f} mu_zero(g, f').

    ``g`` is indexed like ``choice.J`` and ``f`` like ``choice.I``. Only the
    support of f matters, and the result vanishes if some g_j >= 2.
    """
    if any(x >= 2 for x in g):
        return 0
    g_set, k_set = _joint_support(cox, choice, g, f)
    table = _mu_table(cox)
    return sum(table[g_set | t] for t in _subsets(sorted(k_set)))


def nu_zero_closed(
    cox: CoxPresentation, choice: AdmissibleChoice, g: Sequence[int], f: Sequence[int]
) -> int:
    """nu_zero by inclusion-exclusion: sum over T in supp(g) of (-1)^{|g|-|T|} 1_inc(T u K)."""
    if any(x >= 2 for x in g):
        return 0
    g_set, k_set = _joint_support(cox, choice, g, f)
    total = 0
    for t in _subsets(sorted(g_set)):
        if cox.in_incidence(t | k_set):
            total += (-1) ** (len(g_set) - len(t))
    return total


def pointwise_valuations(
    divisors: Sequence[EffectiveDivisor],
) -> List[Tuple[ClosedPoint, Tuple[int, ...]]]:
    """For every closed point in the union of supports, the vector of multiplicities."""
    points = sorted({p for d in divisors for p in d.support})
    return [(p, tuple(d.multiplicity(p) for d in divisors)) for p in points]


def mu_divisor(cox: CoxPresentation, divisors: Sequence[EffectiveDivisor]) -> int:
    """prod_v mu_zero(v(D)) for divisors indexed by every generator."""
    if len(divisors) != cox.num_generators:
        raise ValueError(f"expected {cox.num_generators} divisors, got {len(divisors)}")
    result = 1
    for _, valuation in pointwise_valuations(divisors):
        result *= mu_zero(cox, valuation)
        if not result:
            break
    return result


def nu_divisor(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    G: Sequence[EffectiveDivisor],
    D: Sequence[EffectiveDivisor],
) -> int:
    """prod_v nu_zero(v(G), v(D)); zero unless every G_j is reduced."""
    if len(G) != len(choice.J) or len(D) != len(choice.I):
        raise ValueError("G must be indexed by J and D by I")
    if not all(g.is_reduced() for g in G):
        return 0
    n_j = len(G)
    result = 1
    for _, valuation in pointwise_valuations(list(G) + list(D)):
        result *= nu_zero(cox, choice, valuation[:n_j], valuation[n_j:])
        if not result:
            break
    return result


def nu_pattern_values(
    cox: CoxPresentation, choice: AdmissibleChoice
) -> Dict[Tuple[FrozenSet[int], FrozenSet[int]], int]:
    """Every nonzero nu_zero(g, f_K), keyed by (support of g, K) as position sets."""
    values = {}
    for g_set in _subsets(range(len(choice.J))):
        for k_set in _subsets(range(len(choice.I))):
            g = tuple(1 if k in g_set else 0 for k in range(len(choice.J)))
            f = tuple(1 if k in k_set else 0 for k in range(len(choice.I)))
            value = nu_zero(cox, choice, g, f)
            if value:
                values[(g_set, k_set)] = value
    return values


def all_exponent_vectors(n: int, top: int) -> Iterable[Tuple[int, ...]]:
    """Every vector in {0..top}^n."""
    return itertools.product(range(top + 1), repeat=n)
