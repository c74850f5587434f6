"""Exact multivariate series in rho, tau, t_1..t_n.

Every polynomial and truncated series of this module lives over the variable
list ``("rho", "tau", t_1, ..., t_n)``: index 0 is rho, index 1 is tau and the
t-variables start at ``T0``. Coefficients are Python integers, so every
identity below is checked exactly.

The module has three layers:

* ``MultiPoly`` / ``TruncatedSeries`` / ``ControlledForm``: the arithmetic.
* The model series F, F~, G, G~ attached to a weight vector a, a shift vector
  nu and a partition of the variables, with their support and degree checks.
* The local series F_g, F_{1,g}, F_{2,g}, H_{1,g}, H_{2,g} of a surface and an
  admissible choice, their j0-variants and the three-way decomposition of
  F_{j0,2,g}, each assembled in closed form and compared with a direct sum.
"""

from __future__ import annotations

import itertools
import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm, prod
from typing import (
    Callable,
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from maninlab.core.errors import BudgetExceeded, IdentityFailure
from maninlab.core.moebius import mu_zero, nu_zero
from maninlab.core.surface import AdmissibleChoice, CoxPresentation, check_hypothesis_44
from maninlab.models.records import CertificationRecord

logger = logging.getLogger(__name__)

Exponent = Tuple[int, ...]

RHO, TAU, T0 = 0, 1, 2

EPSILONS = (Fraction(1), Fraction(1, 2), Fraction(1, 4))
ETA_GRID = tuple(Fraction(1, 2**k) for k in range(11))


def series_names(t_labels: Union[int, Sequence[str]]) -> Tuple[str, ...]:
    """Variable names ("rho", "tau", t...) for n t-variables or explicit labels."""
    if isinstance(t_labels, int):
        t_labels = [f"t{k + 1}" for k in range(t_labels)]
    return ("rho", "tau", *t_labels)


def monomial_string(exps: Sequence[int], names: Sequence[str]) -> str:
    """'rho*t1^2' style rendering of an exponent vector."""
    parts = []
    for name, e in zip(names, exps):
        if e == 1:
            parts.append(name)
        elif e:
            parts.append(f"{name}^{e}")
    return "*".join(parts) if parts else "1"


class MultiPoly:
    """Sparse polynomial with integer coefficients; zero coefficients are never stored."""

    __slots__ = ("names", "terms")

    def __init__(self, names: Sequence[str], terms: Optional[Mapping[Exponent, int]] = None):
        self.names: Tuple[str, ...] = tuple(names)
        self.terms: Dict[Exponent, int] = {}
        for exps, coeff in (terms or {}).items():
            if len(exps) != len(self.names):
                raise ValueError(
                    f"exponent {exps} has arity {len(exps)}, expected {len(self.names)}"
                )
            if coeff:
                self.terms[tuple(exps)] = int(coeff)

    @classmethod
    def zero(cls, names: Sequence[str]) -> "MultiPoly":
        return cls(names)

    @classmethod
    def one(cls, names: Sequence[str]) -> "MultiPoly":
        return cls(names, {(0,) * len(names): 1})

    @classmethod
    def monomial(cls, names: Sequence[str], exps: Sequence[int], coeff: int = 1) -> "MultiPoly":
        return cls(names, {tuple(exps): coeff})

    @classmethod
    def variable(cls, names: Sequence[str], name: str, power: int = 1) -> "MultiPoly":
        exps = [0] * len(names)
        exps[tuple(names).index(name)] = power
        return cls(names, {tuple(exps): 1})

    @property
    def nvars(self) -> int:
        return len(self.names)

    def _check(self, other: "MultiPoly") -> None:
        if self.names != other.names:
            raise ValueError(f"variable mismatch: {self.names} vs {other.names}")

    def _coerce(self, other: Union["MultiPoly", int]) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            self._check(other)
            return other
        return MultiPoly(self.names, {(0,) * self.nvars: other})

    def __add__(self, other: Union["MultiPoly", int]) -> "MultiPoly":
        other = self._coerce(other)
        result = dict(self.terms)
        for exps, coeff in other.terms.items():
            result[exps] = result.get(exps, 0) + coeff
        return MultiPoly(self.names, result)

    __radd__ = __add__

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.names, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: Union["MultiPoly", int]) -> "MultiPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other: int) -> "MultiPoly":
        return self._coerce(other) - self

    def __mul__(self, other: Union["MultiPoly", int]) -> "MultiPoly":
        return self.mul_truncated(other, None)

    __rmul__ = __mul__

    def mul_truncated(
        self, other: Union["MultiPoly", int], caps: Optional[Sequence[int]]
    ) -> "MultiPoly":
        """Product, dropping monomials whose t-exponents exceed ``caps``."""
        other = self._coerce(other)
        result: Dict[Exponent, int] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                exps = tuple(x + y for x, y in zip(e1, e2))
                if caps is not None and any(x > c for x, c in zip(exps[T0:], caps)):
                    continue
                result[exps] = result.get(exps, 0) + c1 * c2
        return MultiPoly(self.names, result)

    def __pow__(self, n: int) -> "MultiPoly":
        if n < 0:
            raise ValueError("negative powers are not polynomials")
        result = MultiPoly.one(self.names)
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other: object) -> bool:
        if isinstance(other, int):
            other = MultiPoly(self.names, {(0,) * self.nvars: other})
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.names == other.names and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((self.names, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for exps in sorted(self.terms):
            pieces.append(f"{self.terms[exps]}*{monomial_string(exps, self.names)}")
        return " + ".join(pieces)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, exps: Sequence[int]) -> int:
        return self.terms.get(tuple(exps), 0)

    def truncate(self, caps: Sequence[int]) -> "MultiPoly":
        """Keep the monomials with every t-exponent within ``caps``."""
        return MultiPoly(
            self.names,
            {
                e: c
                for e, c in self.terms.items()
                if all(x <= cap for x, cap in zip(e[T0:], caps))
            },
        )

    def evaluate(self, values: Sequence[Union[int, Fraction]]) -> Fraction:
        """Exact value at a point given in variable order."""
        if len(values) != self.nvars:
            raise ValueError(f"expected {self.nvars} values, got {len(values)}")
        total = Fraction(0)
        for exps, coeff in self.terms.items():
            term = Fraction(coeff)
            for v, e in zip(values, exps):
                if e:
                    term *= Fraction(v) ** e
            total += term
        return total

    def specialize(self, index: int, value: int) -> "MultiPoly":
        """Substitute an integer for one variable, keeping it at exponent 0."""
        result: Dict[Exponent, int] = {}
        for exps, coeff in self.terms.items():
            new = exps[:index] + (0,) + exps[index + 1 :]
            result[new] = result.get(new, 0) + coeff * value ** exps[index]
        return MultiPoly(self.names, result)

    def embed(self, names: Sequence[str], mapping: Mapping[int, int]) -> "MultiPoly":
        """Move variable k to position mapping[k] of a new variable list.

        Several variables may land on the same position (their exponents add);
        unmapped variables must not occur.
        """
        result: Dict[Exponent, int] = {}
        for exps, coeff in self.terms.items():
            new = [0] * len(names)
            for k, e in enumerate(exps):
                if not e:
                    continue
                if k not in mapping:
                    raise ValueError(f"variable {self.names[k]} has no image")
                new[mapping[k]] += e
            key = tuple(new)
            result[key] = result.get(key, 0) + coeff
        return MultiPoly(names, result)

    def has_nonnegative_coefficients(self) -> bool:
        return all(c > 0 for c in self.terms.values())

    def t_degrees(self) -> Tuple[int, ...]:
        """Largest exponent of each t-variable."""
        n = self.nvars - T0
        if not self.terms:
            return (0,) * n
        return tuple(max(e[T0 + k] for e in self.terms) for k in range(n))

    def first_difference(self, other: "MultiPoly") -> Optional[Tuple[str, int, int]]:
        """The smallest monomial on which the two polynomials differ, or None."""
        self._check(other)
        for exps in sorted(set(self.terms) | set(other.terms)):
            a, b = self.coefficient(exps), other.coefficient(exps)
            if a != b:
                return monomial_string(exps, self.names), a, b
        return None


def assert_equal(left: MultiPoly, right: MultiPoly, what: str) -> None:
    """Raise IdentityFailure at the first monomial where the two sides differ."""
    diff = left.first_difference(right)
    if diff is not None:
        raise IdentityFailure(f"{what}: sides differ", witness=diff)


@dataclass
class TruncatedSeries:
    """A power series known up to the per-variable t-caps."""

    poly: MultiPoly
    caps: Tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.caps) != self.poly.nvars - T0:
            raise ValueError("one cap per t-variable is required")
        self.poly = self.poly.truncate(self.caps)

    @classmethod
    def uniform(cls, poly: MultiPoly, cap: int) -> "TruncatedSeries":
        return cls(poly, (cap,) * (poly.nvars - T0))

    def _check(self, other: "TruncatedSeries") -> None:
        if self.caps != other.caps:
            raise ValueError(f"cap mismatch: {self.caps} vs {other.caps}")

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        return TruncatedSeries(self.poly + other.poly, self.caps)

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        self._check(other)
        return TruncatedSeries(self.poly - other.poly, self.caps)

    def __mul__(self, other: Union["TruncatedSeries", MultiPoly, int]) -> "TruncatedSeries":
        if isinstance(other, TruncatedSeries):
            self._check(other)
            other = other.poly
        return TruncatedSeries(self.poly.mul_truncated(other, self.caps), self.caps)

    def divide_by_one_minus(self, monomial: Sequence[int]) -> "TruncatedSeries":
        """Multiply by 1/(1 - x^monomial); the monomial needs a positive t-degree."""
        if not any(monomial[T0:]):
            raise ValueError("geometric expansion needs a positive t-degree")
        step = MultiPoly.monomial(self.poly.names, monomial)
        result = self.poly
        power = self.poly
        while True:
            power = power.mul_truncated(step, self.caps)
            if power.is_zero():
                break
            result = result + power
        return TruncatedSeries(result, self.caps)


@dataclass(frozen=True)
class Denominator:
    """The factor 1 - rho^rho tau^tau t^t of a controlled form."""

    rho: int
    tau: int
    t: Tuple[int, ...]

    def __post_init__(self) -> None:
        if self.rho < 0 or self.tau < 0 or any(x < 0 for x in self.t):
            raise ValueError(f"negative exponent in denominator {self}")

    @classmethod
    def of_t(cls, n: int, index: int) -> "Denominator":
        """The factor 1 - t_index."""
        t = [0] * n
        t[index] = 1
        return cls(0, 0, tuple(t))

    @property
    def exponents(self) -> Exponent:
        return (self.rho, self.tau, *self.t)

    @property
    def slope(self) -> int:
        """rho-exponent minus total t-degree."""
        return self.rho - sum(self.t)

    def describe(self, names: Sequence[str]) -> str:
        return f"(1 - {monomial_string(self.exponents, names)})"


@dataclass
class ControlledForm:
    """A finite sum of P / prod(1 - rho^m tau^n t^d)."""

    names: Tuple[str, ...]
    terms: List[Tuple[MultiPoly, Tuple[Denominator, ...]]] = field(default_factory=list)

    def add(self, numerator: MultiPoly, denominators: Iterable[Denominator] = ()) -> None:
        if numerator.names != self.names:
            raise ValueError("numerator lives over different variables")
        if not numerator.is_zero():
            self.terms.append((numerator, tuple(denominators)))

    def extend(self, other: "ControlledForm") -> None:
        for numerator, dens in other.terms:
            self.add(numerator, dens)

    def scaled(self, factor: MultiPoly) -> "ControlledForm":
        result = ControlledForm(self.names)
        for numerator, dens in self.terms:
            result.add(numerator * factor, dens)
        return result

    def expand(self, caps: Union[int, Sequence[int]]) -> TruncatedSeries:
        """The power series expansion up to the caps."""
        if isinstance(caps, int):
            caps = (caps,) * (len(self.names) - T0)
        total = TruncatedSeries(MultiPoly.zero(self.names), tuple(caps))
        for numerator, dens in self.terms:
            series = TruncatedSeries(numerator, tuple(caps))
            for den in dens:
                series = series.divide_by_one_minus(den.exponents)
            total = total + series
        return total

    def evaluate(self, values: Sequence[Union[int, Fraction]]) -> Fraction:
        """Exact value of the rational function at a point."""
        total = Fraction(0)
        for numerator, dens in self.terms:
            value = numerator.evaluate(values)
            for den in dens:
                base = MultiPoly.monomial(self.names, den.exponents).evaluate(values)
                if base == 1:
                    raise ZeroDivisionError(f"{den.describe(self.names)} vanishes at {values}")
                value /= 1 - base
            total += value
        return total


# Degrees and control


def deg_inverse(
    poly: MultiPoly, eta: Union[int, Fraction] = 0, rho_weight: Union[int, Fraction] = 1
) -> Optional[Fraction]:
    """max over monomials of rho_weight*a + eta*b - sum(c) for rho^a tau^b t^c.

    With eta = 0 and rho_weight = 1 this is the degree of P(rho, t^-1) in
    (rho, t). Returns None for the zero polynomial.
    """
    if poly.is_zero():
        return None
    return max(
        Fraction(rho_weight) * e[RHO] + Fraction(eta) * e[TAU] - sum(e[T0:])
        for e in poly.terms
    )


def dyadic_eta(check: Callable[[Fraction], bool]) -> Optional[Fraction]:
    """First eta of the dyadic grid 1, 1/2, 1/4, ... accepted by ``check``."""
    for eta in ETA_GRID:
        if check(eta):
            return eta
    return None


@dataclass
class ControlReport:
    """Outcome of an M-control certification."""

    M: int
    passed: bool
    bad_denominators: List[str] = field(default_factory=list)
    numerator_degree: Optional[Fraction] = None
    etas: Dict[Fraction, Optional[Fraction]] = field(default_factory=dict)

    def witness(self) -> str:
        if self.bad_denominators:
            return "denominators " + ", ".join(self.bad_denominators)
        if self.etas:
            return "; ".join(
                f"eps={e}: eta={'none' if eta is None else eta}" for e, eta in self.etas.items()
            )
        return f"numerator degree {self.numerator_degree}"


def certify_M_controlled(cf: ControlledForm, M: int) -> ControlReport:
    """Check that a controlled form is M-controlled.

    Every denominator must satisfy m - sum(d) <= -1. A numerator with
    nonnegative coefficients must have deg(P(rho, 1, t^-1)) <= M - 2; any
    other numerator needs, for each eps of EPSILONS, an eta of the dyadic grid
    with deg_inverse(P, eta) <= M - 2 + eps.
    """
    report = ControlReport(M=M, passed=True)
    for numerator, dens in cf.terms:
        for den in dens:
            if den.slope > -1:
                report.bad_denominators.append(den.describe(cf.names))
    if report.bad_denominators:
        report.passed = False
        return report

    signed = []
    worst: Optional[Fraction] = None
    for numerator, _ in cf.terms:
        if numerator.has_nonnegative_coefficients():
            degree = deg_inverse(numerator.specialize(TAU, 1))
            if degree is not None and degree > M - 2:
                report.passed = False
        else:
            signed.append(numerator)
            degree = deg_inverse(numerator)
        if degree is not None and (worst is None or degree > worst):
            worst = degree
    report.numerator_degree = worst

    for eps in EPSILONS:
        if not signed:
            break
        limit = M - 2 + eps
        eta = dyadic_eta(
            lambda eta, limit=limit: all(deg_inverse(p, eta) <= limit for p in signed)
        )
        report.etas[eps] = eta
        if eta is None:
            report.passed = False
    return report


# Model series attached to (a, nu, partition)


@dataclass(frozen=True)
class SeriesInstance:
    """Weights a_i, shifts nu_j and a partition {I_j} of range(len(a))."""

    a: Tuple[int, ...]
    nu: Tuple[int, ...]
    parts: Tuple[Tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if len(self.nu) != len(self.parts):
            raise ValueError(f"{len(self.nu)} shifts for {len(self.parts)} parts")
        covered = sorted(i for part in self.parts for i in part)
        if covered != list(range(len(self.a))):
            raise ValueError(f"parts {self.parts} do not partition {len(self.a)} variables")
        if any(not part for part in self.parts):
            raise ValueError("empty part")
        if any(x < 1 for x in self.a):
            raise ValueError(f"weights must be positive: {self.a}")
        if any(x < 0 for x in self.nu):
            raise ValueError(f"shifts must be nonnegative: {self.nu}")

    @classmethod
    def singletons(cls, a: Sequence[int], nu: Sequence[int]) -> "SeriesInstance":
        return cls(tuple(a), tuple(nu), tuple((k,) for k in range(len(a))))

    @property
    def key(self) -> str:
        return f"parts={list(map(list, self.parts))} a={list(self.a)} nu={list(self.nu)}"

    @property
    def nvars(self) -> int:
        return len(self.a)

    @property
    def names(self) -> Tuple[str, ...]:
        return series_names(self.nvars)

    def part_of(self, i: int) -> int:
        for j, part in enumerate(self.parts):
            if i in part:
                return j
        raise KeyError(i)

    def transversals(self) -> List[Tuple[int, ...]]:
        return [tuple(k) for k in itertools.product(*self.parts)]

    def m(self, transversal: Sequence[int]) -> int:
        return lcm(*(self.a[i] for i in transversal))

    def minimum(self, d: Sequence[int]) -> int:
        """Min_j (nu_j + sum_{i in I_j} a_i d_i)."""
        return min(
            nu + sum(self.a[i] * d[i] for i in part) for nu, part in zip(self.nu, self.parts)
        )

    def support_bounds(self) -> Tuple[int, ...]:
        """Largest index per variable at which a coefficient of F~ may be nonzero."""
        total_m = sum(self.m(k) for k in self.transversals())
        bounds = []
        for i in range(self.nvars):
            j0 = self.part_of(i)
            spread = max(abs(nu - self.nu[j0]) for nu in self.nu)
            bounds.append((total_m + spread) // self.a[i])
        return tuple(bounds)

    def has_unit_part(self) -> bool:
        """Some part with nu_j = 0 and every weight on it equal to 1."""
        return any(
            nu == 0 and all(self.a[i] == 1 for i in part) for nu, part in zip(self.nu, self.parts)
        )

    def denominators(self) -> List[Denominator]:
        """(1 - rho^{m_K} prod t_i^{m_K/a_i}) for every transversal K."""
        dens = []
        for k in self.transversals():
            m = self.m(k)
            t = [0] * self.nvars
            for i in k:
                t[i] = m // self.a[i]
            dens.append(Denominator(m, 0, tuple(t)))
        return dens


def _box(caps: Sequence[int]) -> Iterator[Tuple[int, ...]]:
    return itertools.product(*(range(c + 1) for c in caps))


def _box_size(caps: Sequence[int]) -> int:
    return prod(c + 1 for c in caps)


def _check_budget(what: str, caps: Sequence[int], max_terms: Optional[int]) -> None:
    size = _box_size(caps)
    if max_terms is not None and size > max_terms:
        raise BudgetExceeded(what, size, max_terms)


def series_F(
    a: Sequence[int],
    nu: Sequence[int],
    parts: Sequence[Sequence[int]],
    cap: Union[int, Sequence[int]],
) -> TruncatedSeries:
    """sum_d rho^{Min_j(nu_j + sum_{I_j} a_i d_i)} t^d over the truncation box."""
    inst = SeriesInstance(tuple(a), tuple(nu), tuple(tuple(p) for p in parts))
    caps = (cap,) * inst.nvars if isinstance(cap, int) else tuple(cap)
    terms = {(inst.minimum(d), 0, *d): 1 for d in _box(caps)}
    return TruncatedSeries(MultiPoly(inst.names, terms), caps)


def _clear_denominators(series: TruncatedSeries, dens: Iterable[Denominator]) -> TruncatedSeries:
    names = series.poly.names
    for den in dens:
        series = series * (MultiPoly.one(names) - MultiPoly.monomial(names, den.exponents))
    return series


def _check_shell(poly: MultiPoly, bounds: Sequence[int], what: str) -> None:
    for exps in sorted(poly.terms):
        if any(x > b for x, b in zip(exps[T0:], bounds)):
            raise IdentityFailure(
                f"{what}: nonzero coefficient beyond the support bound {tuple(bounds)}",
                witness=monomial_string(exps, poly.names),
            )


def numerator_Ftilde(
    a: Sequence[int],
    nu: Sequence[int],
    parts: Sequence[Sequence[int]],
    max_terms: Optional[int] = None,
) -> MultiPoly:
    """The polynomial F~ = prod_K (1 - rho^{m_K} t_K^{m_K/a}) prod (1 - t_i) F.

    The truncated product is taken one step past the support bound, and the
    coefficients on that outer shell must vanish.
    """
    inst = SeriesInstance(tuple(a), tuple(nu), tuple(tuple(p) for p in parts))
    bounds = inst.support_bounds()
    caps = tuple(b + 1 for b in bounds)
    _check_budget(f"F~ box for {inst.key}", caps, max_terms)
    series = series_F(inst.a, inst.nu, inst.parts, caps)
    series = _clear_denominators(
        series, inst.denominators() + [Denominator.of_t(inst.nvars, k) for k in range(inst.nvars)]
    )
    _check_shell(series.poly, bounds, f"F~ {inst.key}")
    return series.poly.truncate(bounds)


def ftilde_coefficient(inst: SeriesInstance, d: Sequence[int]) -> Dict[int, int]:
    """Coefficient of t^d in F~ as {rho-exponent: integer}, by inclusion-exclusion.

    Each transversal factor shifts d by m_K/a_i on K and multiplies by rho^{m_K};
    that power cancels against the drop of the Min, so only the sign survives.
    """
    shifts = []
    for k in inst.transversals():
        m = inst.m(k)
        shifts.append({i: m // inst.a[i] for i in k})
    result: Dict[int, int] = {}

    def walk(index: int, residual: List[int], sign: int) -> None:
        if index == len(shifts):
            for mu in itertools.product((0, 1), repeat=inst.nvars):
                if any(x > r for x, r in zip(mu, residual)):
                    continue
                exponent = inst.minimum([x - y for x, y in zip(d, mu)])
                result[exponent] = result.get(exponent, 0) + sign * (-1) ** sum(mu)
            return
        walk(index + 1, residual, sign)
        shift = shifts[index]
        if all(residual[i] >= s for i, s in shift.items()):
            nxt = list(residual)
            for i, s in shift.items():
                nxt[i] -= s
            walk(index + 1, nxt, -sign)

    walk(0, list(d), 1)
    return {e: c for e, c in result.items() if c}


def check_coefficient_formula(inst: SeriesInstance, poly: MultiPoly) -> None:
    """Compare F~ against the inclusion-exclusion coefficient formula on its support box."""
    by_degree: Dict[Tuple[int, ...], Dict[int, int]] = {}
    for exps, coeff in poly.terms.items():
        by_degree.setdefault(tuple(exps[T0:]), {})[exps[RHO]] = coeff
    for d in _box(inst.support_bounds()):
        expected = ftilde_coefficient(inst, d)
        actual = by_degree.get(tuple(d), {})
        if actual != expected:
            raise IdentityFailure(
                f"F~ {inst.key}: coefficient formula disagrees",
                witness=(d, expected, actual),
            )


def _gtilde_layout(
    j0: int, a: Sequence[int]
) -> Tuple[int, int, List[int]]:
    m = lcm(*a)
    others = [j for j in range(len(a)) if j != j0]
    n = lcm(*(a[j] for j in others)) if others else 0
    return m, n, others


def series_G(
    j0: int, a: Sequence[int], nu: Sequence[int], caps: Sequence[int]
) -> TruncatedSeries:
    """sum_d rho^{Min_J(nu_j + a_j d_j)} tau^{Min_{J-j0}(nu_j + a_j d_j)} t^d.

    With J = {j0} the tau-exponent tracks the Min over J itself.
    """
    if not 0 <= j0 < len(a):
        raise ValueError(f"j0={j0} outside J of size {len(a)}")
    names = series_names(len(a))
    terms = {}
    for d in _box(caps):
        values = [nu[j] + a[j] * d[j] for j in range(len(a))]
        others = [v for j, v in enumerate(values) if j != j0] or values
        terms[(min(values), min(others), *d)] = 1
    return TruncatedSeries(MultiPoly(names, terms), tuple(caps))


def gtilde_denominators(j0: int, a: Sequence[int]) -> List[Denominator]:
    """(1 - rho^m tau^m t^{m/a}) and, when J has other members, (1 - tau^n t_{J-j0}^{n/a})."""
    m, n, others = _gtilde_layout(j0, a)
    dens = [Denominator(m, m, tuple(m // x for x in a))]
    if others:
        t = tuple(n // a[j] if j in others else 0 for j in range(len(a)))
        dens.append(Denominator(0, n, t))
    return dens


def gtilde_support_bounds(j0: int, a: Sequence[int], nu: Sequence[int]) -> Tuple[int, ...]:
    m, n, _ = _gtilde_layout(j0, a)
    return tuple(
        (m + n + max(abs(x - nu[j]) for x in nu)) // a[j] + 1 for j in range(len(a))
    )


def numerator_Gtilde(
    j0: int, a: Sequence[int], nu: Sequence[int], max_terms: Optional[int] = None
) -> MultiPoly:
    """The polynomial G~: both G-denominators and prod (1 - t_j) cleared from G."""
    a, nu = tuple(a), tuple(nu)
    if len(a) != len(nu) or not a:
        raise ValueError("a and nu must be nonempty vectors over J")
    if any(x < 1 for x in a) or any(x < 0 for x in nu):
        raise ValueError(f"invalid weights {a} or shifts {nu}")
    bounds = gtilde_support_bounds(j0, a, nu)
    caps = tuple(b + 1 for b in bounds)
    _check_budget(f"G~ box for j0={j0} a={a} nu={nu}", caps, max_terms)
    series = series_G(j0, a, nu, caps)
    series = _clear_denominators(
        series, gtilde_denominators(j0, a) + [Denominator.of_t(len(a), k) for k in range(len(a))]
    )
    _check_shell(series.poly, bounds, f"G~ j0={j0} a={a} nu={nu}")
    return series.poly.truncate(bounds)


def check_gtilde_tau_one(j0: int, a: Sequence[int], nu: Sequence[int], gtilde: MultiPoly) -> None:
    """G~(tau=1) = (1 - t_{J-j0}^{n/a}) F~ for the singleton partition."""
    inst = SeriesInstance.singletons(a, nu)
    ftilde = numerator_Ftilde(inst.a, inst.nu, inst.parts)
    names = inst.names
    factor = MultiPoly.one(names)
    dens = gtilde_denominators(j0, a)
    if len(dens) > 1:
        factor = factor - MultiPoly.monomial(names, (0, 0, *dens[1].t))
    assert_equal(gtilde.specialize(TAU, 1), factor * ftilde, f"G~(tau=1) j0={j0} {inst.key}")


def _record(instance: str, prop: str, check: Callable[[], Optional[str]]) -> CertificationRecord:
    try:
        witness = check()
    except IdentityFailure as e:
        return CertificationRecord(
            instance=instance, property=prop, status="fail", witness=repr(e.witness)
        )
    except BudgetExceeded as e:
        return CertificationRecord(instance=instance, property=prop, status="skip", witness=str(e))
    return CertificationRecord(instance=instance, property=prop, status="pass", witness=witness)


def _expect(condition: bool, message: str, witness: object) -> None:
    if not condition:
        raise IdentityFailure(message, witness=witness)


def _eta_witnesses(poly: MultiPoly, degree: Callable[[Fraction], Optional[Fraction]]) -> str:
    found = []
    for eps in EPSILONS:
        eta = dyadic_eta(lambda eta, eps=eps: (degree(eta) or 0) <= eps)
        _expect(eta is not None, f"no eta on the dyadic grid for eps={eps}", str(poly))
        found.append(f"eps={eps}:eta={eta}")
    return " ".join(found)


def check_instance(
    inst: SeriesInstance, max_terms: Optional[int] = None
) -> List[CertificationRecord]:
    """Every model-series property of one (a, nu, partition) instance."""
    records = []
    state: Dict[str, MultiPoly] = {}

    def polynomiality() -> None:
        state["F"] = numerator_Ftilde(inst.a, inst.nu, inst.parts, max_terms)

    records.append(_record(inst.key, "F_polynomial", polynomiality))
    ftilde = state.get("F")
    if ftilde is None:
        return records

    def formula() -> None:
        work = _box_size(inst.support_bounds()) * 2 ** (len(inst.transversals()) + inst.nvars)
        if max_terms is not None and work > max_terms:
            raise BudgetExceeded(f"coefficient formula for {inst.key}", work, max_terms)
        check_coefficient_formula(inst, ftilde)

    records.append(_record(inst.key, "F_coefficient_formula", formula))

    if inst.has_unit_part():

        def degree_bound() -> str:
            degree = deg_inverse(ftilde)
            _expect(degree is not None and degree <= 0, "deg F~(rho, t^-1) > 0", degree)
            return f"deg={degree}"

        records.append(_record(inst.key, "F_degree_bound", degree_bound))

    records.append(
        _record(
            inst.key,
            "F_eta_degree",
            lambda: _eta_witnesses(ftilde, lambda eta: deg_inverse(ftilde, 0, rho_weight=eta)),
        )
    )

    if inst.parts == tuple((k,) for k in range(inst.nvars)):
        for j0 in range(inst.nvars):
            key = f"{inst.key} j0={j0}"

            def g_polynomial(j0: int = j0) -> None:
                state["G"] = numerator_Gtilde(j0, inst.a, inst.nu, max_terms)

            records.append(_record(key, "G_polynomial", g_polynomial))
            gtilde = state.pop("G", None)
            if gtilde is None:
                continue
            records.append(
                _record(
                    key,
                    "G_tau_one",
                    lambda j0=j0, g=gtilde: check_gtilde_tau_one(j0, inst.a, inst.nu, g),
                )
            )
            if any(nu == 0 and x == 1 for nu, x in zip(inst.nu, inst.a)):
                records.append(
                    _record(
                        key,
                        "G_eta_degree",
                        lambda g=gtilde: _eta_witnesses(g, lambda eta: deg_inverse(g, eta)),
                    )
                )
    return records


def grid_instances(
    max_variables: int, max_parts: int = 3, max_part_size: int = 2, max_a: int = 3, max_nu: int = 2
) -> Iterator[SeriesInstance]:
    """Instances with part sizes in decreasing order, weights <= max_a and shifts <= max_nu."""
    for n_parts in range(1, max_parts + 1):
        for sizes in itertools.combinations_with_replacement(
            range(max_part_size, 0, -1), n_parts
        ):
            total = sum(sizes)
            if total > max_variables:
                continue
            parts, start = [], 0
            for size in sizes:
                parts.append(tuple(range(start, start + size)))
                start += size
            for a in itertools.product(range(1, max_a + 1), repeat=total):
                for nu in itertools.product(range(max_nu + 1), repeat=n_parts):
                    yield SeriesInstance(a, nu, tuple(parts))


def _check_instance_job(args: Tuple[SeriesInstance, Optional[int]]) -> List[CertificationRecord]:
    return check_instance(*args)


def verify_series_grid(
    max_variables: int = 4,
    max_a: int = 3,
    max_nu: int = 2,
    max_terms: Optional[int] = None,
    jobs: int = 1,
) -> List[CertificationRecord]:
    """Certify the model-series properties on every grid instance, in instance order."""
    instances = list(grid_instances(max_variables, max_a=max_a, max_nu=max_nu))
    logger.info("Certifying %s model-series instances", len(instances))
    jobs_args = [(inst, max_terms) for inst in instances]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(_check_instance_job, jobs_args, chunksize=16))
    else:
        batches = [_check_instance_job(args) for args in jobs_args]
    return [record for batch in batches for record in batch]


# Local series of a surface


@dataclass(frozen=True)
class LocalLayout:
    """Variable bookkeeping for the local series of one admissible choice."""

    cox: CoxPresentation
    choice: AdmissibleChoice

    @property
    def names(self) -> Tuple[str, ...]:
        return series_names([self.cox.labels[i] for i in self.choice.I])

    @property
    def nvars(self) -> int:
        return len(self.choice.I)

    def part_positions(self) -> List[Tuple[int, ...]]:
        """Positions in I of each part I_j."""
        return [tuple(self.choice.position(i) for i in part) for part in self.choice.parts]

    def weights(self) -> Tuple[int, ...]:
        """b_i for each position of I; 0 for variables outside every monomial."""
        return tuple(
            0 if self.choice.part_of(i) is None else self.choice.exponent(i)
            for i in self.choice.I
        )

    def levels(self, g: Sequence[int], f: Sequence[int]) -> List[int]:
        """g_j + sum_{I_j} b_i f_i for every j."""
        b = self.weights()
        return [
            g[j] + sum(b[k] * f[k] for k in part) for j, part in enumerate(self.part_positions())
        ]

    def t_monomial(self, t: Sequence[int], rho: int = 0, tau: int = 0, coeff: int = 1) -> MultiPoly:
        return MultiPoly.monomial(self.names, (rho, tau, *t), coeff)

    def unit(self, k: int) -> Tuple[int, ...]:
        t = [0] * self.nvars
        t[k] = 1
        return tuple(t)

    def one_minus_t(self, positions: Iterable[int]) -> MultiPoly:
        """prod over positions of (1 - t_k)."""
        result = MultiPoly.one(self.names)
        for k in positions:
            result = result * (MultiPoly.one(self.names) - self.t_monomial(self.unit(k)))
        return result

    def t_denominators(self, positions: Iterable[int]) -> List[Denominator]:
        return [Denominator.of_t(self.nvars, k) for k in positions]

    def indicator(self, positions: Iterable[int]) -> Tuple[int, ...]:
        chosen = set(positions)
        return tuple(1 if k in chosen else 0 for k in range(self.nvars))

    def full_vector(self, g: Sequence[int], f: Sequence[int]) -> Tuple[int, ...]:
        e = [0] * self.cox.num_generators
        for j, x in zip(self.choice.J, g):
            e[j] = x
        for i, x in zip(self.choice.I, f):
            e[i] = x
        return tuple(e)


def _require_hypothesis(cox: CoxPresentation, choice: AdmissibleChoice) -> None:
    report = check_hypothesis_44(cox, choice)
    if not report.holds:
        raise ValueError(f"local series need the incidence hypothesis: {report.summary()}")


def _local_caps(layout: LocalLayout, cap: int, max_terms: Optional[int]) -> Tuple[int, ...]:
    if cap < 2:
        raise ValueError(f"cap {cap} is below 2, the degree of the closed forms")
    caps = (cap,) * layout.nvars
    _check_budget(f"local series box for {layout.cox.name}", caps, max_terms)
    return caps


def _nu_cache(layout: LocalLayout, g: Sequence[int]) -> Callable[[Sequence[int]], int]:
    cache: Dict[Tuple[int, ...], int] = {}

    def value(f: Sequence[int]) -> int:
        pattern = tuple(1 if x else 0 for x in f)
        if pattern not in cache:
            cache[pattern] = nu_zero(layout.cox, layout.choice, g, pattern)
        return cache[pattern]

    return value


def _g_vectors(size: int) -> Iterator[Tuple[int, ...]]:
    return itertools.product((0, 1), repeat=size)


def _transversal_data(layout: LocalLayout, g: Sequence[int], k: Sequence[int]):
    """Weights, shifts nu_j and start exponents s_j of a transversal K (positions in I).

    On a part with weight 1 the sum starts at 2 - g_j and nu_j = 0; otherwise it
    starts at 1 and nu_j = g_j + a_j - 2.
    """
    b = layout.weights()
    a = tuple(b[p] for p in k)
    nu, s = [], []
    for gj, aj in zip(g, a):
        if aj == 1:
            nu.append(0)
            s.append(2 - gj)
        else:
            nu.append(gj + aj - 2)
            s.append(1)
    return a, tuple(nu), tuple(s)


def _embedded_ftilde(
    layout: LocalLayout,
    a: Sequence[int],
    nu: Sequence[int],
    parts: Sequence[Sequence[int]],
    positions: Sequence[int],
    rho_to: int = RHO,
) -> MultiPoly:
    poly = numerator_Ftilde(a, nu, parts)
    mapping = {RHO: rho_to, TAU: TAU}
    mapping.update({T0 + l: T0 + p for l, p in enumerate(positions)})
    return poly.embed(layout.names, mapping)


def _start_monomial(
    layout: LocalLayout, k: Sequence[int], s: Sequence[int], rho: int, tau: int, coeff: int
) -> MultiPoly:
    t = [0] * layout.nvars
    for p, x in zip(k, s):
        t[p] = x
    return layout.t_monomial(t, rho=rho, tau=tau, coeff=coeff)


def _power_denominator(
    layout: LocalLayout, exps: Mapping[int, int], rho: int, tau: int
) -> Denominator:
    t = [0] * layout.nvars
    for p, e in exps.items():
        t[p] = e
    return Denominator(rho, tau, tuple(t))


def h1_closed_form(cox: CoxPresentation, choice: AdmissibleChoice, g: Sequence[int]) -> MultiPoly:
    """sum_m mu(g,m) t^m [1 + (rho - 1) prod_{j in Z(m)} (1 - prod_{I_j} (1 - t_i))].

    m runs over {0,1}^I and Z(m) is the set of j with g_j + sum_{I_j} m_i = 0.
    """
    layout = LocalLayout(cox, choice)
    names = layout.names
    one = MultiPoly.one(names)
    rho = MultiPoly.variable(names, "rho")
    parts = layout.part_positions()
    total = MultiPoly.zero(names)
    for m in _g_vectors(layout.nvars):
        mu = mu_zero(cox, layout.full_vector(g, m))
        if not mu:
            continue
        factor = one
        for j, part in enumerate(parts):
            if g[j] + sum(m[k] for k in part) == 0:
                factor = factor * (one - layout.one_minus_t(part))
        total = total + layout.t_monomial(m, coeff=mu) * (one + (rho - one) * factor)
    return total


def _f2_pieces(
    layout: LocalLayout, g: Sequence[int], k: Sequence[int], weight: int
) -> Tuple[MultiPoly, MultiPoly, Denominator]:
    """Prefactor, numerator and main denominator of one transversal's share of F_{2,g}."""
    a, nu, s = _transversal_data(layout, g, k)
    pre = _start_monomial(layout, k, s, rho=1, tau=0, coeff=weight)
    m = lcm(*a)
    ftilde = _embedded_ftilde(layout, a, nu, [(j,) for j in range(len(k))], k)
    numerator = MultiPoly.variable(layout.names, "rho") * ftilde
    den = _power_denominator(layout, {p: m // x for p, x in zip(k, a)}, rho=m, tau=0)
    return pre, numerator, den


def f2_closed_form(
    cox: CoxPresentation, choice: AdmissibleChoice, g: Sequence[int], multiply_by_t: bool = False
) -> ControlledForm:
    """F_{2,g} as a controlled form, or H_{2,g} = prod_I (1 - t_i) F_{2,g} when asked.

    Only incident transversals K carry terms:
    nu(g, K) rho t^s [rho F~(rho, a_K, nu) / ((1 - rho^m t^{m/a}) prod_K (1 - t)) - 1 / prod_K (1 - t)].
    """
    layout = LocalLayout(cox, choice)
    positions = [tuple(choice.position(i) for i in k) for k in choice.transversals()]
    form = ControlledForm(layout.names)
    for k in positions:
        if not cox.in_incidence(choice.I[p] for p in k):
            continue
        weight = nu_zero(cox, choice, g, layout.indicator(k))
        if not weight:
            continue
        pre, numerator, den = _f2_pieces(layout, g, k, weight)
        if multiply_by_t:
            rest = layout.one_minus_t(p for p in range(layout.nvars) if p not in k)
            form.add(pre * numerator * rest, [den])
            form.add(-pre * rest)
        else:
            t_dens = layout.t_denominators(k)
            form.add(pre * numerator, [den, *t_dens])
            form.add(-pre, t_dens)
    return form


@dataclass
class LocalSeries:
    """Truncations of F_g, F_{1,g}, F_{2,g}, H_{1,g}, H_{2,g} and the closed forms."""

    g: Tuple[int, ...]
    F: TruncatedSeries
    F1: TruncatedSeries
    F2: TruncatedSeries
    H1: TruncatedSeries
    H2: TruncatedSeries
    H1_closed: MultiPoly
    F2_closed: ControlledForm
    H2_closed: ControlledForm


def local_F_series(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    g: Sequence[int],
    cap: int,
    max_terms: Optional[int] = None,
) -> LocalSeries:
    """Direct truncations of the local series with both closed forms checked against them."""
    _require_hypothesis(cox, choice)
    g = tuple(g)
    if len(g) != choice.size or any(x not in (0, 1) for x in g):
        raise ValueError(f"g must be a 0/1 vector over J, got {g}")
    layout = LocalLayout(cox, choice)
    caps = _local_caps(layout, cap, max_terms)
    nu = _nu_cache(layout, g)
    full: Dict[Exponent, int] = {}
    clamped: Dict[Exponent, int] = {}
    for f in _box(caps):
        value = nu(f)
        if not value:
            continue
        level = min(layout.levels(g, f))
        key = (level, 0, *f)
        full[key] = full.get(key, 0) + value
        key = (min(1, level), 0, *f)
        clamped[key] = clamped.get(key, 0) + value
    F = TruncatedSeries(MultiPoly(layout.names, full), caps)
    F1 = TruncatedSeries(MultiPoly(layout.names, clamped), caps)
    F2 = F - F1
    clear = layout.one_minus_t(range(layout.nvars))
    H1 = F1 * clear
    H2 = F2 * clear

    H1_closed = h1_closed_form(cox, choice, g)
    assert_equal(H1.poly, H1_closed.truncate(caps), f"H1 closed form at g={g}")
    F2_closed = f2_closed_form(cox, choice, g)
    assert_equal(F2.poly, F2_closed.expand(caps).poly, f"F2 closed form at g={g}")
    H2_closed = f2_closed_form(cox, choice, g, multiply_by_t=True)
    logger.debug("Local series of %s at g=%s agree with their closed forms", cox.name, g)
    return LocalSeries(g, F, F1, F2, H1, H2, H1_closed, F2_closed, H2_closed)


def local_point(layout: LocalLayout, q: int) -> Tuple[Fraction, ...]:
    """(rho, tau, t) = (q, 1, 1/q, ..., 1/q)."""
    return (Fraction(q), Fraction(1), *([Fraction(1, q)] * layout.nvars))


def euler_factor_parts(
    cox: CoxPresentation, choice: AdmissibleChoice, q: int
) -> Tuple[Fraction, Fraction]:
    """sum_g H_{1,g}(q, 1/q) q^{-|g|} and sum_g H_{2,g}(q, 1/q) q^{-|g|}.

    The first is the local density of the surface at a place of norm q and the
    second vanishes.
    """
    layout = LocalLayout(cox, choice)
    point = local_point(layout, q)
    first = second = Fraction(0)
    for g in _g_vectors(choice.size):
        scale = Fraction(1, q ** sum(g))
        first += h1_closed_form(cox, choice, g).evaluate(point) * scale
        second += f2_closed_form(cox, choice, g, multiply_by_t=True).evaluate(point) * scale
    return first, second


# j0-variants


@dataclass
class LocalJ0Series:
    """Truncations of F_{j0,g}, F_{j0,1,g}, F_{j0,2,g} and the majorant H_{j0,1,g}."""

    g: Tuple[int, ...]
    j0: int
    F: TruncatedSeries
    F1: TruncatedSeries
    F2: TruncatedSeries
    H1: MultiPoly


def j0_majorant(
    cox: CoxPresentation, choice: AdmissibleChoice, j0: int, g: Sequence[int]
) -> MultiPoly:
    """sum_m |mu(g,m)| t^m H_m with H_m = 1 + (rho tau - 1) P_Z (+ tau Q when j0 is in Z).

    P_Z = prod_{j in Z} (1 - prod_{I_j} (1 - t)) and
    Q = prod_{I_j0} (1 - t) prod_{j in Z - j0} (1 - prod_{I_j} (1 - t)).
    """
    layout = LocalLayout(cox, choice)
    names = layout.names
    one = MultiPoly.one(names)
    rho_tau = MultiPoly.monomial(names, (1, 1, *([0] * layout.nvars)))
    tau = MultiPoly.variable(names, "tau")
    parts = layout.part_positions()
    total = MultiPoly.zero(names)
    for m in _g_vectors(layout.nvars):
        mu = abs(mu_zero(cox, layout.full_vector(g, m)))
        if not mu:
            continue
        zero = [j for j, part in enumerate(parts) if g[j] + sum(m[k] for k in part) == 0]
        product_z = one
        for j in zero:
            product_z = product_z * (one - layout.one_minus_t(parts[j]))
        h_m = one + (rho_tau - one) * product_z
        if j0 in zero:
            extra = layout.one_minus_t(parts[j0])
            for j in zero:
                if j != j0:
                    extra = extra * (one - layout.one_minus_t(parts[j]))
            h_m = h_m + tau * extra
        total = total + layout.t_monomial(m, coeff=mu) * h_m
    return total


def _t_coefficients(poly: MultiPoly, rho: Fraction, tau: Fraction) -> Dict[Tuple[int, ...], Fraction]:
    result: Dict[Tuple[int, ...], Fraction] = {}
    for exps, coeff in poly.terms.items():
        key = tuple(exps[T0:])
        result[key] = result.get(key, Fraction(0)) + coeff * rho ** exps[RHO] * tau ** exps[TAU]
    return result


def sample_points(seed: int, count: int = 4) -> List[Tuple[Fraction, Fraction]]:
    """(1, 1) followed by pseudo-random positive rho and tau >= 1."""
    rng = random.Random(seed)
    points = [(Fraction(1), Fraction(1))]
    for _ in range(count - 1):
        rho = Fraction(rng.randint(1, 12), rng.randint(1, 4))
        tau = Fraction(rng.randint(4, 16), 4)
        points.append((rho, tau))
    return points


def local_Fj0_series(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    j0: int,
    g: Sequence[int],
    cap: int,
    seed: int = 0,
    max_terms: Optional[int] = None,
) -> LocalJ0Series:
    """|nu|-weighted series with tau tracking the Min over J - j0; the majorant is checked."""
    _require_hypothesis(cox, choice)
    g = tuple(g)
    if choice.size < 2:
        raise ValueError("the j0-variants need at least two linear variables")
    if not 0 <= j0 < choice.size:
        raise ValueError(f"j0={j0} outside J of size {choice.size}")
    layout = LocalLayout(cox, choice)
    caps = _local_caps(layout, cap, max_terms)
    nu = _nu_cache(layout, g)
    full: Dict[Exponent, int] = {}
    clamped: Dict[Exponent, int] = {}
    for f in _box(caps):
        value = abs(nu(f))
        if not value:
            continue
        levels = layout.levels(g, f)
        low = min(levels)
        low_others = min(x for j, x in enumerate(levels) if j != j0)
        key = (low, low_others, *f)
        full[key] = full.get(key, 0) + value
        key = (min(1, low), min(1, low_others), *f)
        clamped[key] = clamped.get(key, 0) + value
    F = TruncatedSeries(MultiPoly(layout.names, full), caps)
    F1 = TruncatedSeries(MultiPoly(layout.names, clamped), caps)

    H1 = j0_majorant(cox, choice, j0, g)
    bound = ControlledForm(layout.names)
    bound.add(H1, layout.t_denominators(range(layout.nvars)))
    expanded = bound.expand(caps).poly
    for rho, tau in sample_points(seed):
        lower = _t_coefficients(F1.poly, rho, tau)
        upper = _t_coefficients(expanded, rho, tau)
        for f in sorted(lower):
            if lower[f] > upper.get(f, Fraction(0)):
                raise IdentityFailure(
                    f"majorant of F_(j0,1) fails at g={g} j0={j0}",
                    witness=(f, str(rho), str(tau)),
                )
    return LocalJ0Series(g, j0, F, F1, F - F1, H1)


# Decomposition of F_{j0,2,g}


@dataclass
class AppendixReport:
    """The three pieces of F_{j0,2,g}: direct truncations, closed forms and their control."""

    g: Tuple[int, ...]
    j0: int
    direct: Tuple[TruncatedSeries, TruncatedSeries, TruncatedSeries]
    closed: Tuple[ControlledForm, ControlledForm, ControlledForm]
    control: Tuple[ControlReport, ControlReport, ControlReport]

    @property
    def certified(self) -> bool:
        return all(report.passed for report in self.control)


def _pair_form(
    layout: LocalLayout, g: Sequence[int], pair: Sequence[int], parts_j: Sequence[int]
) -> ControlledForm:
    """tau t^s / prod(1 - t) [tau F~(tau, a, nu) / (1 - tau^m t^{m/a}) - 1] on two variables.

    ``pair`` holds one position from each of the two parts ``parts_j``.
    """
    g_pair = [g[j] for j in parts_j]
    a, nu, s = _transversal_data(layout, g_pair, pair)
    m = lcm(*a)
    tau = MultiPoly.variable(layout.names, "tau")
    pre = _start_monomial(layout, pair, s, rho=0, tau=1, coeff=1)
    ftilde = _embedded_ftilde(layout, a, nu, [(0,), (1,)], pair, rho_to=TAU)
    den = _power_denominator(layout, {p: m // x for p, x in zip(pair, a)}, rho=0, tau=m)
    t_dens = layout.t_denominators(pair)
    form = ControlledForm(layout.names)
    form.add(pre * tau * ftilde, [den, *t_dens])
    form.add(-pre, t_dens)
    return form


def _split_part_form(
    layout: LocalLayout, g: Sequence[int], j1: int, j2: int, i1: int, i2: int, k: int
) -> ControlledForm:
    """Two variables i1, i2 of I_j1 and one variable k of I_j2, all with positive exponent."""
    b = layout.weights()
    a = (b[i1], b[i2], b[k])
    nu_j1 = g[j1] + b[i1] + b[i2] - 2
    if b[k] == 1:
        nu_k, s_k = 0, 2 - g[j2]
    else:
        nu_k, s_k = g[j2] + b[k] - 2, 1
    tau = MultiPoly.variable(layout.names, "tau")
    pre = _start_monomial(layout, (i1, i2, k), (1, 1, s_k), rho=0, tau=1, coeff=1)
    ftilde = _embedded_ftilde(layout, a, (nu_j1, nu_k), [(0, 1), (2,)], (i1, i2, k), rho_to=TAU)
    m1, m2 = lcm(a[0], a[2]), lcm(a[1], a[2])
    den1 = _power_denominator(layout, {i1: m1 // a[0], k: m1 // a[2]}, rho=0, tau=m1)
    den2 = _power_denominator(layout, {i2: m2 // a[1], k: m2 // a[2]}, rho=0, tau=m2)
    t_dens = layout.t_denominators((i1, i2, k))
    form = ControlledForm(layout.names)
    form.add(pre * tau * ftilde, [den1, den2, *t_dens])
    form.add(-pre, t_dens)
    return form


def _off_j0_form(layout: LocalLayout, g: Sequence[int], j0: int) -> ControlledForm:
    """Sum over supports avoiding I_j0 and meeting the two other parts, weighted by |nu|.

    Supports are a pair (one variable per remaining part), a pair plus one free
    variable, or two variables of one remaining part plus one of the other.
    """
    cox, choice = layout.cox, layout.choice
    parts = layout.part_positions()
    others = [j for j in range(choice.size) if j != j0]
    free = [choice.position(i) for i in choice.free]
    form = ControlledForm(layout.names)

    def weight(support: Sequence[int]) -> int:
        if not cox.in_incidence(choice.I[p] for p in support):
            return 0
        return abs(nu_zero(cox, choice, g, layout.indicator(support)))

    for pair in itertools.product(*(parts[j] for j in others)):
        base = _pair_form(layout, g, pair, others)
        w = weight(pair)
        if w:
            form.extend(base.scaled(MultiPoly.one(layout.names) * w))
        for p in free:
            w = weight((*pair, p))
            if w:
                extra = ControlledForm(layout.names)
                for numerator, dens in base.terms:
                    extra.add(
                        numerator * layout.t_monomial(layout.unit(p), coeff=w),
                        [*dens, Denominator.of_t(layout.nvars, p)],
                    )
                form.extend(extra)
    for j1 in others:
        (j2,) = [j for j in others if j != j1]
        for i1, i2 in itertools.combinations(parts[j1], 2):
            for k in parts[j2]:
                w = weight((i1, i2, k))
                if w:
                    form.extend(
                        _split_part_form(layout, g, j1, j2, i1, i2, k).scaled(
                            MultiPoly.one(layout.names) * w
                        )
                    )
    return form


def _level_zero_form(layout: LocalLayout, g: Sequence[int], j0: int) -> ControlledForm:
    """Piece with rho-level 0 at j0; it needs g_j0 = 0 and f = 0 on I_j0."""
    if g[j0]:
        return ControlledForm(layout.names)
    return _off_j0_form(layout, g, j0)


def _level_one_form(layout: LocalLayout, g: Sequence[int], j0: int) -> ControlledForm:
    """Piece with rho-level exactly 1 at j0."""
    names = layout.names
    rho = MultiPoly.variable(names, "rho")
    if g[j0] == 1:
        return _off_j0_form(layout, g, j0).scaled(rho)
    cox, choice = layout.cox, layout.choice
    b = layout.weights()
    others = [j for j in range(choice.size) if j != j0]
    form = ControlledForm(names)
    for k in (tuple(choice.position(i) for i in t) for t in choice.transversals()):
        i0 = k[j0]
        if b[i0] != 1 or not cox.in_incidence(choice.I[p] for p in k):
            continue
        w = abs(nu_zero(cox, choice, g, layout.indicator(k)))
        if not w:
            continue
        pair = tuple(k[j] for j in others)
        factor = rho * layout.t_monomial(layout.unit(i0), coeff=w)
        form.extend(_pair_form(layout, g, pair, others).scaled(factor))
    return form


def _high_level_form(layout: LocalLayout, g: Sequence[int], j0: int) -> ControlledForm:
    """Piece with every level at least 2, one term per incident transversal."""
    cox, choice = layout.cox, layout.choice
    names = layout.names
    rho_tau = MultiPoly.monomial(names, (1, 1, *([0] * layout.nvars)))
    form = ControlledForm(names)
    for k in (tuple(choice.position(i) for i in t) for t in choice.transversals()):
        if not cox.in_incidence(choice.I[p] for p in k):
            continue
        w = abs(nu_zero(cox, choice, g, layout.indicator(k)))
        if not w:
            continue
        a, nu, s = _transversal_data(layout, g, k)
        pre = _start_monomial(layout, k, s, rho=1, tau=1, coeff=w)
        gtilde = numerator_Gtilde(j0, a, nu)
        mapping = {RHO: RHO, TAU: TAU}
        mapping.update({T0 + j: T0 + p for j, p in enumerate(k)})
        gtilde = gtilde.embed(names, mapping)
        dens = []
        for den in gtilde_denominators(j0, a):
            dens.append(
                _power_denominator(
                    layout, {p: den.t[j] for j, p in enumerate(k) if den.t[j]}, den.rho, den.tau
                )
            )
        t_dens = layout.t_denominators(k)
        form.add(pre * rho_tau * gtilde, [*dens, *t_dens])
        form.add(-pre, t_dens)
    return form


def appendix_decomposition(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    j0: int,
    g: Sequence[int],
    cap: int,
    seed: int = 0,
    max_terms: Optional[int] = None,
) -> AppendixReport:
    """Split F_{j0,2,g} by the levels at j0 and check every piece in closed form.

    With L_j = g_j + sum_{I_j} b_i f_i, A = Min_J L_j and B = Min_{J-j0} L_j,
    the pieces collect the f with (L_j0 = 0, B >= 2), (L_j0 = 1, B >= 2) and
    A >= 2, with summands |nu| (tau^B - tau), |nu| (rho tau^B - rho tau) and
    |nu| (rho^A tau^B - rho tau).
    """
    if cox.dim != 2 or choice.size != 3:
        raise ValueError("the decomposition is set up for surfaces with three linear variables")
    g = tuple(g)
    j0_series = local_Fj0_series(cox, choice, j0, g, cap, seed=seed, max_terms=max_terms)
    layout = LocalLayout(cox, choice)
    caps = j0_series.F.caps
    nu = _nu_cache(layout, g)
    pieces: List[Dict[Exponent, int]] = [{}, {}, {}]

    def bump(index: int, exps: Exponent, value: int) -> None:
        pieces[index][exps] = pieces[index].get(exps, 0) + value

    for f in _box(caps):
        value = abs(nu(f))
        if not value:
            continue
        levels = layout.levels(g, f)
        low = min(levels)
        low_others = min(x for j, x in enumerate(levels) if j != j0)
        if low >= 2:
            bump(2, (low, low_others, *f), value)
            bump(2, (1, 1, *f), -value)
        elif low_others >= 2 and levels[j0] == 0:
            bump(0, (0, low_others, *f), value)
            bump(0, (0, 1, *f), -value)
        elif low_others >= 2 and levels[j0] == 1:
            bump(1, (1, low_others, *f), value)
            bump(1, (1, 1, *f), -value)
    direct = tuple(TruncatedSeries(MultiPoly(layout.names, p), caps) for p in pieces)
    assert_equal(
        direct[0].poly + direct[1].poly + direct[2].poly,
        j0_series.F2.poly,
        f"pieces of F_(j0,2) at g={g} j0={j0}",
    )

    closed = (
        _level_zero_form(layout, g, j0),
        _level_one_form(layout, g, j0),
        _high_level_form(layout, g, j0),
    )
    for index, (series, form) in enumerate(zip(direct, closed)):
        assert_equal(
            series.poly, form.expand(caps).poly, f"closed form of piece {index} at g={g} j0={j0}"
        )
    M = sum(g)
    control = tuple(certify_M_controlled(form, M) for form in closed)
    return AppendixReport(g, j0, direct, closed, control)  # type: ignore[arg-type]


# Certification of a surface's local series


def verify_local_series(
    cox: CoxPresentation,
    choice: AdmissibleChoice,
    cap: int,
    seed: int = 0,
    max_terms: Optional[int] = None,
    primes: Sequence[int] = (2, 3, 5),
) -> List[CertificationRecord]:
    """Closed forms, degree bounds, control, the vanishing Euler sum, majorants and pieces."""
    _require_hypothesis(cox, choice)
    records: List[CertificationRecord] = []
    name = f"{cox.name} J={choice.describe(cox)}"
    for g in _g_vectors(choice.size):
        key = f"{name} g={g}"
        state: Dict[str, LocalSeries] = {}

        def closed_forms(g: Tuple[int, ...] = g) -> None:
            state["series"] = local_F_series(cox, choice, g, cap, max_terms)

        records.append(_record(key, "H1_H2_closed_forms", closed_forms))
        series = state.get("series")
        if series is None:
            continue
        M = sum(g)

        def h1_degree(series: LocalSeries = series, M: int = M) -> str:
            poly = series.H1_closed if M else series.H1_closed - 1
            degree = deg_inverse(poly)
            limit = M - 2
            _expect(degree is None or degree <= limit, f"deg H1 exceeds {limit}", degree)
            return f"deg={degree}"

        records.append(_record(key, "H1_degree", h1_degree))

        def h2_control(series: LocalSeries = series, M: int = M) -> str:
            report = certify_M_controlled(series.H2_closed, M)
            _expect(report.passed, f"H2 is not {M}-controlled", report.witness())
            return report.witness()

        records.append(_record(key, "H2_controlled", h2_control))

        for j0 in range(choice.size):

            def pieces(g: Tuple[int, ...] = g, j0: int = j0) -> str:
                report = appendix_decomposition(cox, choice, j0, g, cap, seed, max_terms)
                bad = [str(k) for k, r in enumerate(report.control) if not r.passed]
                _expect(not bad, "pieces not |g|-controlled", bad)
                return "; ".join(r.witness() for r in report.control)

            records.append(_record(f"{key} j0={j0}", "F_j0_2_pieces", pieces))

    for q in primes:

        def euler_sum(q: int = q) -> str:
            _, second = euler_factor_parts(cox, choice, q)
            _expect(second == 0, f"sum of H2 at q={q} is nonzero", str(second))
            return f"q={q}"

        records.append(_record(name, "H2_euler_sum", euler_sum))
    return records
