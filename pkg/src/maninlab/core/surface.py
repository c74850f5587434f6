"""Cox presentations of intrinsic linear hypersurfaces.

A presentation lists the Cox ring generators with their Picard classes, the
single relation sum_j s_j * prod_{i in I_j} s_i^{b_{i,j}}, the maximal faces of
the incidence complex and generators of the effective cone. Everything is
immutable after loading.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property, reduce
from math import gcd
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import yaml
from pydantic import ValidationError
from sympy import Matrix

from maninlab.catalog import get_surface_document
from maninlab.core.errors import SurfaceDataError
from maninlab.models.surface_document import SurfaceDocument

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PicClass:
    """A class in Pic(X), as integer coordinates in the presentation's basis."""

    coords: Tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))

    @property
    def rank(self) -> int:
        return len(self.coords)

    def __add__(self, other: "PicClass") -> "PicClass":
        self._check(other)
        return PicClass(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: "PicClass") -> "PicClass":
        self._check(other)
        return PicClass(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self) -> "PicClass":
        return PicClass(tuple(-a for a in self.coords))

    def __mul__(self, factor: int) -> "PicClass":
        return PicClass(tuple(factor * a for a in self.coords))

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not any(self.coords)

    def _check(self, other: "PicClass") -> None:
        if other.rank != self.rank:
            raise ValueError(f"Picard rank mismatch: {self.rank} vs {other.rank}")

    @classmethod
    def zero(cls, rank: int) -> "PicClass":
        return cls((0,) * rank)


def pairing(y: Sequence[int], cls: PicClass) -> int:
    """<y, cls> for y given in the dual basis of the presentation's Picard basis."""
    if len(y) != cls.rank:
        raise ValueError(f"dual vector of length {len(y)} cannot pair with rank {cls.rank}")
    return sum(a * b for a, b in zip(y, cls.coords))


@dataclass(frozen=True)
class RelationTerm:
    """One monomial s_linear * prod s_i^b of the Cox relation."""

    linear: int
    factors: Tuple[Tuple[int, int], ...]

    @property
    def variables(self) -> Tuple[int, ...]:
        return (self.linear,) + tuple(i for i, _ in self.factors)


@dataclass(frozen=True)
class CoxPresentation:
    """Cox ring of an intrinsic linear hypersurface with its combinatorial data."""

    name: str
    picard_rank: int
    basis_labels: Tuple[str, ...]
    generators: Tuple[Tuple[str, PicClass], ...]
    relation: Tuple[RelationTerm, ...]
    incidence_maximal: Tuple[FrozenSet[int], ...]
    effective_cone: Tuple[PicClass, ...]
    description: Optional[str] = field(default=None, compare=False)

    @cached_property
    def labels(self) -> Tuple[str, ...]:
        return tuple(label for label, _ in self.generators)

    @cached_property
    def classes(self) -> Tuple[PicClass, ...]:
        return tuple(cls for _, cls in self.generators)

    @property
    def num_generators(self) -> int:
        return len(self.generators)

    @property
    def dim(self) -> int:
        """Dimension of X: number of generators minus Picard rank minus one."""
        return self.num_generators - self.picard_rank - 1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError as e:
            raise KeyError(f"unknown generator '{label}' on surface {self.name}") from e

    def monomial_degree(self, term: RelationTerm) -> PicClass:
        degree = self.classes[term.linear]
        for i, b in term.factors:
            degree = degree + b * self.classes[i]
        return degree

    @cached_property
    def d_tot(self) -> PicClass:
        """Degree of the relation."""
        return self.monomial_degree(self.relation[0])

    def in_incidence(self, subset: Iterable[int]) -> bool:
        """Membership in the incidence complex (downward closure of the maximal faces)."""
        subset = frozenset(subset)
        if not subset:
            return True
        return any(subset <= face for face in self.incidence_maximal)

    @cached_property
    def incidence_faces(self) -> FrozenSet[FrozenSet[int]]:
        faces = {frozenset()}
        for face in self.incidence_maximal:
            for size in range(1, len(face) + 1):
                faces.update(frozenset(c) for c in itertools.combinations(sorted(face), size))
        return frozenset(faces)

    @property
    def max_face_size(self) -> int:
        return max((len(face) for face in self.incidence_maximal), default=0)

    def face_labels(self, subset: Iterable[int]) -> List[str]:
        return [self.labels[i] for i in sorted(subset)]


@dataclass(frozen=True)
class AdmissibleChoice:
    """A choice J of linear variables whose complement classes form a lattice basis.

    Positions in ``J``, ``parts`` and ``exponents`` follow the order of the
    relation's monomials; ``I`` is sorted. ``a[j][k]`` is the coefficient of
    F_{I[k]} in G_j.
    """

    J: Tuple[int, ...]
    I: Tuple[int, ...]
    parts: Tuple[Tuple[int, ...], ...]
    exponents: Tuple[Tuple[int, ...], ...]
    a: Tuple[Tuple[int, ...], ...]
    f_classes: Tuple[PicClass, ...]
    g_classes: Tuple[PicClass, ...]
    f_inverse: Tuple[Tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return len(self.J)

    def position(self, i: int) -> int:
        """Position of generator ``i`` inside I."""
        return self.I.index(i)

    def part_of(self, i: int) -> Optional[int]:
        """Position j with i in I_j, or None for a variable outside every monomial."""
        for j, part in enumerate(self.parts):
            if i in part:
                return j
        return None

    def exponent(self, i: int) -> int:
        """b_{i,j} for the monomial containing i."""
        j = self.part_of(i)
        if j is None:
            raise KeyError(f"generator {i} lies in no monomial of this choice")
        return self.exponents[j][self.parts[j].index(i)]

    @cached_property
    def free(self) -> Tuple[int, ...]:
        """Variables of I that appear in no monomial."""
        return tuple(i for i in self.I if self.part_of(i) is None)

    def f_pairings(self, y: Sequence[int]) -> Tuple[int, ...]:
        """<y, F_i> for i in I, in the order of I."""
        return tuple(pairing(y, cls) for cls in self.f_classes)

    def g_pairings(self, y: Sequence[int]) -> Tuple[int, ...]:
        """<y, G_j> for j in J."""
        return tuple(pairing(y, cls) for cls in self.g_classes)

    def y_from_pairings(self, d: Sequence[int]) -> Tuple[int, ...]:
        """The dual vector y with <y, F_i> = d_i."""
        if len(d) != len(self.I):
            raise ValueError(f"expected {len(self.I)} pairings, got {len(d)}")
        return tuple(sum(row[k] * d[k] for k in range(len(d))) for row in self.f_inverse)

    def transversals(self) -> List[Tuple[int, ...]]:
        """Subsets of the union of the I_j meeting every I_j in exactly one element."""
        return [tuple(k) for k in itertools.product(*self.parts)]

    def describe(self, cox: CoxPresentation) -> str:
        return "{" + ", ".join(cox.labels[j] for j in self.J) + "}"


@dataclass
class Hypothesis44Report:
    """Outcome of the incidence hypothesis check for one admissible choice."""

    holds: bool
    max_face_size: int
    bound: int
    oversized_faces: List[List[str]] = field(default_factory=list)
    bad_transversals: List[List[str]] = field(default_factory=list)

    def summary(self) -> str:
        if self.holds:
            return f"hypothesis_4_4: true (max face size {self.max_face_size} <= {self.bound})"
        parts = []
        if self.oversized_faces:
            parts.append(f"faces larger than {self.bound}: {self.oversized_faces}")
        if self.bad_transversals:
            parts.append(f"transversals without exponent 1: {self.bad_transversals}")
        return "hypothesis_4_4: false; " + "; ".join(parts)


# Loading


def _location(loc: Tuple[Any, ...]) -> str:
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path


def load_surface(document: Union[str, Mapping[str, Any]]) -> CoxPresentation:
    """Parse and validate a surface document (YAML text or an already parsed mapping).

    Raises:
        SurfaceDataError: On schema errors and invariant violations, with a field path.
    """
    if isinstance(document, str):
        try:
            document = yaml.safe_load(document)
        except yaml.YAMLError as e:
            raise SurfaceDataError(f"invalid YAML: {e}") from e
    if not isinstance(document, Mapping):
        raise SurfaceDataError("surface document must be a mapping")

    try:
        doc = SurfaceDocument.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise SurfaceDataError(first["msg"], path=_location(first["loc"])) from e

    return _build_presentation(doc)


def load_surface_file(path: Union[str, Path]) -> CoxPresentation:
    path = Path(path).expanduser()
    if not path.exists():
        raise FileNotFoundError(f"Surface file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return load_surface(f.read())


def load_catalog_surface(name: str) -> CoxPresentation:
    return load_surface(get_surface_document(name))


def resolve_surface(name_or_path: str) -> CoxPresentation:
    """Load a surface given either a catalog name or a path to a YAML file."""
    if name_or_path.endswith((".yaml", ".yml")) or Path(name_or_path).expanduser().is_file():
        return load_surface_file(name_or_path)
    return load_catalog_surface(name_or_path)


def builtin_sextic_a1() -> CoxPresentation:
    """Degree 6 del Pezzo surface of type A1 (three collinear points blown up)."""
    return load_catalog_surface("sextic_a1")


def toy_transversal_surface() -> CoxPresentation:
    """Synthetic presentation whose transversal {y1, y2, y3} is incident."""
    return load_catalog_surface("toy_transversal")


def _build_presentation(doc: SurfaceDocument) -> CoxPresentation:
    rho = doc.picard_rank
    if len(doc.basis_labels) != rho:
        raise SurfaceDataError(
            f"{len(doc.basis_labels)} basis labels for Picard rank {rho}", path="basis_labels"
        )

    generators: List[Tuple[str, PicClass]] = []
    seen: Dict[str, int] = {}
    for k, entry in enumerate(doc.generators):
        if entry.label in seen:
            raise SurfaceDataError(f"duplicate label '{entry.label}'", path=f"generators[{k}]")
        if len(entry.class_) != rho:
            raise SurfaceDataError(
                f"class has length {len(entry.class_)}, expected {rho}",
                path=f"generators[{k}].class",
            )
        seen[entry.label] = k
        generators.append((entry.label, PicClass(tuple(entry.class_))))

    def lookup(label: str, path: str) -> int:
        if label not in seen:
            raise SurfaceDataError(f"unknown generator '{label}'", path=path)
        return seen[label]

    relation: List[RelationTerm] = []
    used: Dict[int, str] = {}
    for j, entry in enumerate(doc.relation):
        linear = lookup(entry.linear, f"relation[{j}].linear")
        factors = []
        for k, factor in enumerate(entry.factors):
            factors.append((lookup(factor.label, f"relation[{j}].factors[{k}].label"), factor.exponent))
        term = RelationTerm(linear=linear, factors=tuple(factors))
        for var in term.variables:
            if var in used:
                raise SurfaceDataError(
                    f"variable '{doc.generators[var].label}' appears in two monomials "
                    f"({used[var]} and relation[{j}])",
                    path=f"relation[{j}]",
                )
            used[var] = f"relation[{j}]"
        relation.append(term)

    faces = []
    for k, face in enumerate(doc.incidence_maximal):
        faces.append(frozenset(lookup(label, f"incidence_maximal[{k}]") for label in face))
    maximal = tuple(
        sorted(
            {f for f in faces if not any(f < other for other in faces)},
            key=lambda f: (-len(f), sorted(f)),
        )
    )

    cone = []
    for k, ray in enumerate(doc.effective_cone):
        if len(ray) != rho:
            raise SurfaceDataError(
                f"ray has length {len(ray)}, expected {rho}", path=f"effective_cone[{k}]"
            )
        cone.append(PicClass(tuple(ray)))

    cox = CoxPresentation(
        name=doc.name,
        picard_rank=rho,
        basis_labels=tuple(doc.basis_labels),
        generators=tuple(generators),
        relation=tuple(relation),
        incidence_maximal=maximal,
        effective_cone=tuple(cone),
        description=doc.description,
    )

    reference = cox.d_tot
    for j, term in enumerate(cox.relation):
        degree = cox.monomial_degree(term)
        if degree != reference:
            raise SurfaceDataError(
                f"monomial degree {list(degree.coords)} differs from {list(reference.coords)} "
                f"of the first monomial (offending j = {j})",
                path=f"relation[{j}]",
            )

    if cox.num_generators - len(cox.relation) != rho:
        raise SurfaceDataError(
            f"{cox.num_generators} generators and {len(cox.relation)} linear variables "
            f"leave {cox.num_generators - len(cox.relation)} classes for Picard rank {rho}",
            path="relation",
        )
    if default_choice(cox) is None:
        raise SurfaceDataError(
            "classes outside the linear variables do not form a unimodular basis",
            path="relation",
        )

    logger.info(
        "Loaded surface %s: rank %s, %s generators, %s maximal faces",
        cox.name,
        rho,
        cox.num_generators,
        len(maximal),
    )
    return cox


# Classes


def anticanonical(cox: CoxPresentation) -> PicClass:
    """-K_X = sum of generator classes minus the degree of the relation."""
    total = PicClass.zero(cox.picard_rank)
    for cls in cox.classes:
        total = total + cls
    return total - cox.d_tot


def class_divisibility(cls: PicClass) -> int:
    """Largest d with cls divisible by d in the lattice."""
    if cls.is_zero():
        raise ValueError("anticanonical is zero")
    return reduce(gcd, (abs(c) for c in cls.coords))


def kx_divisibility(cox: CoxPresentation) -> int:
    """The index delta of K_X in Pic(X)."""
    return class_divisibility(anticanonical(cox))


def change_basis(
    cox: CoxPresentation, new_basis: Sequence[PicClass], labels: Sequence[str]
) -> CoxPresentation:
    """Re-express every class in a new lattice basis (given in current coordinates)."""
    if len(new_basis) != cox.picard_rank or len(labels) != cox.picard_rank:
        raise ValueError("new basis must have exactly picard_rank elements")
    basis = Matrix([list(b.coords) for b in new_basis]).T
    if abs(basis.det()) != 1:
        raise ValueError("new basis is not unimodular")
    inverse = basis.inv()

    def convert(cls: PicClass) -> PicClass:
        return PicClass(tuple(int(c) for c in inverse * Matrix(list(cls.coords))))

    return CoxPresentation(
        name=cox.name,
        picard_rank=cox.picard_rank,
        basis_labels=tuple(labels),
        generators=tuple((label, convert(cls)) for label, cls in cox.generators),
        relation=cox.relation,
        incidence_maximal=cox.incidence_maximal,
        effective_cone=tuple(convert(c) for c in cox.effective_cone),
        description=cox.description,
    )


# Admissible choices


def _make_choice(
    cox: CoxPresentation, selected: Sequence[int]
) -> Optional[AdmissibleChoice]:
    parts, exponents = [], []
    for term, chosen in zip(cox.relation, selected):
        members = [(term.linear, 1)] + list(term.factors)
        rest = [(i, b) for i, b in members if i != chosen]
        parts.append(tuple(i for i, _ in rest))
        exponents.append(tuple(b for _, b in rest))
    J = tuple(selected)
    I = tuple(i for i in range(cox.num_generators) if i not in J)
    if len(I) != cox.picard_rank:
        return None
    f_classes = tuple(cox.classes[i] for i in I)
    basis = Matrix([list(c.coords) for c in f_classes]).T
    if abs(basis.det()) != 1:
        return None
    inverse = basis.inv()
    a = []
    for j in J:
        solution = inverse * Matrix(list(cox.classes[j].coords))
        a.append(tuple(int(c) for c in solution))
    # y = (B^T)^{-1} d solves <y, F_i> = d_i
    dual_inverse = basis.T.inv()
    return AdmissibleChoice(
        J=J,
        I=I,
        parts=tuple(parts),
        exponents=tuple(exponents),
        a=tuple(a),
        f_classes=f_classes,
        g_classes=tuple(cox.classes[j] for j in J),
        f_inverse=tuple(tuple(int(c) for c in dual_inverse.row(r)) for r in range(len(I))),
    )


def default_choice(cox: CoxPresentation) -> Optional[AdmissibleChoice]:
    """The choice J given by the relation as written, if admissible."""
    return _make_choice(cox, [term.linear for term in cox.relation])


def admissible_choices(cox: CoxPresentation) -> List[AdmissibleChoice]:
    """Every admissible choice obtained by picking an exponent-1 variable per monomial."""
    candidates = []
    for term in cox.relation:
        candidates.append([term.linear] + [i for i, b in term.factors if b == 1])
    choices = []
    for selected in itertools.product(*candidates):
        choice = _make_choice(cox, selected)
        if choice is not None:
            choices.append(choice)
    logger.info("Surface %s has %s admissible choices", cox.name, len(choices))
    return choices


def incident_transversals(cox: CoxPresentation, choice: AdmissibleChoice) -> List[Tuple[int, ...]]:
    """Transversals of the partition {I_j} that are incidence faces."""
    return [k for k in choice.transversals() if cox.in_incidence(k)]


def check_hypothesis_44(
    cox: CoxPresentation, choice: Optional[AdmissibleChoice] = None
) -> Hypothesis44Report:
    """Check the two incidence conditions needed by the local series estimates.

    1. No incidence face has more than dim X + 1 elements.
    2. Every incident transversal contains a variable with exponent 1.
    """
    choice = choice or default_choice(cox)
    if choice is None:
        raise SurfaceDataError("surface has no default admissible choice")
    bound = cox.dim + 1
    oversized = [
        cox.face_labels(face) for face in cox.incidence_maximal if len(face) > bound
    ]
    bad = [
        cox.face_labels(k)
        for k in incident_transversals(cox, choice)
        if all(choice.exponent(i) != 1 for i in k)
    ]
    return Hypothesis44Report(
        holds=not oversized and not bad,
        max_face_size=cox.max_face_size,
        bound=bound,
        oversized_faces=oversized,
        bad_transversals=bad,
    )
