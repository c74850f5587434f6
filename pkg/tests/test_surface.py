"""Tests for surface loading, classes and admissible choices."""

import pytest
import yaml

from maninlab.catalog import get_surface_document
from maninlab.core.errors import SurfaceDataError
from maninlab.core.surface import (
    PicClass,
    admissible_choices,
    anticanonical,
    change_basis,
    check_hypothesis_44,
    class_divisibility,
    default_choice,
    incident_transversals,
    kx_divisibility,
    load_surface,
    load_surface_file,
    pairing,
    resolve_surface,
)


def _labels(cox, indices):
    return frozenset(cox.labels[i] for i in indices)


def test_sextic_shape(sextic):
    """Picard rank 4, seven generators, a surface."""
    assert sextic.picard_rank == 4
    assert sextic.num_generators == 7
    assert sextic.dim == 2
    assert sextic.d_tot == PicClass((1, 0, 0, 0))


def test_sextic_anticanonical(sextic):
    """-K = 3h - e1 - e2 - e3 with divisibility 1."""
    assert anticanonical(sextic) == PicClass((3, -1, -1, -1))
    assert kx_divisibility(sextic) == 1


def test_sextic_incidence(sextic):
    """The three lines meet; the exceptional curves do not."""
    eta = [sextic.index(f"eta{k}") for k in (1, 2, 3)]
    m = [sextic.index(f"m{k}") for k in (1, 2, 3)]
    assert not sextic.in_incidence(eta)
    assert sextic.in_incidence(m)
    assert sextic.max_face_size == 3


def test_sextic_lines_miss_the_strict_transform(sextic):
    """(h - e_i).(h - e1 - e2 - e3) = 0, while eta_i meets lambda."""
    lam = sextic.index("lambda")
    for k in (1, 2, 3):
        assert not sextic.in_incidence([sextic.index(f"m{k}"), lam])
        assert sextic.in_incidence([sextic.index(f"eta{k}"), lam])
        assert sextic.in_incidence([sextic.index(f"m{k}"), sextic.index(f"eta{k}")])


def test_change_basis_anticanonical(sextic):
    """In the basis (h - e1 - e2 - e3, e1, e2, e3) the class -K reads (3, 2, 2, 2)."""
    basis = [
        PicClass((1, -1, -1, -1)),
        PicClass((0, 1, 0, 0)),
        PicClass((0, 0, 1, 0)),
        PicClass((0, 0, 0, 1)),
    ]
    moved = change_basis(sextic, basis, ["l", "e1", "e2", "e3"])
    assert anticanonical(moved) == PicClass((3, 2, 2, 2))
    assert moved.labels == sextic.labels


def test_change_basis_rejects_non_unimodular(sextic):
    """A basis of index 2 is refused."""
    basis = [PicClass((2, 0, 0, 0)), PicClass((0, 1, 0, 0)), PicClass((0, 0, 1, 0)), PicClass((0, 0, 0, 1))]
    with pytest.raises(ValueError, match="unimodular"):
        change_basis(sextic, basis, ["a", "b", "c", "d"])


def test_sextic_admissible_choices(sextic):
    """Exactly four admissible choices; {eta1, m2, m3} is not one of them."""
    found = {_labels(sextic, c.J) for c in admissible_choices(sextic)}
    assert found == {
        frozenset({"m1", "m2", "m3"}),
        frozenset({"eta1", "eta2", "m3"}),
        frozenset({"eta1", "m2", "eta3"}),
        frozenset({"m1", "eta2", "eta3"}),
    }
    assert frozenset({"eta1", "m2", "m3"}) not in found


def test_default_choice(sextic, sextic_choice):
    """The relation as written picks the lines m_i."""
    assert _labels(sextic, sextic_choice.J) == {"m1", "m2", "m3"}
    assert sextic_choice.describe(sextic) == "{m1, m2, m3}"


def test_g_classes_decompose_over_f_classes(sextic):
    """sum_i a_{i,j} F_i = G_j for every admissible choice."""
    for choice in admissible_choices(sextic):
        for row, g in zip(choice.a, choice.g_classes):
            total = PicClass.zero(sextic.picard_rank)
            for coeff, f in zip(row, choice.f_classes):
                total = total + coeff * f
            assert total == g


def test_y_from_pairings_inverts_f_pairings(sextic_choice):
    """y_from_pairings is the inverse of f_pairings."""
    for d in [(0, 0, 0, 0), (1, 0, 2, 1), (3, 1, 1, 0)]:
        y = sextic_choice.y_from_pairings(d)
        assert sextic_choice.f_pairings(y) == d


def test_pairing_length_mismatch():
    """A dual vector must match the rank."""
    with pytest.raises(ValueError):
        pairing((1, 2), PicClass((1, 2, 3)))


@pytest.mark.parametrize("coords,expected", [((2, 4, 6), 2), ((3, -1, -1, -1), 1), ((0, 5), 5)])
def test_class_divisibility(coords, expected):
    """Largest divisor of a nonzero class."""
    assert class_divisibility(PicClass(coords)) == expected


def test_class_divisibility_of_zero():
    """The zero class has no divisibility."""
    with pytest.raises(ValueError, match="anticanonical is zero"):
        class_divisibility(PicClass((0, 0)))


def test_hypothesis_holds_on_sextic(sextic):
    """Faces have at most three elements and no transversal is incident."""
    report = check_hypothesis_44(sextic)
    assert report.holds
    assert report.summary().startswith("hypothesis_4_4: true")
    assert incident_transversals(sextic, default_choice(sextic)) == []


def test_hypothesis_holds_on_toy(toy):
    """The toy surface has one incident transversal, with exponent 1."""
    choice = default_choice(toy)
    assert [_labels(toy, k) for k in incident_transversals(toy, choice)] == [
        frozenset({"y1", "y2", "y3"})
    ]
    assert check_hypothesis_44(toy).holds


def test_hypothesis_fails_on_large_face(toy):
    """A four-element face breaks the size condition and is reported."""
    doc = {
        "name": "big_face",
        "picard_rank": 3,
        "basis_labels": ["e1", "e2", "e3"],
        "generators": [
            {"label": label, "class": list(cls.coords)}
            for label, cls in toy.generators
        ],
        "relation": [
            {"linear": f"x{k}", "factors": [{"label": f"y{k}", "exponent": 1}]}
            for k in (1, 2, 3)
        ],
        "incidence_maximal": [["x1", "x2", "x3", "y1"], ["y1", "y2", "y3"]],
        "effective_cone": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
    }
    report = check_hypothesis_44(load_surface(doc))
    assert not report.holds
    assert report.oversized_faces == [["x1", "x2", "x3", "y1"]]


def test_hypothesis_fails_on_heavy_transversal():
    """An incident transversal whose exponents are all 2 is reported."""
    doc = {
        "name": "heavy",
        "picard_rank": 3,
        "basis_labels": ["e1", "e2", "e3"],
        "generators": [
            {"label": "x1", "class": [0, 2, 2]},
            {"label": "x2", "class": [2, 0, 2]},
            {"label": "x3", "class": [2, 2, 0]},
            {"label": "y1", "class": [1, 0, 0]},
            {"label": "y2", "class": [0, 1, 0]},
            {"label": "y3", "class": [0, 0, 1]},
        ],
        "relation": [
            {"linear": f"x{k}", "factors": [{"label": f"y{k}", "exponent": 2}]}
            for k in (1, 2, 3)
        ],
        "incidence_maximal": [["y1", "y2", "y3"], ["x1", "x2", "x3"]],
        "effective_cone": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
    }
    report = check_hypothesis_44(load_surface(doc))
    assert not report.holds
    assert report.bad_transversals == [["y1", "y2", "y3"]]
    assert "hypothesis_4_4: false" in report.summary()


def test_branching_surface_loads(branching):
    """A monomial with two factors gives a part of size two."""
    choice = default_choice(branching)
    assert branching.dim == 2
    assert [len(part) for part in choice.parts] == [2, 1, 1]
    assert _labels(branching, choice.free) == {"w"}
    assert check_hypothesis_44(branching).holds


def test_zero_exponent_rejected(branching_document):
    """Exponents b_{i,j} must be positive."""
    doc = branching_document
    doc["relation"][1]["factors"][0]["exponent"] = 0
    with pytest.raises(SurfaceDataError, match="exponent must be ≥ 1") as excinfo:
        load_surface(doc)
    assert excinfo.value.path == "relation[1].factors[0].exponent"


def test_unequal_monomial_degrees_rejected(branching_document):
    """Every monomial of the relation has the same class."""
    doc = branching_document
    doc["generators"][1]["class"] = [1, 1, 1, 1, 0]
    with pytest.raises(SurfaceDataError, match="differs") as excinfo:
        load_surface(doc)
    assert excinfo.value.path == "relation[1]"


def test_unknown_label_rejected(branching_document):
    """Faces may only name declared generators."""
    doc = branching_document
    doc["incidence_maximal"].append(["nobody"])
    with pytest.raises(SurfaceDataError, match="unknown generator"):
        load_surface(doc)


def test_non_unimodular_complement_rejected(branching_document):
    """Complement classes that are no lattice basis leave no admissible choice."""
    doc = branching_document
    doc["generators"][7]["class"] = [0, 0, 0, 0, 2]
    with pytest.raises(SurfaceDataError, match="unimodular"):
        load_surface(doc)


def test_invalid_yaml_rejected():
    """Unparsable YAML text is a surface data error."""
    with pytest.raises(SurfaceDataError, match="invalid YAML"):
        load_surface("name: [unclosed")


def test_surface_file_round_trip(tmp_path, sextic):
    """A YAML file and a catalog name give the same presentation."""
    path = tmp_path / "sextic.yaml"
    path.write_text(yaml.safe_dump(get_surface_document("sextic_a1")), encoding="utf-8")
    assert load_surface_file(path) == sextic
    assert resolve_surface(str(path)) == sextic


def test_missing_surface_file(tmp_path):
    """A missing path raises FileNotFoundError."""
    with pytest.raises(FileNotFoundError):
        resolve_surface(str(tmp_path / "absent.yaml"))
