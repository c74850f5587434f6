"""Shared surfaces for the maninlab tests."""

import copy

import pytest

from maninlab.core.ff1 import CurveContext
from maninlab.core.surface import (
    builtin_sextic_a1,
    default_choice,
    load_surface,
    toy_transversal_surface,
)

# Two-level partition: the first monomial has two factors y1, z1.
BRANCHING_DOCUMENT = {
    "name": "branching",
    "picard_rank": 5,
    "basis_labels": ["e1", "e2", "e3", "e4", "e5"],
    "generators": [
        {"label": "x1", "class": [0, 0, 1, 1, 0]},
        {"label": "x2", "class": [1, 1, 0, 1, 0]},
        {"label": "x3", "class": [1, 1, 1, 0, 0]},
        {"label": "y1", "class": [1, 0, 0, 0, 0]},
        {"label": "z1", "class": [0, 1, 0, 0, 0]},
        {"label": "y2", "class": [0, 0, 1, 0, 0]},
        {"label": "y3", "class": [0, 0, 0, 1, 0]},
        {"label": "w", "class": [0, 0, 0, 0, 1]},
    ],
    "relation": [
        {
            "linear": "x1",
            "factors": [{"label": "y1", "exponent": 1}, {"label": "z1", "exponent": 1}],
        },
        {"linear": "x2", "factors": [{"label": "y2", "exponent": 1}]},
        {"linear": "x3", "factors": [{"label": "y3", "exponent": 1}]},
    ],
    "incidence_maximal": [
        ["y1", "y2", "y3"],
        ["z1", "y2", "y3"],
        ["y1", "z1", "y2"],
        ["y2", "y3", "w"],
        ["x1", "x2", "x3"],
    ],
    "effective_cone": [
        [1, 0, 0, 0, 0],
        [0, 1, 0, 0, 0],
        [0, 0, 1, 0, 0],
        [0, 0, 0, 1, 0],
        [0, 0, 0, 0, 1],
    ],
}


@pytest.fixture(scope="session")
def sextic():
    return builtin_sextic_a1()


@pytest.fixture(scope="session")
def sextic_choice(sextic):
    return default_choice(sextic)


@pytest.fixture(scope="session")
def toy():
    return toy_transversal_surface()


@pytest.fixture
def branching_document():
    return copy.deepcopy(BRANCHING_DOCUMENT)


@pytest.fixture(scope="session")
def branching():
    return load_surface(BRANCHING_DOCUMENT)


@pytest.fixture(params=[2, 3], ids=["F2", "F3"])
def ctx(request):
    return CurveContext(request.param)
