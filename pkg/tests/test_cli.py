"""Tests for the maninlab command line."""

import csv

import pytest
import yaml

from maninlab import __version__
from maninlab.catalog import get_surface_document
from maninlab.cli import EXIT_BUDGET, EXIT_FAILED, EXIT_INPUT, EXIT_OK, main
from maninlab.models.config import OUTPUT_ENV_VAR, RunConfig


@pytest.fixture(autouse=True)
def _workspace(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV_VAR, str(tmp_path / "runs"))
    monkeypatch.setenv("HOME", str(tmp_path / "home"))
    monkeypatch.chdir(tmp_path)


def _heavy_toy(tmp_path):
    """The toy surface with every y_j squared: admissible, but its transversal is too heavy."""
    doc = get_surface_document("toy_transversal")
    doc = yaml.safe_load(yaml.safe_dump(doc))
    doc["name"] = "heavy_toy"
    for term in doc["relation"]:
        term["factors"][0]["exponent"] = 2
    for generator, cls in zip(doc["generators"][:3], ([0, 2, 2], [2, 0, 2], [2, 2, 0])):
        generator["class"] = cls
    path = tmp_path / "heavy_toy.yaml"
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    return path


def test_no_command_prints_help(capsys):
    assert main([]) == EXIT_OK
    assert "usage: maninlab" in capsys.readouterr().out


def test_version(capsys):
    assert main(["version"]) == EXIT_OK
    assert f"maninlab {__version__}" in capsys.readouterr().out


def test_validate_sextic(capsys):
    assert main(["validate"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "hypothesis_4_4: true" in out
    assert "{m1, m2, m3}" in out


def test_validate_malformed_file(tmp_path, capsys):
    path = tmp_path / "broken.yaml"
    path.write_text("name: [unclosed", encoding="utf-8")
    assert main(["validate", "--surface", str(path)]) == EXIT_INPUT
    assert "invalid YAML" in capsys.readouterr().out


def test_validate_missing_file(tmp_path):
    assert main(["validate", "--surface", str(tmp_path / "absent.yaml")]) == EXIT_INPUT


def test_validate_heavy_transversal(tmp_path, capsys):
    assert main(["validate", "--surface", str(_heavy_toy(tmp_path))]) == EXIT_FAILED
    assert "hypothesis_4_4: false" in capsys.readouterr().out


def test_count_writes_tables(tmp_path):
    out = tmp_path / "counts.csv"
    assert main(["count", "--q", "3", "--bound", "0", "--depth", "2", "--out", str(out)]) == EXIT_OK
    with open(out, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert [(r["y"], r["hom"], r["n0"], r["n1"]) for r in rows] == [("(0,0,0,0)", "2", "9", "-7")]
    assert (tmp_path / "counts_summary.csv").exists()
    assert list((tmp_path / "runs").glob("*/*_count.jsonl"))


def test_count_no_store(tmp_path):
    assert main(["count", "--q", "2", "--bound", "0", "--depth", "1", "--no-store"]) == EXIT_OK
    assert not (tmp_path / "runs").exists()


def test_count_rejects_prime_power(capsys):
    assert main(["count", "--q", "4", "--bound", "0"]) == EXIT_INPUT
    assert "prime" in capsys.readouterr().out


def test_count_budget_exit(tmp_path):
    (tmp_path / "maninlab.yaml").write_text("budget:\n  max_terms: 1\n", encoding="utf-8")
    out = tmp_path / "partial.csv"
    assert main(["count", "--bound", "2", "--depth", "1", "--out", str(out)]) == EXIT_BUDGET
    assert out.read_text(encoding="utf-8").startswith("y,d,hom")


def test_count_with_oracle():
    assert main(["count", "--q", "2", "--bound", "2", "--depth", "1", "--oracle", "--no-store"]) == EXIT_OK


def test_cones(tmp_path, capsys):
    out = tmp_path / "cones.csv"
    code = main(["cones", "--lambda-grid", "0,1/2", "--out", str(out), "--no-store"])
    assert code == EXIT_OK
    text = capsys.readouterr().out
    assert "alpha = 1/144" in text
    assert "sup ratio = 1" in text
    assert out.read_text(encoding="utf-8").splitlines()[-1] == "sextic_a1,0,1/144,1/144,1"


def test_cones_bad_grid(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["cones", "--lambda-grid", "1/0"])
    assert excinfo.value.code == 2


def test_gamma(capsys):
    assert main(["gamma", "--q", "5", "--depth", "3", "--no-store"]) == EXIT_OK
    assert "<= gamma <=" in capsys.readouterr().out


def test_certify_small(tmp_path, capsys):
    config = tmp_path / "small.yaml"
    config.write_text("series:\n  cap: 2\n  grid_max_variables: 1\n", encoding="utf-8")
    assert main(["certify", "--config", str(config), "--no-store"]) == EXIT_OK
    assert "0 failed, 0 skipped" in capsys.readouterr().out


def test_init_creates_and_skips(tmp_path, capsys):
    target = tmp_path / "project"
    target.mkdir()
    assert main(["init", "-d", str(target)]) == EXIT_OK
    assert (target / "maninlab.yaml").exists()
    assert (target / ".env.maninlab").exists()
    capsys.readouterr()

    assert main(["init", "-d", str(target)]) == EXIT_OK
    assert "Skipped" in capsys.readouterr().out


def test_init_template_loads(tmp_path):
    """The written template is a valid configuration."""
    assert main(["init", "-d", str(tmp_path)]) == EXIT_OK
    config = RunConfig.from_yaml(tmp_path / "maninlab.yaml")
    assert config.surface == "sextic_a1"


def test_init_missing_directory(tmp_path):
    assert main(["init", "-d", str(tmp_path / "nowhere")]) == EXIT_INPUT
