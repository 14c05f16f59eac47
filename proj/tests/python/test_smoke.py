import math

import pytest

import ricci


def test_catalog_and_verbs():
    names = [s["name"] for s in ricci.catalog()]
    assert "cone" in names and "static-cone-flow" in names
    assert all(s["name"].endswith("flow") for s in ricci.catalog("flow"))
    assert "ricci-measure" in ricci.verbs()


def test_config_precedence():
    cfg = ricci.config("cone", {"quadrature": {"order": 7}}, alpha=0.25, t=[0.1, 0.3])
    assert cfg["params"]["alpha"] == 0.25
    assert cfg["quadrature"]["order"] == 7
    assert cfg["flow"]["times"] == [0.1, 0.3]


def test_config_errors_name_the_key():
    with pytest.raises(ricci.ConfigError) as err:
        ricci.config("cone", {"quadrature": {"ordr": 3}})
    assert err.value.args[0] == "quadrature.ordr"
    with pytest.raises(ricci.UnknownScenarioError):
        ricci.config("nowhere")


def test_flat_run_is_deterministic(tmp_path):
    a, code = ricci.run("flat-2d", timing=False, out=tmp_path)
    b, _ = ricci.run("flat-2d", timing=False)
    assert code == 0 and a["pass"]
    assert a == b
    assert (tmp_path / "report.json").exists()


def test_cone_atom():
    doc, status = ricci.verb("qform-alexandrov", "cone", alpha=0.5)
    assert status == 0
    assert doc["atoms"] == pytest.approx(math.pi, rel=1e-6)


def test_measure_verb():
    doc, status = ricci.verb("ricci-measure", "cone")
    assert status == 0
    assert doc["atoms"][0]["mass_matrix"][0][0] == pytest.approx(math.pi, rel=1e-2)


def test_flow_check():
    doc, status = ricci.verb("flow-check", "static-cone-flow")
    assert status == 0 and doc["verdict"] == "PASS"
    doc, status = ricci.verb("flow-check", "cone", t=0.1)
    assert status == 2 and doc["verdict"] == "FAIL"


def test_unsupported_geometry():
    with pytest.raises(ricci.UnsupportedGeometryError):
        ricci.verb("qform-kahler", "sphere")
