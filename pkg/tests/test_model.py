import copy
import json

import numpy as np
import pytest

from pkmdyn.errors import InvariantError, SchemaError
from pkmdyn.model import (
    bundled_model_path,
    dumps_model,
    load_bundled,
    load_model,
    model_to_dict,
    models_equal,
    split_theta,
    validate_equimobility,
)


@pytest.fixture(scope="module")
def gsp_doc():
    return json.loads(bundled_model_path("gsp").read_text())


@pytest.fixture(scope="module")
def planar_doc():
    return json.loads(bundled_model_path("planar_3rrr").read_text())


def test_gsp_fixture_structure(gsp):
    assert gsp.n_limbs == 6 and gsp.dof == 6
    for k, limb in enumerate(gsp.limbs):
        assert limb.n_joints == 6
        if k < 5:
            assert limb.cut_joint_rows == (3, 4, 5)
            assert limb.n_tree == 3
        else:
            assert limb.cut_joint_rows == ()
            assert limb.n_tree == 6
    assert gsp.n_actuators == 6


def test_planar_fixture_structure(planar):
    assert planar.n_limbs == 3 and planar.dof == 2
    P_p = np.zeros((6, 2))
    P_p[3, 0] = P_p[4, 1] = 1.0
    assert np.array_equal(planar.P_p, P_p)
    for limb in planar.limbs:
        assert limb.n_joints == 3 and limb.dof == 3
        assert limb.task_rows.tolist() == [2, 3, 4]
        assert np.array_equal(limb.D_t, limb.P_t @ planar.P_p)


def test_equimobility_reports(gsp, planar):
    assert all(r["equimobile"] and r["dof_limb"] == 6 for r in validate_equimobility(gsp))
    assert not any(r["equimobile"] for r in validate_equimobility(planar))


def test_identity_task_selection_is_equimobile(planar_doc):
    # the planar mechanism driven in all three planar freedoms: D_t = I
    doc = copy.deepcopy(planar_doc)
    doc["dof"] = 3
    doc["P_p"] = np.eye(6)[:, [2, 3, 4]].tolist()
    for limb in doc["limbs"]:
        limb["D_t"] = np.eye(3).tolist()
    m = load_model(doc)
    assert all(r["equimobile"] for r in validate_equimobility(m))


def test_too_few_actuators_rejected(gsp_doc):
    doc = copy.deepcopy(gsp_doc)
    doc["limbs"][0]["actuated_joint"] = None
    doc["sea"] = {k: v[:5] for k, v in doc["sea"].items()}
    with pytest.raises(InvariantError, match="actuators"):
        load_model(doc)


def test_load_is_deterministic_and_round_trips(any_model):
    text = dumps_model(any_model)
    a = load_model(text)
    b = load_model(text.encode())
    assert models_equal(a, b)
    assert models_equal(a, any_model)
    assert dumps_model(a) == text
    assert model_to_dict(load_model(model_to_dict(a))) == model_to_dict(a)


def _mutate(doc, path, value):
    doc = copy.deepcopy(doc)
    node = doc
    for key in path[:-1]:
        node = node[key]
    node[path[-1]] = value
    return doc


@pytest.mark.parametrize(
    "path,value,error",
    [
        (("dof",), 7, SchemaError),
        (("gravity",), [0, 0], SchemaError),
        (("limbs", 0, "joints", 0, "screw"), [0, 0, 2, 0, 0, 0], InvariantError),
        (("limbs", 0, "joints", 0, "ref_config", "rotation"), [[1, 0, 0], [0, 1, 0], [0, 0, -1]], InvariantError),
        (("limbs", 0, "P_t", 0), [1, 1, 0, 0, 0, 0], InvariantError),
        (("limbs", 0, "cut_joint_rows"), [2], InvariantError),
        (("limbs", 0, "actuated_joint"), 5, InvariantError),
        (("limbs", 0, "bodies"), [], InvariantError),
        (("sea", "stiffness"), [1, 1, 1, 1, 1, 0], InvariantError),
        (("limbs", 0, "joints", 0, "limits"), [1.0, -1.0], InvariantError),
        (("limbs", 0, "D_t"), np.zeros((6, 6)).tolist(), InvariantError),
    ],
)
def test_invalid_documents_rejected(gsp_doc, path, value, error):
    with pytest.raises(error):
        load_model(_mutate(gsp_doc, path, value))


def test_missing_field_is_schema_error(gsp_doc):
    doc = copy.deepcopy(gsp_doc)
    del doc["limbs"][2]["bodies"]
    with pytest.raises(SchemaError, match="bodies"):
        load_model(doc)


def test_non_symmetric_mass_matrix_rejected(gsp_doc):
    M = np.array(gsp_doc["limbs"][0]["bodies"][0]["mass_matrix"])
    M[0, 3] += 1e-3
    doc = _mutate(gsp_doc, ("limbs", 0, "bodies", 0, "mass_matrix"), M.tolist())
    with pytest.raises(InvariantError, match="symmetric"):
        load_model(doc)


def test_indefinite_mass_matrix_rejected(gsp_doc):
    M = -np.eye(6)
    doc = _mutate(gsp_doc, ("limbs", 0, "bodies", 0, "mass_matrix"), M.tolist())
    with pytest.raises(InvariantError, match="semidefinite"):
        load_model(doc)


def test_zero_mass_matrix_allowed(gsp_doc):
    doc = _mutate(gsp_doc, ("limbs", 0, "bodies", 1, "mass_matrix"), np.zeros((6, 6)).tolist())
    load_model(doc)


def test_mass_matrices_are_body_frame_rigid_body_form(any_model):
    for limb in any_model.limbs:
        for M in limb.masses:
            m = M[5, 5]
            assert np.allclose(M[3:, 3:], m * np.eye(3))
            assert np.allclose(M[:3, 3:], -M[3:, :3])
            assert np.min(np.linalg.eigvalsh(M)) >= -1e-10


def test_split_theta(gsp):
    flat = np.arange(36.0)
    parts = split_theta(gsp, flat)
    assert [p.tolist() for p in parts] == [list(range(6 * k, 6 * k + 6)) for k in range(6)]
    assert split_theta(gsp, parts)[3] is not None
    with pytest.raises(ValueError):
        split_theta(gsp, np.zeros(35))


def test_bundled_models_are_frozen():
    m = load_bundled("gsp")
    with pytest.raises(ValueError):
        m.limbs[0].screws[0, 0] = 2.0
