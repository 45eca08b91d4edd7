import json

import numpy as np
import pytest

from retargetkit.errors import DataError
from retargetkit.motionio import (
    MotionSequence,
    ObjectMesh,
    ShapeParams,
    load_motion,
    load_obj,
    load_skeleton,
    save_motion,
    save_obj,
    save_skeleton,
)

from conftest import make_chain


def _write_json(path, doc):
    path.write_text(json.dumps(doc))
    return path


def _joint(name, parent, offset):
    return {
        "name": name,
        "parent": parent,
        "offset": list(offset),
        "q_min": [-1.0, -1.0, -1.0],
        "q_max": [1.0, 1.0, 1.0],
        "v_min": -5.0,
        "v_max": 5.0,
    }


class TestLoadSkeleton:
    def test_two_joint_chain(self, tmp_path):
        path = _write_json(
            tmp_path / "skel.json",
            {"joints": [_joint("root", None, (0, 0, 0)), _joint("child", 0, (0, 1, 0))],
             "foot_joints": [1]},
        )
        skel = load_skeleton(path)
        assert skel.joint_count == 2
        assert skel.parents[1] == 0
        assert skel.foot_joints == {1}
        np.testing.assert_allclose(skel.rest_offsets[1], [0, 1, 0])

    def test_child_before_parent_rejected(self, tmp_path):
        path = _write_json(
            tmp_path / "skel.json",
            {"joints": [_joint("root", None, (0, 0, 0)),
                        _joint("a", 2, (0, 1, 0)),
                        _joint("b", 0, (0, 1, 0))]},
        )
        with pytest.raises(DataError, match="topologically"):
            load_skeleton(path)

    def test_limit_order_names_joint(self, tmp_path):
        bad = _joint("elbow", 0, (0, 1, 0))
        bad["q_min"] = [0.5, 0.0, 0.0]
        bad["q_max"] = [0.1, 1.0, 1.0]
        path = _write_json(
            tmp_path / "skel.json",
            {"joints": [_joint("root", None, (0, 0, 0)), bad]},
        )
        with pytest.raises(DataError, match="elbow"):
            load_skeleton(path)

    def test_two_roots_rejected(self, tmp_path):
        path = _write_json(
            tmp_path / "skel.json",
            {"joints": [_joint("root", None, (0, 0, 0)), _joint("other", None, (0, 1, 0))]},
        )
        with pytest.raises(DataError, match="root"):
            load_skeleton(path)

    def test_foot_index_out_of_range(self, tmp_path):
        path = _write_json(
            tmp_path / "skel.json",
            {"joints": [_joint("root", None, (0, 0, 0))], "foot_joints": [7]},
        )
        with pytest.raises(DataError, match="foot"):
            load_skeleton(path)

    def test_parse_error_reports_line(self, tmp_path):
        path = tmp_path / "skel.json"
        path.write_text('{"joints": [,]}')
        with pytest.raises(DataError, match="line"):
            load_skeleton(path)


def _frame(j, root_rot=(1.0, 0.0, 0.0, 0.0)):
    return {
        "root_pos": [0.0, 0.0, 0.0],
        "root_rot": list(root_rot),
        "joint_rots": [[0.0, 0.0, 0.0] for _ in range(j - 1)],
        "obj_pos": [0.0, 0.0, 0.0],
        "obj_rot": [1.0, 0.0, 0.0, 0.0],
    }


class TestLoadMotion:
    def test_one_frame_identity(self, tmp_path):
        skel = make_chain(3)
        path = _write_json(tmp_path / "m.json", {"fps": 25.0, "frames": [_frame(3)]})
        seq = load_motion(path, skel)
        assert seq.frame_count == 1
        assert seq.dt == pytest.approx(1.0 / 25.0)
        assert seq.joint_rots.shape == (1, 2, 3)

    def test_joint_count_mismatch(self, tmp_path):
        skel = make_chain(4)
        path = _write_json(tmp_path / "m.json", {"fps": 30.0, "frames": [_frame(6)]})
        with pytest.raises(DataError, match="5 joint_rots.*4 joints"):
            load_motion(path, skel)

    def test_quaternion_renormalization_failure(self, tmp_path):
        skel = make_chain(2)
        path = _write_json(
            tmp_path / "m.json",
            {"fps": 30.0, "frames": [_frame(2, root_rot=(2.0, 0.0, 0.0, 0.0))]},
        )
        with pytest.raises(DataError, match="norm deviation 1"):
            load_motion(path, skel)

    def test_quaternion_within_tolerance_renormalized(self, tmp_path):
        skel = make_chain(2)
        q = (1.0005, 0.0, 0.0, 0.0)
        path = _write_json(tmp_path / "m.json", {"fps": 30.0, "frames": [_frame(2, root_rot=q)]})
        seq = load_motion(path, skel)
        assert np.linalg.norm(seq.root_rot[0]) == pytest.approx(1.0, abs=1e-12)

    def test_nonpositive_fps(self, tmp_path):
        skel = make_chain(2)
        path = _write_json(tmp_path / "m.json", {"fps": 0.0, "frames": [_frame(2)]})
        with pytest.raises(DataError, match="fps"):
            load_motion(path, skel)

    def test_bad_contact_labels(self, tmp_path):
        skel = make_chain(2)
        frame = _frame(2)
        frame["contacts"] = [0, 3]
        path = _write_json(tmp_path / "m.json", {"fps": 30.0, "frames": [frame]})
        with pytest.raises(DataError, match="contact"):
            load_motion(path, skel)


class TestLoadObj:
    def test_unit_tetrahedron(self, tmp_path):
        path = tmp_path / "tet.obj"
        path.write_text(
            "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n"
            "f 1 2 3\nf 1 2 4\nf 1 3 4\nf 2 3 4\n"
        )
        mesh = load_obj(path)
        assert mesh.vertices.shape == (4, 3)
        assert mesh.faces.shape == (4, 3)
        assert mesh.faces.min() == 0

    def test_face_out_of_range(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 9\n")
        with pytest.raises(DataError, match="vertex 9"):
            load_obj(path)

    def test_cube_with_comments(self, tmp_path):
        from conftest import make_box

        path = tmp_path / "cube.obj"
        save_obj(make_box(), path)
        text = "# comment\nvn 0 0 1\n" + path.read_text()
        path.write_text(text)
        mesh = load_obj(path)
        assert mesh.vertices.shape == (8, 3)
        assert mesh.faces.shape == (12, 3)


class TestRoundTrip:
    def test_skeleton_byte_identical(self, tmp_path):
        skel = make_chain(5, foot_joints=(4,))
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_skeleton(skel, a)
        save_skeleton(load_skeleton(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_motion_byte_identical_and_lossless(self, tmp_path, rng):
        skel = make_chain(4)
        frames = 5
        rots = rng.normal(size=(frames, 4))
        rots /= np.linalg.norm(rots, axis=1, keepdims=True)
        seq = MotionSequence(
            fps=30.0,
            root_pos=rng.normal(size=(frames, 3)),
            root_rot=rots,
            joint_rots=rng.normal(size=(frames, 3, 3)),
            obj_pos=rng.normal(size=(frames, 3)),
            obj_rot=np.tile((1.0, 0.0, 0.0, 0.0), (frames, 1)),
            contacts=rng.integers(-1, 2, size=(frames, 4)),
        )
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_motion(seq, a)
        loaded = load_motion(a, skel)
        save_motion(loaded, b)
        assert a.read_bytes() == b.read_bytes()
        np.testing.assert_allclose(loaded.root_pos, seq.root_pos, atol=1e-9)
        np.testing.assert_allclose(loaded.root_rot, seq.root_rot, atol=1e-9)
        np.testing.assert_allclose(loaded.joint_rots, seq.joint_rots, atol=1e-9)
        np.testing.assert_array_equal(loaded.contacts, seq.contacts)

    def test_obj_byte_identical(self, tmp_path, box):
        a, b = tmp_path / "a.obj", tmp_path / "b.obj"
        save_obj(box, a)
        save_obj(load_obj(a), b)
        assert a.read_bytes() == b.read_bytes()


class TestTypes:
    def test_shape_params_must_be_positive(self):
        with pytest.raises(DataError):
            ShapeParams(bone_scales=np.array([1.0, 0.0]))

    def test_object_mesh_face_range(self):
        with pytest.raises(DataError):
            ObjectMesh(vertices=np.zeros((3, 3)), faces=np.array([[0, 1, 3]]))

    def test_loaded_types_immutable(self, tmp_path):
        skel = make_chain(3)
        with pytest.raises(ValueError):
            skel.rest_offsets[0] = 1.0
