import json
import math

import numpy as np
import pytest

import dualaug


def test_human16_laplacian():
    s = dualaug.human16()
    assert s.joint_count == 16
    assert s.laplacian[0, 1] == pytest.approx(-1.0 / math.sqrt(6.0), abs=1e-12)
    assert np.allclose(s.laplacian, s.laplacian.T)


def test_bones_round_trip():
    joints, _ = dualaug.generate_domain("source", 3, seed=5)
    s = dualaug.human16()
    pose = joints[0].reshape(16, 3)
    bones = s.joints_to_bones(pose)
    assert bones.shape == (15, 3)
    back = s.bones_to_joints(bones, pose[0])
    assert np.abs(back - pose).max() < 1e-9


def test_malformed_skeletons():
    with pytest.raises(dualaug.CycleError):
        dualaug.Skeleton([1, 0])
    assert issubclass(dualaug.CycleError, dualaug.Error)


def test_projection():
    cam = dualaug.Camera()
    kp = cam.project(np.array([[1000.0, 0.0, 0.0]]))
    assert kp[0, 0] == pytest.approx(700.0)
    with pytest.raises(dualaug.BehindCameraError):
        cam.project(np.array([[0.0, 0.0, -5000.0]]))


def test_metrics():
    joints, _ = dualaug.generate_domain("source", 8, seed=1)
    gt = joints[0].reshape(16, 3)
    pred = gt + np.array([3.0, 0.0, 4.0])
    assert dualaug.mpjpe(pred, gt) == pytest.approx(5.0)
    assert dualaug.pa_mpjpe(pred, gt) < 1e-6
    assert dualaug.pck(joints, joints) == pytest.approx(100.0)
    with pytest.raises(dualaug.ShapeError):
        dualaug.mpjpe(np.zeros((16, 2)), np.zeros((16, 2)))


def test_generation_is_deterministic():
    a = dualaug.generate_domain("target_far", 4, seed=9)
    b = dualaug.generate_domain("target_far", 4, seed=9)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    with pytest.raises(dualaug.ParseError):
        dualaug.generate_domain("nowhere", 4)


def test_train_and_predict(tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    # Source data through the module itself keeps the test independent of the CLI.
    joints, kp = dualaug.generate_domain("source", 32, seed=0)
    with open(data / "source.jsonl", "w") as f:
        for i in range(len(joints)):
            f.write(json.dumps({"id": i, "joints3d": joints[i].reshape(16, 3).tolist(),
                                "keypoints2d": kp[i].reshape(16, 2).tolist()}) + "\n")
    cfg = {"epochs": 2, "warmup_epochs": 1, "batch_size": 16, "seed": 0, "checkpoint_every": 0,
           "estimator_width": 16, "estimator_blocks": 1, "generator_hidden": [8], "critic_hidden": [8],
           "eval_batch": 16}
    out = tmp_path / "run"
    report = dualaug.train(json.dumps(cfg), str(data), str(out))
    assert report[0]["n"] == 32
    assert math.isfinite(report[0]["mpjpe"])
    pred = dualaug.predict(str(out / "estimator_epoch2.json"), np.zeros((2, 32)))
    assert pred.shape == (2, 48)
    states = dualaug.augment(str(out / "augmentor_weak.json"), joints[:2], np.zeros((2, 16)))
    assert set(states) == {"or", "ba", "bl", "rt"}
    assert states["rt"].shape == (2, 48)
    assert np.isfinite(states["rt"]).all()
