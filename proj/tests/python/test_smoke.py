import os
import struct
import subprocess

import numpy as np
import pytest

import clothsense as cs

HEADS = [
    "thickness", "smoothness", "fuzziness", "softness", "stretchiness", "durability",
    "woolen", "windproof", "season", "textile", "wash_method",
]


def test_head_table():
    props = cs.properties()
    assert [p[0] for p in props] == HEADS
    assert [p[2] for p in props] == [0.2, 0.2, 0.25, 0.5, 0.5, 0.5, 0.5, 0.5, 0.25, 0.05, 0.17]


def test_corpus_is_seeded():
    a = cs.generate_corpus(6, 3)
    b = cs.generate_corpus(6, 3)
    assert [it.labels for it in a] == [it.labels for it in b]
    assert [it.item_id for it in a] == list(range(6))
    assert set(a[0].labels) == set(HEADS)


def test_hmap_bytes_and_round_trip(tmp_path):
    values = np.arange(6, dtype=np.float64).reshape(2, 3) * 0.25
    path = tmp_path / "a.hmap"
    cs.write_hmap(path, values, 0.001, 1)
    raw = path.read_bytes()
    assert raw[:5] == b"HMAP\x01"
    assert struct.unpack_from("<IIfB", raw, 5) == (3, 2, np.float32(0.001), 1)
    back, mpp, tag = cs.read_hmap(path)
    np.testing.assert_array_equal(back, values)
    assert tag == 1
    assert mpp == pytest.approx(0.001)


def test_errors_map_to_exceptions(tmp_path):
    with pytest.raises(cs.IoError):
        cs.read_hmap(tmp_path / "missing.hmap")
    (tmp_path / "bad.hmap").write_bytes(b"HMAQ\x01")
    with pytest.raises(cs.FormatError):
        cs.read_hmap(tmp_path / "bad.hmap")
    with pytest.raises(cs.Error):
        cs.extract_features(np.zeros(5))


def test_simulated_grip_features():
    item = cs.generate_corpus(2, 5)[1]
    grip = cs.simulate_grip(item, 0, 11)
    assert len(grip["frames"]) >= 10
    assert grip["frames"][0].shape == (48, 64)
    assert cs.detect_contact(grip["frames"]) or not grip["valid"]
    single = cs.extract_features(grip["frames"][-1])
    assert single.shape == (cs.feature_dims(),) == (208,)
    assert cs.sequence_features(grip["frames"], 9).shape == (416,)
    np.testing.assert_array_equal(cs.extract_features(np.zeros((48, 64))), np.zeros(208))


@pytest.mark.skipif("CLOTHSENSE_CLI" not in os.environ, reason="command-line tool not available")
def test_models_trained_by_the_cli_load_and_predict(tmp_path):
    cli = os.environ["CLOTHSENSE_CLI"]
    env = dict(os.environ, TE_LOG="error")
    for cmd in (["gen", "--items", "6"], ["collect", "--grips", "3"], ["train"]):
        subprocess.run([cli, cmd[0], "--corpus", str(tmp_path), "--seed", "2", *cmd[1:]], check=True, env=env)
    model = cs.PropertyModel.load(tmp_path / "models" / "video.tmdl")
    assert model.input_dims == 416
    probs = model.predict(np.zeros(416))
    assert list(probs) == HEADS
    for head, p in probs.items():
        assert p.sum() == pytest.approx(1.0)
    grip = cs.GripModel.load(tmp_path / "models" / "grip.tmdl")
    assert 0.0 <= grip.score(np.zeros((64, 64))) <= 1.0
