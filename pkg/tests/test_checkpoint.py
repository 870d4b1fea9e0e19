import numpy as np
import pytest

from s2ut.checkpoint import load_arrays, load_params_into, save_arrays, save_params
from s2ut.rng import RngStream
from s2ut.tensor import Tensor


def test_round_trip_bit_exact(tmp_path):
    rng = RngStream(8)
    named = {
        "encoder.0.self_attn.q_weight": rng.normal((4, 4)),
        "decoder.embed.weight": rng.normal((10, 4)),
        "adaptor.conv.bias": rng.normal((4,)),
    }
    save_arrays(tmp_path / "ckpt", named)
    loaded = load_arrays(tmp_path / "ckpt")
    assert set(loaded) == set(named)
    for k in named:
        assert loaded[k].tobytes() == np.asarray(named[k]).tobytes()


def test_save_twice_identical_bytes(tmp_path):
    named = {"a.weight": np.arange(6, dtype=float).reshape(2, 3), "b.bias": np.zeros(3)}
    save_arrays(tmp_path / "c1", named)
    save_arrays(tmp_path / "c2", named)
    assert (tmp_path / "c1" / "params.bin").read_bytes() == (tmp_path / "c2" / "params.bin").read_bytes()
    assert (tmp_path / "c1" / "manifest.json").read_bytes() == (tmp_path / "c2" / "manifest.json").read_bytes()


def test_load_subset_prefix(tmp_path):
    params = {
        "encoder.0.fc1.weight": Tensor(np.zeros((2, 2))),
        "decoder.0.fc1.weight": Tensor(np.zeros((2, 2))),
    }
    stored = {
        "encoder.0.fc1.weight": np.ones((2, 2)),
        "decoder.0.fc1.weight": np.full((2, 2), 7.0),
    }
    save_arrays(tmp_path / "ckpt", stored)
    loaded = load_params_into(tmp_path / "ckpt", params, subset="encoder")
    assert loaded == ["encoder.0.fc1.weight"]
    assert np.array_equal(params["encoder.0.fc1.weight"].data, np.ones((2, 2)))
    assert np.array_equal(params["decoder.0.fc1.weight"].data, np.zeros((2, 2)))


def test_shape_mismatch_lists_offenders(tmp_path):
    params = {"w.weight": Tensor(np.zeros((2, 2))), "v.weight": Tensor(np.zeros((3,)))}
    save_params(tmp_path / "ckpt", {"w.weight": Tensor(np.zeros((5, 5))), "v.weight": Tensor(np.zeros((4,)))})
    with pytest.raises(ValueError) as err:
        load_params_into(tmp_path / "ckpt", params)
    assert "w.weight" in str(err.value) and "v.weight" in str(err.value)


def test_custom_bin_name(tmp_path):
    save_arrays(tmp_path / "cb", {"centroids": np.eye(3)}, bin_name="centroids.bin")
    assert (tmp_path / "cb" / "centroids.bin").exists()
    assert np.array_equal(load_arrays(tmp_path / "cb")["centroids"], np.eye(3))
