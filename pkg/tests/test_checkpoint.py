"""Container and checkpoint round-trips."""

import numpy as np
import pytest

from facerel.checkpoint import load_checkpoint, save_checkpoint
from facerel.net import NetworkSpec, conv_spec, fc_spec, init_trunk_params, pool_spec, relu_spec
from facerel.serialize import load_container, save_container


def small_spec():
    return NetworkSpec(
        (1, 6, 6), (conv_spec(3, 2), relu_spec(), pool_spec(2, 2), fc_spec(4)), bridge_dim=3
    )


def test_container_roundtrip_bits(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=7)}
    path = tmp_path / "c.bin"
    save_container(path, "test", {"answer": 42}, arrays)
    kind, meta, loaded = load_container(path)
    assert kind == "test" and meta == {"answer": 42}
    for name in arrays:
        np.testing.assert_array_equal(loaded[name], arrays[name])


def test_container_bytes_are_reproducible(tmp_path):
    arrays = {"x": np.linspace(0, 1, 11)}
    p1, p2 = tmp_path / "one.bin", tmp_path / "two.bin"
    save_container(p1, "test", {"k": "v"}, arrays)
    save_container(p2, "test", {"k": "v"}, arrays)
    assert p1.read_bytes() == p2.read_bytes()


def test_container_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTAFILE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        load_container(path)


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    spec = small_spec()
    params = init_trunk_params(spec, np.random.default_rng(1))
    path = tmp_path / "ckpt.bin"
    save_checkpoint(path, spec, params, extra={"profile": "tiny"})
    spec2, params2, extra = load_checkpoint(path)
    assert spec2 == spec
    assert extra == {"profile": "tiny"}
    assert params2.names() == params.names()
    for name, t in params.items():
        np.testing.assert_array_equal(params2[name].data, t.data)


def test_checkpoint_save_twice_identical_bytes(tmp_path):
    spec = small_spec()
    params = init_trunk_params(spec, np.random.default_rng(2))
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    save_checkpoint(p1, spec, params)
    save_checkpoint(p2, spec, params)
    assert p1.read_bytes() == p2.read_bytes()
