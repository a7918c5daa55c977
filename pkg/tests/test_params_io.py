import numpy as np
import pytest

from vlpipe.params_io import MAGIC, load_params, save_params
from vlpipe.temporal import init_temporal_params


class TestRoundTrip:
    def test_values_names_order_preserved(self, tmp_path):
        path = tmp_path / "params.bin"
        rng = np.random.default_rng(0)
        arrays = {
            "alpha": rng.uniform(-1, 1, size=(3, 4)),
            "beta": rng.uniform(-1, 1, size=7),
            "gamma.delta": rng.uniform(-1, 1, size=(2, 2, 2)),
        }
        save_params(path, arrays)
        loaded = load_params(path)
        assert list(loaded) == list(arrays)
        for name, arr in arrays.items():
            assert loaded[name].shape == arr.shape
            assert np.array_equal(loaded[name], arr)

    def test_scalar_array(self, tmp_path):
        path = tmp_path / "scalar.bin"
        save_params(path, {"s": np.array(3.5)})
        loaded = load_params(path)
        assert loaded["s"].shape == ()
        assert loaded["s"] == 3.5

    def test_temporal_params_round_trip(self, tmp_path):
        path = tmp_path / "v3.bin"
        params = init_temporal_params("v3", 4, max_t=8, seed=11)
        save_params(path, params.to_arrays("temporal."))
        loaded = load_params(path)
        for name, arr in params.to_arrays("temporal.").items():
            assert np.array_equal(loaded[name], arr), name

    def test_empty_mapping(self, tmp_path):
        path = tmp_path / "empty.bin"
        save_params(path, {})
        assert load_params(path) == {}


class TestErrors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(ValueError, match="bad magic"):
            load_params(path)

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "trailing.bin"
        save_params(path, {"a": np.zeros(2)})
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(ValueError, match="trailing"):
            load_params(path)

    def test_magic_constant(self):
        assert MAGIC == b"NAMEDF64"
