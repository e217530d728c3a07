import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from petkin.config import PRESETS, ConfigError, ExperimentConfig, load_config
from petkin.io import (
    ArrayFormatError,
    canonical_json,
    decode_array,
    encode_array,
    read_array,
    read_csv,
    read_pgm,
    write_array,
    write_csv,
    write_pgm,
)

finite32 = st.floats(width=32, allow_nan=False, allow_infinity=False)


class TestArrayFiles:
    @settings(max_examples=30)
    @given(arrays(np.float32, st.tuples(st.integers(0, 5), st.integers(1, 7), st.integers(1, 4)), elements=finite32))
    def test_roundtrip(self, a):
        out, meta = decode_array(encode_array(a, {"k": 1}))
        assert out.shape == a.shape
        assert out.tobytes() == a.tobytes()
        assert meta == {"k": 1}

    def test_roundtrip_large(self, tmp_path, rng):
        a = rng.standard_normal(10**7).astype(np.float32)
        write_array(tmp_path / "a.pkarr", a)
        assert np.array_equal(read_array(tmp_path / "a.pkarr")[0], a)

    def test_special_values_survive(self):
        a = np.array([np.nan, np.inf, -0.0], np.float32)
        out, _ = decode_array(encode_array(a))
        assert out.tobytes() == a.tobytes()

    def test_bad_magic(self):
        with pytest.raises(ArrayFormatError):
            decode_array(b"NOTANARRAY" + bytes(20))

    def test_truncated_payload(self):
        blob = encode_array(np.ones((3, 3)))
        with pytest.raises(ArrayFormatError):
            decode_array(blob[:-4])

    def test_canonical_json(self):
        text = canonical_json({"b": float("inf"), "a": np.float32(1.5), "c": np.arange(2)})
        assert json.loads(text) == {"a": 1.5, "b": "inf", "c": [0, 1]}
        assert text.index('"a"') < text.index('"b"')


class TestTables:
    def test_csv_roundtrip(self, tmp_path):
        write_csv(tmp_path / "t.csv", ["x", "y"], [[1, "a,b"], [2, "c"]])
        rows = read_csv(tmp_path / "t.csv")
        assert rows == [{"x": "1", "y": "a,b"}, {"x": "2", "y": "c"}]
        assert (tmp_path / "t.csv").read_bytes().endswith(b"\r\n")

    def test_pgm(self, tmp_path):
        img = np.array([[0.0, 1.0], [2.0, 4.0]])
        pix = read_pgm(write_pgm(tmp_path / "p.pgm", img))
        assert pix.tolist() == [[0, 16384], [32768, 65535]]
        assert np.all(read_pgm(write_pgm(tmp_path / "z.pgm", np.zeros((2, 3)))) == 0)


class TestConfig:
    @pytest.mark.parametrize("name", PRESETS)
    def test_presets_load(self, name):
        cfg = load_config(name)
        assert cfg.schedule.n_frames == 18
        assert len(cfg.roi_means) >= 1

    def test_modes(self, fdg, fmz):
        assert fdg.graphical_mode == "patlak"
        assert fmz.graphical_mode == "logan"

    def test_defaults(self):
        cfg = load_config(None)
        assert cfg["train"]["epochs"] == 300
        assert cfg["train"]["weights"] == [1.2, 1, 1]

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig({"version": 1, "noise": {"levle": 0.2}})

    def test_bad_type(self):
        with pytest.raises(ConfigError):
            load_config({"version": 1, "seed": "seven"})

    def test_missing_and_malformed_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.json")
        (tmp_path / "bad.json").write_text("{oops")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "bad.json")

    def test_file_roundtrip(self, tmp_path, fdg):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(fdg.to_dict()))
        assert load_config(path).to_dict() == fdg.to_dict()

    def test_overrides_merge(self, fdg):
        cfg = fdg.with_overrides(noise={"level": 0.5})
        assert cfg["noise"]["level"] == 0.5
        assert cfg["noise"]["base_counts"] == fdg["noise"]["base_counts"]

    def test_irreversible_needs_zero_k4(self):
        cfg = load_config({"version": 1, "tracer": "FDG", "roi_means": [[0.1, 0.1, 0.1, 0.01]]})
        with pytest.raises(ConfigError):
            cfg.roi_means

    def test_window_longer_than_schedule(self):
        with pytest.raises(ConfigError):
            load_config({"version": 1, "fit_window": 19})
