"""Config loading/validation and the CSV/JSON/manifest writers."""

import json
import math

import numpy as np
import pytest

from sqg.config import OUTPUT_DIR_ENV, RunConfig, VerifyConfig, load_run_config, load_verify_config
from sqg.errors import CheckpointError, ConfigurationError
from sqg.outputs import file_entries, read_csv, verify_manifest, write_csv, write_json, write_json_atomic

RUN_TOML = """
[grid]
n = 32
length = 1.0

[solver]
gamma = 0.5
dt = 0.01
t_end = 0.1
scheme = "etd_rk2"

[initial_data]
kind = "random_band"
seed = 4
params = { j1 = 0, j2 = 1, amplitude = 0.5 }

[criterion]
p = 4.0
r0 = 8.0

[outputs]
dir = "out"
checkpoint_stride = 5
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestRunConfig:
    def test_toml(self, tmp_path):
        cfg = load_run_config(write(tmp_path, "run.toml", RUN_TOML))
        assert cfg.grid.n == 32 and cfg.solver.scheme == "etd_rk2"
        assert cfg.initial_data.params == {"j1": 0, "j2": 1, "amplitude": 0.5}
        assert cfg.criterion.r0 == 8.0 and cfg.outputs.checkpoint_stride == 5

    def test_json_equivalent(self, tmp_path):
        toml_cfg = load_run_config(write(tmp_path, "run.toml", RUN_TOML))
        json_cfg = load_run_config(write(tmp_path, "run.json", toml_cfg.model_dump_json()))
        assert json_cfg == toml_cfg

    def test_defaults(self):
        cfg = RunConfig()
        assert cfg.grid.dealias_fraction == pytest.approx(2 / 3)
        assert cfg.criterion.q == 2.0

    @pytest.mark.parametrize("section, body, fragment", [
        ("criterion", "p = 1.5", "p ∈ [2,∞)"),
        ("criterion", "r0 = 1.0", "r0 ∈ [2,∞)"),
        ("solver", "dt = 2.0\nt_end = 1.0", "dt (2.0) must be smaller than t_end"),
        ("solver", "gamma = 1.5", "gamma ∈ (0,1]"),
        ("grid", "n = 33", "even"),
        ("grid", "length = -1.0", "length"),
        ("solver", "scheme = \"euler\"", "solver.scheme"),
        ("solver", "tolerance = 3", "solver.tolerance"),
    ])
    def test_field_diagnostics(self, tmp_path, section, body, fragment):
        path = write(tmp_path, "bad.toml", f"[{section}]\n{body}\n")
        with pytest.raises(ConfigurationError) as info:
            load_run_config(path)
        assert fragment in str(info.value)

    def test_band_order(self, tmp_path):
        text = '[initial_data]\nkind = "random_band"\nparams = { j1 = 3, j2 = 1 }\n'
        with pytest.raises(ConfigurationError, match="j1 must not exceed j2"):
            load_run_config(write(tmp_path, "bad.toml", text))

    def test_toml_syntax_reports_position(self, tmp_path):
        with pytest.raises(ConfigurationError, match=r"line 2"):
            load_run_config(write(tmp_path, "bad.toml", "[grid]\nn = = 3\n"))

    def test_json_syntax_reports_position(self, tmp_path):
        with pytest.raises(ConfigurationError, match=r"line 1, column"):
            load_run_config(write(tmp_path, "bad.json", '{"grid": }'))

    def test_unknown_extension(self, tmp_path):
        with pytest.raises(ConfigurationError, match="extension"):
            load_run_config(write(tmp_path, "run.yaml", "grid: {}"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="cannot read"):
            load_run_config(tmp_path / "absent.toml")

    def test_env_overrides_output_dir(self, monkeypatch, tmp_path):
        cfg = RunConfig()
        monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
        assert str(cfg.output_dir()) == cfg.outputs.dir
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
        assert cfg.output_dir() == tmp_path


class TestVerifyConfig:
    def test_suite_sections(self, tmp_path):
        text = 'samples = 10\n[grid]\nn = 32\n[commutator]\nrho1 = 0.25\nq = "inf"\n'
        cfg = load_verify_config(write(tmp_path, "v.toml", text))
        assert cfg.samples == 10 and cfg.commutator == {"rho1": 0.25, "q": "inf"}

    def test_rejects_unknown_suite_section(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_verify_config(write(tmp_path, "v.toml", "[bogus]\nx = 1\n"))

    def test_env_override(self, monkeypatch, tmp_path):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
        assert VerifyConfig().output_dir() == tmp_path


class TestCsv:
    def test_rfc4180_shape(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", ["time", "name"], [(0.1, "x,y"), (np.float64(0.2), 'q"')])
        raw = path.read_bytes()
        assert raw == b'time,name\r\n0.1,"x,y"\r\n0.2,"q"""\r\n'

    def test_float_roundtrip(self, tmp_path):
        values = np.random.default_rng(0).standard_normal(200) * 10.0 ** np.arange(-100, 100)
        write_csv(tmp_path / "a.csv", ["v"], ([v] for v in values))
        back = np.array([float(r["v"]) for r in read_csv(tmp_path / "a.csv")])
        assert back.tobytes() == values.tobytes()

    def test_special_values(self, tmp_path):
        write_csv(tmp_path / "a.csv", ["v"], [[math.inf], [np.int64(3)]])
        assert [r["v"] for r in read_csv(tmp_path / "a.csv")] == ["inf", "3"]


class TestJsonAndManifest:
    def test_non_finite_json(self, tmp_path):
        write_json(tmp_path / "a.json", {"a": math.inf, "b": [math.nan, 1.0], "c": np.arange(2)})
        assert json.loads((tmp_path / "a.json").read_text()) == {"a": "inf", "b": ["nan", 1.0], "c": [0, 1]}

    def test_atomic_leaves_no_temporaries(self, tmp_path):
        write_json_atomic(tmp_path / "m.json", {"x": 1})
        assert [p.name for p in tmp_path.iterdir()] == ["m.json"]

    def test_manifest_verification(self, tmp_path):
        files = [tmp_path / "a.bin", tmp_path / "sub" / "b.bin"]
        files[1].parent.mkdir()
        for i, f in enumerate(files):
            f.write_bytes(bytes([i]) * 10)
        write_json_atomic(tmp_path / "manifest.json", {"files": file_entries(tmp_path, files)})
        assert verify_manifest(tmp_path / "manifest.json") == []
        files[0].write_bytes(b"changed")
        files[1].unlink()
        assert sorted(verify_manifest(tmp_path / "manifest.json")) == ["hash mismatch: a.bin", "missing: sub/b.bin"]

    def test_unreadable_manifest(self, tmp_path):
        (tmp_path / "m.json").write_text("{")
        with pytest.raises(CheckpointError):
            verify_manifest(tmp_path / "m.json")
