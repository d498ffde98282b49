import csv
import io
import json

import pytest
from hypothesis import given, settings, strategies as st

from fracquant.cli import main, run
from fracquant.config import DEFAULTS, RunConfig, emit_config, parse_config
from fracquant.errors import ConfigError

UNIFORM = {"kind": "uniform_density", "dimension": 1}
CANTOR = {"kind": "self_similar", "dimension": 1, "probabilities": [0.5, 0.5], "samples": 200000,
          "maps": [{"ratio": 1 / 3, "translation": [0.0]},
                   {"ratio": 1 / 3, "translation": [2 / 3]}]}
TETRA = {"kind": "self_similar", "dimension": 3, "probabilities": [0.66, 0.2, 0.08, 0.06],
         "maps": [{"ratio": 0.5, "translation": t}
                  for t in ([0, 0, 0], [0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.5])]}
DIRAC = {"kind": "atomic", "dimension": 1, "atoms": [[0.3]]}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def table(text):
    rows = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(rows))


def invoke(tmp_path, command, cfg, *extra):
    out = tmp_path / f"{command}.csv"
    code = main([command, "--config", write(tmp_path, cfg), "--out", str(out), *extra])
    return code, out.read_text()


class TestParseConfig:
    def test_minimal(self):
        cfg = parse_config('{"measure":{"kind":"uniform_density","dimension":1},'
                           '"command":"spectrum","q_grid":[0,0.5,1]}')
        assert cfg.command == "spectrum" and cfg.q_grid == [0.0, 0.5, 1.0]
        assert cfg.seed == 0 and cfg.n_max == DEFAULTS["n_max"]

    def test_probability_sum(self):
        bad = {"kind": "self_similar", "dimension": 1, "probabilities": [0.6, 0.5],
               "maps": [{"ratio": 0.5, "translation": [0]}, {"ratio": 0.5, "translation": [0.5]}]}
        with pytest.raises(ConfigError) as info:
            parse_config(json.dumps({"measure": bad, "command": "qdim"}))
        assert any("probabilities sum 1.1 ≠ 1" in e for e in info.value.errors)

    def test_tetraeder_exact(self):
        cfg = parse_config(json.dumps({"measure": TETRA, "command": "qdim"}))
        assert cfg.model().exact

    def test_collects_every_error(self):
        text = json.dumps({"measure": {"kind": "gibbs"}, "command": "plot", "n_max": "x",
                           "r_grid": [-1], "extra": 1})
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert len(info.value.errors) == 5

    def test_malformed(self):
        with pytest.raises(ConfigError):
            parse_config("{not json")
        with pytest.raises(ConfigError):
            parse_config('{"measure": {"kind": "uniform_density", "dimension": 1},'
                         '"command": "qdim", "n_min": 12, "n_max": 12}')

    def test_q_values(self):
        cfg = RunConfig(UNIFORM, "spectrum")
        q = cfg.q_values()
        assert len(q) == 151 and q[0] == 0.0 and q[-1] == 1.5 and 1.0 in q

    @settings(max_examples=50, deadline=None)
    @given(st.sampled_from(["spectrum", "qdim", "verify"]), st.integers(0, 2 ** 31),
           st.integers(2, 20), st.lists(st.floats(0.1, 8), min_size=1, max_size=4),
           st.one_of(st.none(), st.lists(st.floats(0.0, 3.0), min_size=1, max_size=5)),
           st.sampled_from(["auto", "regression", "limsup"]))
    def test_round_trip(self, command, seed, n_max, r_grid, q_grid, method):
        cfg = RunConfig(CANTOR, command, seed=seed, n_max=n_max, r_grid=r_grid, q_grid=q_grid,
                        method=method)
        assert parse_config(emit_config(cfg)) == cfg


class TestCommands:
    def test_qdim_uniform(self, tmp_path):
        code, text = invoke(tmp_path, "qdim", {"measure": UNIFORM, "command": "qdim",
                                               "r_grid": [0.5, 1, 2]})
        assert code == 0
        rows = table(text)
        assert [float(r["D_r"]) for r in rows] == pytest.approx([1.0] * 3, abs=0.05)
        assert all(float(r["closed_form"]) == 1.0 for r in rows)

    def test_header_metadata(self, tmp_path):
        code, text = invoke(tmp_path, "spectrum", {"measure": UNIFORM, "command": "spectrum",
                                                   "q_grid": [0, 0.5, 1]}, "--seed", "7",
                            "--levels", "6")
        lines = text.splitlines()
        assert lines[0] == "# command: spectrum"
        echo = json.loads(lines[1][len("# config: "):])
        assert echo["seed"] == 7 and echo["n_max"] == 6
        assert lines[2] == "# seed: 7"
        rows = table(text)
        assert list(rows[0]) == ["q", "level", "beta_n", "beta_hat"]
        assert all(float(r["beta_n"]) == pytest.approx(1 - float(r["q"])) for r in rows)

    def test_verify_cantor(self, tmp_path):
        code, text = invoke(tmp_path, "verify", {"measure": CANTOR, "command": "verify",
                                                 "r_grid": [1.0]})
        rows = table(text)
        assert code == 0
        assert rows and all(r["passed"] == "true" for r in rows)
        names = {r["check"].split("[")[0] for r in rows}
        assert {"sandwich", "kr_residual", "partition_invariants", "convexity"} <= names

    def test_quantize_dirac(self, tmp_path):
        code, text = invoke(tmp_path, "quantize", {"measure": DIRAC, "command": "quantize"})
        rows = table(text)
        assert code == 0
        assert all(float(r["evaluated"]) == 0.0 for r in rows)
        assert all(float(r["D_evaluated"]) == 0.0 and r["zero_branch"] == "true" for r in rows)

    def test_partition_and_coarse(self, tmp_path):
        code, text = invoke(tmp_path, "partition", {"measure": UNIFORM, "command": "partition"})
        assert code == 0
        assert float(table(text)[0]["slope"]) == pytest.approx(0.5, abs=0.01)
        code, text = invoke(tmp_path, "coarse", {"measure": UNIFORM, "command": "coarse"})
        assert code == 0
        assert float(table(text)[0]["F_bar_upper"]) == pytest.approx(0.5, abs=0.01)

    def test_closedform(self, tmp_path):
        code, text = invoke(tmp_path, "closedform", {"measure": CANTOR, "command": "closedform",
                                                     "r_grid": [1, 2], "q_grid": [0.5]})
        assert code == 0
        for row in table(text):
            assert abs(float(row["residual"])) <= 1e-10

    def test_closedform_unavailable(self, tmp_path):
        code, text = invoke(tmp_path, "closedform", {"measure": UNIFORM, "command": "closedform"})
        assert code == 2
        assert "# FAILED" in text

    def test_determinism(self, tmp_path):
        cfg = {"measure": CANTOR, "command": "quantize", "n_grid": [2, 4, 8, 16, 32],
               "samples": 20000}
        a = invoke(tmp_path, "quantize", cfg)[1]
        b = invoke(tmp_path, "quantize", cfg)[1]
        assert a == b

    def test_numerical_failure(self, tmp_path):
        code, text = invoke(tmp_path, "spectrum", {"measure": CANTOR, "command": "spectrum"},
                            "--levels", "45")
        assert code == 1
        assert text.splitlines()[-1].startswith("# FAILED")

    def test_config_error(self, tmp_path, capsys):
        code = main(["qdim", "--config", write(tmp_path, {"measure": {"kind": "nope"}})])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["qdim", "--config", str(tmp_path / "absent.json")]) == 2

    def test_run_to_stream(self):
        buf = io.StringIO()
        assert run(RunConfig(UNIFORM, "qdim"), buf) == 0
        assert table(buf.getvalue())[0]["r"] == "1.0"
