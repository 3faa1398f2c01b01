import json
import math

import numpy as np
import pytest

from lifshitz.harness import (
    TABLE_COLUMNS,
    ConfigError,
    ExperimentRecord,
    FlatTable,
    execute,
    parse_config,
    run_experiment,
    table_from_record,
    write_outputs,
)
from lifshitz.harness.cli import main
from lifshitz.harness.config import KINDS
from lifshitz.harness.records import format_cell, read_csv

TAIL = """
[experiment]
kind = "tail"
"""

SMALL_BOUNDS = """
[experiment]
kind = "bounds-check"
seed = 3

[params]
thirring_instances = 50
projection_instances = 20
temple_instances = 20
chernoff_runs = 2000
"""


class TestConfig:
    def test_minimal_defaults(self):
        cfg = parse_config(TAIL)
        assert cfg.kind == "tail"
        assert cfg.n_h == 8 and cfg.samples == 1000 and cfg.seed == 0
        assert cfg.single_site.coupling == 1.0 and cfg.law.kind == "uniform"

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError) as info:
            parse_config(TAIL + "\n[params]\nLL = 3\n")
        assert any("params.LL" in p and "unknown key" in p for p in info.value.problems)

    def test_negative_coupling_names_field(self):
        with pytest.raises(ConfigError) as info:
            parse_config(TAIL + "\n[single_site]\ncoupling = -1.0\n")
        assert "coupling" in str(info.value)
        assert "gt 0" in str(info.value)

    def test_all_problems_reported(self):
        text = TAIL + "\nsamples = 0\n[law]\nkind = \"uniform\"\nlow = 2.0\n[params]\nbogus = 1\n"
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert len(info.value.problems) >= 3

    def test_missing_kind(self):
        with pytest.raises(ConfigError) as info:
            parse_config("seed = 1\n")
        assert "kind" in str(info.value)

    def test_syntax_error(self):
        with pytest.raises(ConfigError):
            parse_config("[experiment\nkind = 1")

    def test_duplicate_location(self):
        with pytest.raises(ConfigError):
            parse_config('kind = "tail"\n[experiment]\nkind = "ids"\n')

    def test_round_trip_hash(self):
        text = TAIL + '\nseed = 12\n[energies]\nsmallest = 0.01\ncount = 4\n[background]\nconstant = 0.1\nterms = [{amplitude = 0.5, kind = "cos", wavevector = [1]}]\n'
        cfg = parse_config(text)
        again = parse_config(cfg.to_toml())
        assert again == cfg
        assert again.config_hash() == cfg.config_hash()

    def test_hash_sensitive(self):
        assert parse_config(TAIL).config_hash() != parse_config(TAIL + "seed = 1\n").config_hash()

    def test_overrides(self):
        cfg = parse_config(TAIL, {"seed": 9, "samples": None})
        assert cfg.seed == 9 and cfg.samples == 1000
        assert cfg.with_overrides(samples=5).samples == 5

    def test_u64_seed(self):
        assert parse_config(TAIL + f"seed = {2**63}\n").seed == 2**63
        with pytest.raises(ConfigError):
            parse_config(TAIL, {"seed": 2**64})

    def test_every_kind_parses(self):
        for kind in KINDS:
            parse_config(f'kind = "{kind}"\n').model()

    def test_energy_ladder(self):
        cfg = parse_config(TAIL + "[energies]\nsmallest = 0.1\nratio = 3\ncount = 3\n")
        assert cfg.energies.values() == pytest.approx([0.1, 0.3, 0.9])


class TestRecords:
    def record(self):
        return ExperimentRecord(
            kind="tail",
            config_hash="ab" * 32,
            config={"kind": "tail"},
            version="0.1.0",
            seed=2**64 - 1,
            wall_time=0.5,
            results={"p": float("nan"), "inf": float("inf"), "nested": [1.0, -float("inf")], "x": np.float64(0.25)},
            certifications=[{"name": "c", "passed": False, "details": {}}],
            passed=False,
        )

    def test_json_round_trip(self):
        rec = self.record()
        back = ExperimentRecord.from_json(rec.to_json())
        assert math.isnan(back.results["p"]) and back.results["inf"] == float("inf")
        assert back.results["nested"] == [1.0, -float("inf")]
        assert back.results["x"] == 0.25 and back.seed == 2**64 - 1
        json.loads(rec.to_json())

    def test_rejects_foreign_json(self):
        from lifshitz.errors import ConfigurationError

        with pytest.raises(ConfigurationError):
            ExperimentRecord.from_json('{"format": "other"}')

    def test_cell_format(self):
        assert format_cell(0.1) == "0.10000000000000001"
        assert format_cell(np.float64(1.5)) == "1.5"
        assert format_cell(True) == "true" and format_cell(False) == "false"
        assert format_cell(None) == ""
        assert format_cell(7) == "7"
        assert format_cell(float("nan")) == "nan"

    def test_csv_lossless(self):
        t = FlatTable(["a", "b", "c"])
        vals = [1 / 3, math.pi * 1e-300, -2.5e17]
        for v in vals:
            t.append([v, "x,y", None])
        header, rows = read_csv(t.to_csv())
        assert header == ["a", "b", "c"]
        assert [float(r[0]) for r in rows] == vals
        assert rows[0][1] == "x,y" and rows[0][2] == ""

    def test_row_length_checked(self):
        with pytest.raises(ValueError):
            FlatTable(["a"]).append([1, 2])

    def test_never_overwrite(self, tmp_path):
        rec = self.record()
        t = FlatTable(["a"], [[1.0]])
        first = write_outputs(rec, t, tmp_path)
        second = write_outputs(rec, t, tmp_path)
        assert first[0] != second[0] and first[1] != second[1]
        assert all(p.exists() for p in (*first, *second))
        assert first[0].name.startswith("tail-abababababab-s18446744073709551615-")


class TestExecution:
    def test_bounds_check_lists_certificates(self):
        rec, table = execute(parse_config(SMALL_BOUNDS))
        names = [c["name"] for c in rec.certifications]
        assert "thirring-corollary-suite" in names and "temple-hypothesis-failure" in names
        assert sum(n.startswith("bernstein") for n in names) == 12
        assert rec.passed
        assert table.columns == TABLE_COLUMNS["bounds-check"]

    def test_same_seed_identical_tables(self):
        cfg = parse_config('kind = "spectrum"\nsamples = 6\nseed = 4\n[params]\nL = 2\nk = 3\n')
        a = execute(cfg)[1].to_csv()
        b = execute(cfg)[1].to_csv()
        assert a == b
        c = execute(cfg.with_overrides(seed=5))[1].to_csv()
        assert a != c

    def test_workers_do_not_change_tables(self):
        cfg = parse_config('kind = "ids"\nsamples = 12\nseed = 8\n[params]\nL = 2\n')
        assert execute(cfg, 1)[1].to_csv() == execute(cfg, 2)[1].to_csv()

    def test_tail_rows_carry_intervals(self):
        cfg = parse_config(TAIL + 'samples = 40\nseed = 1\n[energies]\nsmallest = 0.004\nratio = 1.3\ncount = 6\n[params]\nlength_rule = "gap"\n')
        rec, table = execute(cfg)
        assert len(table.rows) == 6
        cols = table.columns
        for row in table.rows:
            r = dict(zip(cols, row))
            assert r["ci_low"] <= r["p_hat"] <= r["ci_high"]
            assert r["n_samples"] == 40

    def test_record_persisted(self, tmp_path):
        cfg = parse_config('kind = "spectrum"\nsamples = 2\n[params]\nL = 1\nk = 2\n', {"out": str(tmp_path)})
        rec = run_experiment(cfg)
        files = sorted(tmp_path.iterdir())
        assert len(files) == 2
        back = ExperimentRecord.from_json(next(f for f in files if f.suffix == ".json").read_text())
        assert table_from_record(back).to_csv() == next(f for f in files if f.suffix == ".csv").read_text()
        assert back.config_hash == cfg.config_hash() == rec.config_hash


class TestCli:
    def write(self, tmp_path, text):
        p = tmp_path / "exp.toml"
        p.write_text(text)
        return str(p)

    def test_success(self, tmp_path, capsys):
        code = main(["bounds-check", "--config", self.write(tmp_path, SMALL_BOUNDS), "--out", str(tmp_path / "o")])
        out = capsys.readouterr().out
        assert code == 0
        assert "PASS  thirring-corollary-suite" in out and "record:" in out

    def test_certification_failure(self, tmp_path, capsys):
        # adjacent slabs across the whole box do not decay log-linearly near the spectrum
        code = main(["ct-decay", "--out", str(tmp_path)])
        assert code == 1
        assert "FAIL" in capsys.readouterr().out

    def test_config_error(self, tmp_path, capsys):
        code = main(["tail", "--config", self.write(tmp_path, "[single_site]\ncoupling = -2\n"), "--out", str(tmp_path)])
        assert code == 2
        assert "coupling" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["tail", "--config", str(tmp_path / "nope.toml")]) == 2

    def test_runtime_error(self, tmp_path, capsys):
        code = main(["lifshitz-fit", "--samples", "1", "--out", str(tmp_path)])
        assert code == 3
        assert "spectral_stats.fit_tail" in capsys.readouterr().err

    def test_subcommand_overrides_kind(self, tmp_path):
        path = self.write(tmp_path, 'kind = "tail"\nsamples = 2\n[params]\nL = 1\nk = 1\n')
        assert main(["spectrum", "--config", path, "--seed", "0x10", "--out", str(tmp_path / "o")]) == 0
        rec = next((tmp_path / "o").glob("*.json"))
        data = ExperimentRecord.from_json(rec.read_text())
        assert data.kind == "spectrum" and data.seed == 16

    def test_bad_seed(self):
        with pytest.raises(SystemExit):
            main(["tail", "--seed", "-1"])
