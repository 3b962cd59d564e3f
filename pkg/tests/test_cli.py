import csv
import io

import pytest

import excursim as ex
from excursim.cli import (
    ExperimentConfig,
    TABLE_COLUMNS,
    build_config,
    main,
    parse_config_file,
    parse_domain,
    parse_kernel,
    parse_mean,
    table_config,
)
from excursim.errors import ConfigurationError


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr().out
    return code, out


def parse_csv(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    return rows


class TestSpecParsers:
    def test_kernel_specs(self):
        assert isinstance(parse_kernel("cosine"), ex.CosineProcess)
        assert parse_kernel("sqexp:ell=2").ell == 2.0
        assert parse_kernel("exponential:ell=4").ell == 4.0
        k = parse_kernel("powerexp:alpha=1.5,ell=0.5")
        assert (k.shape, k.ell) == (1.5, 0.5)

    def test_kernel_errors(self):
        with pytest.raises(ConfigurationError):
            parse_kernel("matern:nu=1.5")
        with pytest.raises(ConfigurationError):
            parse_kernel("powerexp:ell=1")  # alpha required

    def test_domain_specs(self):
        box = parse_domain("0,1;0,2")
        assert box.dimension == 2 and box.measure == pytest.approx(2.0)
        assert parse_domain("0,0.75").dimension == 1
        with pytest.raises(ConfigurationError):
            parse_domain("0;1")
        with pytest.raises(ConfigurationError):
            parse_domain("1,0")

    def test_mean_specs(self):
        assert parse_mean("0.25") == 0.25
        mean = parse_mean("linear:0.1,0.1")
        assert mean(ex.field.as_points([[1.0, 1.0]], 2))[0] == pytest.approx(0.2)
        with pytest.raises(ConfigurationError):
            parse_mean("quadratic:1")


class TestConfig:
    def test_config_file_roundtrip(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("experiment = table1\nn = 64\nm = 10\nb = 3,4  # levels\n")
        values = parse_config_file(str(path))
        assert values == {"experiment": "table1", "n": "64", "m": "10", "b": "3,4"}

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("experiment = table1\nbogus = 1\n")
        with pytest.raises(ConfigurationError, match="bogus"):
            parse_config_file(str(path))

    def test_overrides_take_precedence(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("experiment = table1\nn = 64\nseed = 5\n")
        config = table_config(str(path), {"n": 128})
        assert config.n == 128 and config.seed == 5

    def test_config_file_inherits_preset_defaults(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("experiment = table3\nn = 50\n")
        config = table_config(str(path), {})
        assert config.m == 40 and config.scale == 0.625
        assert "excursion_integral" in config.targets
        assert config.n == 50

    def test_config_file_unknown_experiment(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("experiment = table17\n")
        with pytest.raises(ConfigurationError, match="table17"):
            table_config(str(path), {})

    def test_preset_source(self):
        config = table_config("table2", {})
        assert config.m == 40 and config.scale == 0.625
        assert "excursion_integral" in config.targets

    def test_unknown_source(self):
        with pytest.raises(ConfigurationError):
            table_config("table9", {})

    def test_validation(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(n=1)
        with pytest.raises(ConfigurationError):
            ExperimentConfig(b=(0.5,))
        with pytest.raises(ConfigurationError):
            ExperimentConfig(format="yaml")
        with pytest.raises(ConfigurationError):
            ExperimentConfig(seed=-1)

    def test_digest_stable_and_sensitive(self):
        a = build_config({"experiment": "table1", "model": None}, {"n": 50})
        b = build_config({"experiment": "table1", "model": None}, {"n": 50})
        c = build_config({"experiment": "table1", "model": None}, {"n": 51})
        assert a.digest == b.digest
        assert a.digest != c.digest
        assert len(a.digest) == 12


class TestTableCommand:
    def test_table1_small_run(self, capsys, tmp_path):
        out_path = tmp_path / "t1.csv"
        code, out = run_cli(["table", "table1", "--n", "64", "--m", "10",
                             "--b", "3,4", "--out", str(out_path)], capsys)
        assert code == 0
        assert out_path.read_text() == out
        rows = parse_csv(out)
        assert tuple(rows[0].keys()) == TABLE_COLUMNS
        assert [r["b"] for r in rows] == ["3", "4"]
        for row in rows:
            est, se, tv = float(row["est"]), float(row["std_err"]), float(row["true_value"])
            assert est > 0 and se > 0 and tv > 0
            assert row["wall_time_ms"] == ""  # deterministic output by default
            assert row["errored_replicates"] == "0"
            assert row["schema_version"] == "1"

    def test_byte_identical_reruns(self, capsys):
        args = ["table", "table1", "--n", "50", "--m", "10", "--b", "3"]
        _, first = run_cli(args, capsys)
        _, second = run_cli(args, capsys)
        assert first == second

    def test_worker_count_does_not_change_bytes(self, capsys):
        base = ["table", "table1", "--n", "60", "--m", "10", "--b", "3"]
        _, one = run_cli(base + ["--workers", "1"], capsys)
        _, four = run_cli(base + ["--workers", "4"], capsys)
        assert one == four

    def test_timing_flag_fills_wall_time(self, capsys):
        code, out = run_cli(["table", "table1", "--n", "50", "--m", "10",
                             "--b", "3", "--timing"], capsys)
        assert code == 0
        assert float(parse_csv(out)[0]["wall_time_ms"]) > 0

    def test_excursion_rows_present_for_2d_preset(self, capsys):
        code, out = run_cli(["table", "table2", "--n", "50", "--m", "10",
                             "--b", "3"], capsys)
        assert code == 0
        rows = parse_csv(out)
        targets = {r["target"] for r in rows}
        assert targets == {"sup_tail", "excursion_integral"}
        tail_row = next(r for r in rows if r["target"] == "sup_tail")
        exc_row = next(r for r in rows if r["target"] == "excursion_integral")
        assert tail_row["true_value"] == ""  # no closed form for the sup tail
        assert float(exc_row["true_value"]) > 0

    def test_gnuplot_format(self, capsys):
        code, out = run_cli(["table", "table1", "--n", "50", "--m", "10",
                             "--b", "3", "--format", "gnuplot"], capsys)
        assert code == 0
        lines = out.strip().split("\n")
        assert lines[0].startswith("# b target")
        assert "NA" in lines[1]  # blank wall time rendered as NA

    def test_unknown_preset_exit_code(self, capsys):
        code, _ = run_cli(["table", "table9"], capsys)
        assert code == 2

    def test_rows_match_engine_reports_exactly(self, capsys):
        # the CLI derives per-level seeds as (seed, level_index); its rows must
        # reproduce direct engine runs bit for bit
        code, out = run_cli(["table", "table1", "--n", "300", "--m", "20",
                             "--b", "3,5", "--seed", "2718"], capsys)
        assert code == 0
        rows = parse_csv(out)
        model = ex.preset_model("table1")
        density = ex.DesignDensity(1, 3, 1.0)
        for idx, b in enumerate((3.0, 5.0)):
            report = ex.estimate_tail(model, b, 300, 20, density=density,
                                      seed=(2718, idx))
            assert float(rows[idx]["est"]) == pytest.approx(report.estimate, rel=1e-10)
            assert float(rows[idx]["std_err"]) == pytest.approx(report.std_err, rel=1e-10)
            assert float(rows[idx]["true_value"]) == pytest.approx(
                ex.cosine_truth(b), rel=1e-10)

    def test_eps_flag_sets_design_size(self, capsys):
        code, out = run_cli(["estimate", "--kernel", "cosine", "--domain", "0,0.75",
                             "--b", "3", "--n", "50", "--eps", "0.5"], capsys)
        assert code == 0
        model = ex.preset_model("table1")
        assert int(parse_csv(out)[0]["m"]) == ex.choose_m(0.5, model)


class TestWorkersDefault:
    def test_env_variable_controls_default(self, monkeypatch):
        from excursim.cli import default_workers
        monkeypatch.setenv("EXCURSIM_WORKERS", "3")
        assert default_workers() == 3
        monkeypatch.setenv("EXCURSIM_WORKERS", "not-a-number")
        with pytest.raises(ConfigurationError):
            default_workers()
        monkeypatch.delenv("EXCURSIM_WORKERS")
        assert default_workers() >= 1


class TestEstimateCommand:
    def test_custom_cosine_run(self, capsys):
        code, out = run_cli(["estimate", "--kernel", "cosine", "--domain", "0,0.75",
                             "--b", "3", "--n", "50", "--m", "10"], capsys)
        assert code == 0
        row = parse_csv(out)[0]
        assert row["target"] == "sup_tail"
        assert float(row["est"]) > 0

    def test_custom_run_with_excursion_oracle(self, capsys):
        code, out = run_cli(["estimate", "--kernel", "sqexp:ell=1",
                             "--domain", "0,1;0,1", "--mean", "linear:0.1,0.1",
                             "--b", "3", "--n", "50", "--m", "10",
                             "--with-excursion"], capsys)
        assert code == 0
        rows = parse_csv(out)
        exc = next(r for r in rows if r["target"] == "excursion_integral")
        assert float(exc["true_value"]) == pytest.approx(1.880225e-3, rel=1e-4)

    def test_bad_kernel_exit_code(self, capsys):
        code, _ = run_cli(["estimate", "--kernel", "matern", "--domain", "0,1",
                           "--b", "3", "--n", "50", "--m", "5"], capsys)
        assert code == 2


class TestPickandsCommand:
    def test_small_run_and_rerun_identical(self, capsys):
        args = ["pickands", "--alpha", "2", "--b", "6", "--n", "60", "--m", "10"]
        code, first = run_cli(args, capsys)
        assert code == 0
        _, second = run_cli(args, capsys)
        assert first == second
        row = parse_csv(first)[0]
        assert row["alpha"] == "2" and float(row["est"]) > 0

    def test_invalid_alpha_is_usage_error(self, capsys):
        code, _ = run_cli(["pickands", "--alpha", "0", "--b", "6", "--n", "50"], capsys)
        assert code == 2
