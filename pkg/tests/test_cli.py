"""Tests for the volcal command line."""

from __future__ import annotations

import json

import pytest
import yaml
from click.testing import CliRunner

from src import cli as cli_module
from src.cli import cli
from src.errors import CalibrationError, NumericalError
from src.market_data.loader import read_quotes_file, write_quotes_file
from src.pricing.models import ModelKind, params_to_dict
from src.scripts.quote_generator import generate_quotes


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def out_dir(tmp_path):
    return tmp_path / "out"


@pytest.fixture
def bs_quotes(tmp_path, bs_dataset):
    return write_quotes_file(bs_dataset, tmp_path / "flat.csv")


@pytest.fixture
def params_files(tmp_path, bs_params, heston_params, msv_params):
    files = {}
    for model, params in ((ModelKind.BS, bs_params), (ModelKind.HESTON, heston_params), (ModelKind.MSV, msv_params)):
        path = tmp_path / f"{model.value}.yaml"
        path.write_text(yaml.safe_dump(params_to_dict(params)))
        files[model] = path
    return files


def run(runner: CliRunner, out_dir, *args: str):
    return runner.invoke(cli, ["--output-dir", str(out_dir), "--log-level", "WARNING", *args])


def calibrate_all(runner: CliRunner, out_dir, quotes, *extra: str) -> None:
    for model in ("bs", "heston", "msv"):
        result = run(
            runner, out_dir, "calibrate", "--model", model, "--quotes", str(quotes),
            "--starts", "1", "--max-evals", "200", *extra,
        )
        assert result.exit_code == 0, result.output


def evaluate_args(quotes, out_dir) -> list[str]:
    return [
        "evaluate",
        "--quotes", str(quotes),
        "--bs", str(out_dir / "calibration_bs.json"),
        "--heston", str(out_dir / "calibration_heston.json"),
        "--msv", str(out_dir / "calibration_msv.json"),
    ]


class TestPrice:
    """volcal price"""

    def test_text_output(self, runner, out_dir, bs_quotes, params_files):
        result = run(runner, out_dir, "price", "--model", "bs", "--params", str(params_files[ModelKind.BS]),
                     "--quotes", str(bs_quotes))

        assert result.exit_code == 0, result.output
        assert "within_bounds" in result.stdout
        doc = json.loads((out_dir / "prices_bs.json").read_text())
        assert len(doc["rows"]) == 20
        assert all(row["within_bounds"] for row in doc["rows"])
        assert doc["order"] is None

    def test_structured_output_matches_file(self, runner, out_dir, bs_quotes, params_files):
        result = run(runner, out_dir, "--format", "structured", "price", "--model", "msv",
                     "--params", str(params_files[ModelKind.MSV]), "--quotes", str(bs_quotes), "--order", "3")

        assert result.exit_code == 0, result.output
        assert result.stdout == (out_dir / "prices_msv.json").read_text()
        assert json.loads(result.stdout)["order"] == 3

    def test_malformed_quotes(self, runner, out_dir, tmp_path, params_files):
        bad = tmp_path / "bad.csv"
        bad.write_text("foo,bar\n1,2\n")
        result = run(runner, out_dir, "price", "--model", "bs", "--params", str(params_files[ModelKind.BS]),
                     "--quotes", str(bad))

        assert result.exit_code == 2
        assert "header must be" in result.stderr

    def test_quotes_not_utf8(self, runner, out_dir, tmp_path, bs_quotes, params_files):
        latin = tmp_path / "latin.csv"
        latin.write_bytes(bs_quotes.read_bytes().replace(b"q", b"\xff", 1))
        result = run(runner, out_dir, "price", "--model", "bs", "--params", str(params_files[ModelKind.BS]),
                     "--quotes", str(latin))

        assert result.exit_code == 2
        assert "cannot read quotes file" in result.stderr

    def test_params_not_utf8(self, runner, out_dir, tmp_path, bs_quotes):
        params = tmp_path / "bs.yaml"
        params.write_bytes(b"sigma: 0.2 # \xff\n")
        result = run(runner, out_dir, "price", "--model", "bs", "--params", str(params), "--quotes", str(bs_quotes))

        assert result.exit_code == 2
        assert "cannot read params file" in result.stderr

    def test_params_for_wrong_model(self, runner, out_dir, bs_quotes, params_files):
        result = run(runner, out_dir, "price", "--model", "heston", "--params", str(params_files[ModelKind.BS]),
                     "--quotes", str(bs_quotes))
        assert result.exit_code == 2

    def test_numerical_failure(self, runner, out_dir, bs_quotes, params_files, monkeypatch):
        def broken(*args, **kwargs):
            raise NumericalError("price is not finite")

        monkeypatch.setattr(cli_module, "price_dataset", broken)
        result = run(runner, out_dir, "price", "--model", "bs", "--params", str(params_files[ModelKind.BS]),
                     "--quotes", str(bs_quotes))

        assert result.exit_code == 3
        assert "price is not finite" in result.stderr


class TestCalibrate:
    """volcal calibrate"""

    def test_recovers_volatility(self, runner, out_dir, bs_quotes):
        result = run(runner, out_dir, "calibrate", "--model", "bs", "--quotes", str(bs_quotes))

        assert result.exit_code == 0, result.output
        assert "model: bs" in result.stdout
        doc = json.loads((out_dir / "calibration_bs.json").read_text())
        assert doc["params"]["sigma"] == pytest.approx(0.2, abs=1e-6)
        assert doc["dataset_label"] == "flat@2017-03-07/in"
        assert (out_dir / "calibration_bs.timing.json").exists()

    def test_rerun_is_byte_identical(self, runner, tmp_path, bs_quotes):
        first, second = tmp_path / "a", tmp_path / "b"
        for target in (first, second):
            result = run(runner, target, "--seed", "11", "calibrate", "--model", "msv", "--quotes", str(bs_quotes),
                         "--starts", "2", "--max-evals", "200")
            assert result.exit_code == 0, result.output

        assert (first / "calibration_msv.json").read_bytes() == (second / "calibration_msv.json").read_bytes()

    def test_all_starts_failed(self, runner, out_dir, bs_quotes, monkeypatch):
        def broken(*args, **kwargs):
            raise CalibrationError("all 3 starts failed")

        monkeypatch.setattr(cli_module, "calibrate", broken)
        result = run(runner, out_dir, "calibrate", "--model", "heston", "--quotes", str(bs_quotes))

        assert result.exit_code == 4
        assert "all 3 starts failed" in result.stderr

    def test_budget_below_minimum(self, runner, out_dir, bs_quotes):
        result = run(runner, out_dir, "calibrate", "--model", "bs", "--quotes", str(bs_quotes), "--max-evals", "10")
        assert result.exit_code == 2


class TestEvaluate:
    """volcal evaluate"""

    def test_in_sample_calibrations(self, runner, out_dir, bs_quotes):
        calibrate_all(runner, out_dir, bs_quotes)

        result = run(runner, out_dir, *evaluate_args(bs_quotes, out_dir))

        assert result.exit_code == 0, result.output
        assert "MRAE-O" in result.stdout
        assert "Worst values" in result.stdout
        doc = json.loads((out_dir / "evaluation_flat_2017_03_07.json").read_text())
        assert doc["report"]["leak_flagged"] is False
        assert len(doc["comparisons"]) == 40

    def test_leak_is_rejected_unless_allowed(self, runner, out_dir, bs_quotes):
        calibrate_all(runner, out_dir, bs_quotes, "--no-split")

        rejected = run(runner, out_dir, *evaluate_args(bs_quotes, out_dir))
        allowed = run(runner, out_dir, *evaluate_args(bs_quotes, out_dir), "--allow-leak")

        assert rejected.exit_code == 2
        assert "in-sample half" in rejected.stderr
        assert allowed.exit_code == 0, allowed.output
        assert "[LEAK]" in allowed.stdout

    def test_structured_rerun_is_byte_identical(self, runner, tmp_path, bs_quotes):
        outputs = []
        for target in (tmp_path / "a", tmp_path / "b"):
            for model in ("bs", "heston", "msv"):
                result = run(runner, target, "--seed", "7", "calibrate", "--model", model, "--quotes", str(bs_quotes),
                             "--starts", "2", "--max-evals", "200")
                assert result.exit_code == 0, result.output
            result = run(runner, target, "--seed", "7", "--format", "structured", *evaluate_args(bs_quotes, target))
            assert result.exit_code == 0, result.output
            outputs.append((result.stdout, (target / "evaluation_flat_2017_03_07.json").read_bytes()))

        assert outputs[0] == outputs[1]
        assert "calib_seconds" not in outputs[0][0]
        timing = json.loads((tmp_path / "a" / "evaluation_flat_2017_03_07.timing.json").read_text())
        assert set(timing["calib_seconds"]) == {"heston", "msv"}

    def test_broken_timing_sidecar(self, runner, out_dir, bs_quotes):
        calibrate_all(runner, out_dir, bs_quotes)
        (out_dir / "calibration_heston.timing.json").write_text("{not json")

        result = run(runner, out_dir, *evaluate_args(bs_quotes, out_dir))

        assert result.exit_code == 2
        assert "invalid timing file" in result.stderr

    def test_calibration_not_utf8(self, runner, out_dir, bs_quotes):
        calibrate_all(runner, out_dir, bs_quotes)
        (out_dir / "calibration_msv.json").write_bytes(b'{"model": "\xff"}')

        result = run(runner, out_dir, *evaluate_args(bs_quotes, out_dir))

        assert result.exit_code == 2
        assert "cannot read calibration file" in result.stderr


class TestSimulate:
    """volcal simulate"""

    def test_black_scholes_monte_carlo(self, runner, out_dir, params_files):
        result = run(runner, out_dir, "simulate", "--model", "bs", "--params", str(params_files[ModelKind.BS]),
                     "--strike", "90", "--strike", "110", "--paths", "200000")

        assert result.exit_code == 0, result.output
        doc = json.loads((out_dir / "simulation_bs.json").read_text())
        assert doc["method"] == "monte-carlo"
        assert [row["strike"] for row in doc["rows"]] == [90.0, 110.0]
        assert all(row["stderr"] > 0 for row in doc["rows"])
        assert all(row["nodes"] is None for row in doc["rows"])
        assert "mean_rate" not in result.stdout

    def test_msv_mixture(self, runner, out_dir, params_files):
        result = run(runner, out_dir, "simulate", "--model", "msv", "--params", str(params_files[ModelKind.MSV]))

        assert result.exit_code == 0, result.output
        assert "PASS" in result.stdout
        doc = json.loads((out_dir / "simulation_msv.json").read_text())
        assert doc["method"] == "gauss-hermite mixture"
        assert doc["rows"][0]["stderr"] is None
        assert doc["rows"][0]["nodes"] > 0
        assert doc["rows"][0]["mean_rate"] > 0
        assert "mean_rate" in result.stdout
        assert "stderr" not in result.stdout

    def test_heston_is_repeatable(self, runner, tmp_path, params_files):
        docs = []
        for target in (tmp_path / "a", tmp_path / "b"):
            result = run(runner, target, "--seed", "5", "simulate", "--model", "heston",
                         "--params", str(params_files[ModelKind.HESTON]), "--paths", "20000", "--steps", "50")
            assert result.exit_code == 0, result.output
            docs.append((target / "simulation_heston.json").read_text())
        assert docs[0] == docs[1]


class TestGenerate:
    """volcal generate"""

    def test_writes_quotes(self, runner, out_dir, tmp_path, params_files):
        target = tmp_path / "synthetic.csv"
        result = run(runner, out_dir, "generate", "--model", "heston", "--params", str(params_files[ModelKind.HESTON]),
                     "--output", str(target), "--maturities", "3", "--strikes", "4")

        assert result.exit_code == 0, result.output
        assert "Generated 12 quotes" in result.stdout
        assert len(read_quotes_file(target)) == 12

    def test_noise_uses_seed(self, runner, out_dir, tmp_path, params_files):
        paths = [tmp_path / "one.csv", tmp_path / "two.csv"]
        for seed, target in zip(("1", "2"), paths, strict=True):
            result = run(runner, out_dir, "--seed", seed, "generate", "--model", "bs",
                         "--params", str(params_files[ModelKind.BS]), "--output", str(target), "--noise", "0.01")
            assert result.exit_code == 0, result.output
        assert paths[0].read_text() != paths[1].read_text()


class TestReport:
    """volcal report"""

    def test_no_files(self, runner, out_dir):
        result = run(runner, out_dir, "report")
        assert result.exit_code == 0
        assert result.stdout == ""

    def test_charts_from_evaluation(self, runner, out_dir, bs_quotes):
        calibrate_all(runner, out_dir, bs_quotes)
        assert run(runner, out_dir, *evaluate_args(bs_quotes, out_dir)).exit_code == 0

        result = run(runner, out_dir, "report", str(out_dir / "evaluation_flat_2017_03_07.json"))

        assert result.exit_code == 0, result.output
        assert (out_dir / "flat_2017_03_07_prices.svg").exists()
        assert (out_dir / "flat_2017_03_07_errors.svg").exists()


class TestBenchmark:
    """volcal benchmark"""

    def test_two_datasets(self, runner, out_dir, tmp_path, bs_params, heston_params):
        files = [
            write_quotes_file(
                generate_quotes(ModelKind.BS, bs_params, n_maturities=3, n_strikes=4), tmp_path / "flat.csv"
            ),
            write_quotes_file(
                generate_quotes(ModelKind.HESTON, heston_params, n_maturities=3, n_strikes=4), tmp_path / "smile.csv"
            ),
        ]
        result = run(runner, out_dir, "benchmark", *map(str, files), "--starts", "1", "--max-evals", "100")

        assert result.exit_code == 0, result.output
        assert "Median Heston/MSV time ratio" in result.stdout
        doc = json.loads((out_dir / "benchmark.json").read_text())
        assert len(doc["reports"]) == 2
        assert "timings" not in doc
        assert (out_dir / "benchmark.timing.json").exists()


class TestGlobalOptions:
    """Options shared by every subcommand."""

    def test_metrics_textfile(self, runner, out_dir, tmp_path, bs_quotes, params_files):
        metrics = tmp_path / "volcal.prom"
        result = run(runner, out_dir, "--metrics-textfile", str(metrics), "price", "--model", "bs",
                     "--params", str(params_files[ModelKind.BS]), "--quotes", str(bs_quotes))

        assert result.exit_code == 0, result.output
        text = metrics.read_text()
        assert "volcal_stage_duration_seconds" in text
        assert 'stage="price"' in text

    def test_seed_out_of_range(self, runner, out_dir):
        result = run(runner, out_dir, "--seed", str(2**64), "report")
        assert result.exit_code == 2
