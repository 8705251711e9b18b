"""Tests for random streams, settings, logging and metrics dumps."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
import structlog

from src.config import Settings
from src.errors import InputValidationError
from src.observability.logs import configure_logging
from src.observability.metrics import dump_metrics, track_stage
from src.streams import SEED_MAX, substream, validate_seed


class TestStreams:
    """Philox substreams."""

    def test_same_key_same_draws(self):
        a = substream(42, 3).standard_normal(16)
        b = substream(42, 3).standard_normal(16)
        np.testing.assert_array_equal(a, b)

    def test_streams_are_distinct(self):
        base = substream(42, 0).standard_normal(16)
        assert not np.array_equal(base, substream(42, 1).standard_normal(16))
        assert not np.array_equal(base, substream(43, 0).standard_normal(16))
        assert not np.array_equal(base, substream(42, 0, domain=1).standard_normal(16))

    def test_order_independent(self):
        later = substream(7, 5).random(4)
        substream(7, 4).random(1000)
        np.testing.assert_array_equal(substream(7, 5).random(4), later)

    def test_full_seed_range(self):
        assert validate_seed(0) == 0
        assert validate_seed(SEED_MAX) == SEED_MAX
        substream(SEED_MAX, 0).random()

    @pytest.mark.parametrize("seed", [-1, SEED_MAX + 1])
    def test_seed_out_of_range(self, seed):
        with pytest.raises(InputValidationError, match="64-bit"):
            substream(seed, 0)

    def test_negative_index(self):
        with pytest.raises(InputValidationError, match="nonnegative"):
            substream(1, -1)


class TestSettings:
    """Environment defaults."""

    def test_defaults(self, monkeypatch):
        for name in ("VOLCAL_LOG_LEVEL", "VOLCAL_LOG_FORMAT", "VOLCAL_OUTPUT_DIR", "VOLCAL_WORKERS", "VOLCAL_SEED"):
            monkeypatch.delenv(name, raising=False)
        settings = Settings()
        assert settings.log_level == "INFO"
        assert settings.output_dir == Path("volcal-out")
        assert settings.workers == 1
        assert settings.seed == 20170307

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("VOLCAL_OUTPUT_DIR", "/tmp/runs")
        monkeypatch.setenv("VOLCAL_WORKERS", "4")
        monkeypatch.setenv("VOLCAL_SEED", "9")
        settings = Settings()
        assert settings.output_dir == Path("/tmp/runs")
        assert settings.workers == 4
        assert settings.seed == 9


class TestLogging:
    """structlog configuration."""

    def test_json_lines_on_stderr(self, capsys):
        configure_logging(level="INFO", fmt="json")
        structlog.get_logger().info("Calibration started", model="heston")

        captured = capsys.readouterr()
        assert captured.out == ""
        event = json.loads(captured.err.strip())
        assert event["event"] == "Calibration started"
        assert event["model"] == "heston"
        assert event["level"] == "info"

    def test_level_filter(self, capsys):
        configure_logging(level="WARNING", fmt="json")
        structlog.get_logger().info("hidden")
        assert capsys.readouterr().err == ""


class TestMetrics:
    """Prometheus textfile dump."""

    def test_dump_includes_stage(self, tmp_path):
        with track_stage("unit_test"):
            pass
        path = tmp_path / "metrics.prom"
        dump_metrics(path)

        text = path.read_text()
        assert 'volcal_stage_duration_seconds_count{stage="unit_test"}' in text
        assert "volcal_info" in text
