"""Tests for the experiment runner."""

from __future__ import annotations

import logging
from pathlib import Path

import pytest

from entrofact.artifacts import REPORT_NAME, SUMMARY_NAME, read_report
from entrofact.checks import structural
from entrofact.checks.base import CheckContext, CheckReport
from entrofact.config import ExperimentConfig
from entrofact.errors import EXIT_ASSERTION, EXIT_OK, ConfigError, PreconditionError, StateSpaceTooLargeError
from entrofact.runner import LOG_NAME, ExperimentRunner, setup_logging


@pytest.fixture
def config(tmp_path: Path) -> ExperimentConfig:
    return ExperimentConfig(
        beta=0.3,
        region_size=3,
        seed=1,
        samples=2,
        checks=["structural"],
        output_dir=tmp_path / "runs",
    )


class TestSetupLogging:
    """Tests for logger configuration."""

    def test_invalid_level(self) -> None:
        """Test that an unknown level is a usage error."""
        with pytest.raises(ConfigError, match="Invalid log_level"):
            setup_logging("LOUD")

    def test_file_handler(self, tmp_path: Path) -> None:
        """Test that a log file gets a debug handler."""
        logger = setup_logging("DEBUG", tmp_path / "logs" / "run.log")
        assert logger.level == logging.DEBUG
        assert len(logger.handlers) == 2
        assert (tmp_path / "logs" / "run.log").exists()

    def test_handlers_replaced(self) -> None:
        """Test that repeated setup does not stack handlers."""
        setup_logging("INFO")
        logger = setup_logging("INFO")
        assert len(logger.handlers) == 1


class TestExperimentRunner:
    """Tests for complete runs."""

    def test_run_writes_artifacts(self, config: ExperimentConfig) -> None:
        """Test a passing run and its run directory."""
        runner = ExperimentRunner(config)
        assert runner.run() == EXIT_OK
        assert runner.run_dir == config.output_dir / config.config_hash()[:12]
        lines = read_report(runner.run_dir / REPORT_NAME)
        assert [line.get("check") for line in lines[1:]] == ["dlr", "telescope", "variational", "generator"]
        assert (runner.run_dir / SUMMARY_NAME).read_text(encoding="utf-8").startswith("config_hash: ")
        assert (runner.run_dir / LOG_NAME).exists()
        assert runner.stats.passed == 4

    def test_rerun_is_byte_identical(self, config: ExperimentConfig) -> None:
        """Test that the same config and seed reproduce the report bytes."""
        runner = ExperimentRunner(config)
        runner.run()
        first = (runner.run_dir / REPORT_NAME).read_bytes()
        summary = (runner.run_dir / SUMMARY_NAME).read_bytes()
        ExperimentRunner(config).run()
        assert (runner.run_dir / REPORT_NAME).read_bytes() == first
        assert (runner.run_dir / SUMMARY_NAME).read_bytes() == summary

    def test_missing_seed(self, config: ExperimentConfig) -> None:
        """Test that stochastic checks need a seed before anything runs."""
        config.seed = None
        runner = ExperimentRunner(config)
        with pytest.raises(ConfigError, match="seed is required"):
            runner.run()
        assert not (runner.run_dir / REPORT_NAME).exists()

    def test_state_space_cap(self, config: ExperimentConfig) -> None:
        """Test that the cap is enforced before any table is built."""
        config.cap_states = 4
        with pytest.raises(StateSpaceTooLargeError):
            ExperimentRunner(config).run()

    def test_table_free_checks_ignore_cap(self, config: ExperimentConfig) -> None:
        """Test that geometry runs without a seed or a small state space."""
        config.checks = ["geometry"]
        config.seed = None
        config.cap_states = 1
        assert ExperimentRunner(config).run() == EXIT_OK

    def test_check_error_recorded(self, config: ExperimentConfig, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that an unexpected exception becomes an error record and exit 1."""

        def boom(self: structural.DLRCheck, ctx: CheckContext) -> CheckReport:
            msg = "broken"
            raise RuntimeError(msg)

        monkeypatch.setattr(structural.DLRCheck, "run", boom)
        runner = ExperimentRunner(config)
        assert runner.run() == EXIT_ASSERTION
        assert runner.reports[0].status == "error"
        assert "RuntimeError: broken" in runner.reports[0].detail
        assert runner.stats.errors == 1

    def test_precondition_skips(self, config: ExperimentConfig, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that an unmet precondition is recorded as skipped."""

        def unmet(self: structural.DLRCheck, ctx: CheckContext) -> CheckReport:
            msg = "not applicable here"
            raise PreconditionError(msg)

        monkeypatch.setattr(structural.DLRCheck, "run", unmet)
        runner = ExperimentRunner(config)
        assert runner.run() == EXIT_OK
        assert runner.reports[0].status == "skipped"
        assert runner.stats.skipped == 1
