"""
Tests for API Endpoints

Tests the FastAPI endpoints: system information, health, scenario
validation, runs and comparisons.
"""

import pytest
from fastapi.testclient import TestClient
from unittest.mock import patch, MagicMock

from vanetsim.config import CONTROL_PORT
from vanetsim.exceptions import OutputError, ScenarioValidationError
from vanetsim.main import app
from vanetsim.schemas import ComparisonReport, NetMetrics, RunReport


def _report(mode="static", waiting=100.0):
    return RunReport(
        scenario_id="cross_heavy",
        seed=42,
        mode=mode,
        duration=1200.0,
        inserted=10,
        arrived=8,
        total_waiting_time=waiting,
        net=NetMetrics(sent=10, received=9, pdf=0.9),
    )


@pytest.fixture
def client():
    """Create test client without startup logging."""
    app.router.on_startup = []

    with TestClient(app) as test_client:
        yield test_client


class TestSystemEndpoints:
    """Test suite for information endpoints."""

    def test_root_endpoint(self, client):
        response = client.get("/")

        assert response.status_code == 200
        data = response.json()
        assert data["status"] == "running"
        assert data["control_port"] == CONTROL_PORT
        assert "/runs" in data["endpoints"]

    def test_process_time_header(self, client):
        response = client.get("/")

        assert "X-Process-Time" in response.headers

    def test_health_check_healthy(self, client):
        response = client.get("/health")

        assert response.status_code == 200
        data = response.json()
        assert data["status"] == "healthy"
        assert data["config_valid"] is True

    @patch("vanetsim.main.verify_config")
    def test_health_check_degraded(self, mock_config, client):
        """Test health check reports configuration issues."""
        mock_config.return_value = {"valid": False, "issues": ["CONTROL_PORT out of range"], "warnings": []}

        data = client.get("/health").json()

        assert data["status"] == "degraded"
        assert data["issues"] == ["CONTROL_PORT out of range"]

    def test_config_endpoint(self, client):
        data = client.get("/config").json()

        assert "configuration" in data
        assert data["configuration"]["radio"]["packet_size"] == 4096

    def test_metrics_endpoint(self, client):
        data = client.get("/metrics").json()

        assert {"total", "validations", "runs", "compares", "errors", "error_rate_percent"} <= set(data["requests"])
        assert "last_run" in data


class TestScenarioEndpoints:
    """Test suite for scenario endpoints."""

    def test_validate_fixture(self, client, cross_path):
        response = client.post("/scenarios/validate", json={"scenario_path": str(cross_path)})

        assert response.status_code == 200
        data = response.json()
        assert data["valid"] is True
        assert data["link_counts"] == {"C": 12}

    def test_validate_missing_file(self, client, tmp_path):
        response = client.post("/scenarios/validate", json={"scenario_path": str(tmp_path / "none.xml")})

        assert response.status_code == 200
        data = response.json()
        assert data["valid"] is False
        assert data["error"]

    @patch("vanetsim.main.get_runner")
    def test_run(self, mock_get_runner, client):
        mock_get_runner.return_value.run.return_value = _report()

        response = client.post("/runs", json={"scenario_path": "cross.scenario.xml", "seed": 7})

        assert response.status_code == 200
        assert response.json()["net"]["pdf"] == 0.9
        _, kwargs = mock_get_runner.return_value.run.call_args
        assert kwargs["seed"] == 7
        assert kwargs["mode"] == "auto"

    def test_run_invalid_mode(self, client):
        response = client.post("/runs", json={"scenario_path": "x", "mode": "fastest"})

        assert response.status_code == 422

    @patch("vanetsim.main.get_runner")
    def test_run_scenario_error(self, mock_get_runner, client):
        """Scenario errors become 422 responses naming the error type."""
        mock_get_runner.return_value.run.side_effect = ScenarioValidationError("routes file missing")

        response = client.post("/runs", json={"scenario_path": "cross.scenario.xml"})

        assert response.status_code == 422
        assert response.json()["error"] == "ScenarioValidationError"

    @patch("vanetsim.main.get_runner")
    def test_run_output_error(self, mock_get_runner, client):
        mock_get_runner.return_value.run.side_effect = OutputError("/ro/metrics.csv", "Read-only file system")

        response = client.post("/runs", json={"scenario_path": "cross.scenario.xml"})

        assert response.status_code == 500
        assert "/ro/metrics.csv" in response.json()["detail"]

    @patch("vanetsim.main.get_runner")
    def test_compare(self, mock_get_runner, client):
        runner = MagicMock()
        runner.compare.return_value = ComparisonReport(
            scenario_id="cross_heavy",
            seed=42,
            static=_report("static", 100.0),
            adaptive=_report("adaptive", 60.0),
            waiting_time_change_percent=-40.0,
            arrived={"static": 8, "adaptive": 8},
        )
        mock_get_runner.return_value = runner

        response = client.post("/compare", json={"scenario_path": "cross_heavy.scenario.xml"})

        assert response.status_code == 200
        assert response.json()["waiting_time_change_percent"] == -40.0
        _, kwargs = runner.compare.call_args
        assert kwargs["parallel"] is False

    @patch("vanetsim.main.get_runner")
    def test_metrics_remember_last_run(self, mock_get_runner, client):
        mock_get_runner.return_value.run.return_value = _report("adaptive", 55.0)

        client.post("/runs", json={"scenario_path": "cross.scenario.xml"})
        last = client.get("/metrics").json()["last_run"]

        assert last["mode"] == "adaptive"
        assert last["pdf"] == 0.9
        assert last["total_waiting_time"] == 55.0
