"""
Configuration Management

Loads environment variables from the project's .env file and exposes the
simulator defaults as module-level settings. Scenario files override these
defaults; CLI flags override scenario files.
"""

import os
from pathlib import Path
from typing import Any, Dict, List

from dotenv import load_dotenv

from vanetsim.logger import setup_logger

# Find the project root (parent of the package directory)
PROJECT_ROOT = Path(__file__).parent.parent

env_path = PROJECT_ROOT / ".env"
_env_loaded = env_path.exists()
if _env_loaded:
    load_dotenv(dotenv_path=env_path)


# ============================================================
# APPLICATION SETTINGS
# ============================================================
APP_NAME = os.getenv("APP_NAME", "vanetsim")
APP_VERSION = os.getenv("APP_VERSION", "1.0.0")
ENVIRONMENT = os.getenv("ENVIRONMENT", "development")


# ============================================================
# LOGGING CONFIGURATION
# ============================================================
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
LOG_DIR = os.getenv("LOG_DIR", "logs")
LOG_TO_FILE = os.getenv("LOG_TO_FILE", "true").lower() == "true"

log_path = PROJECT_ROOT / LOG_DIR
if LOG_TO_FILE:
    log_path.mkdir(exist_ok=True)


def _log_file(env_name: str, default_name: str):
    if not LOG_TO_FILE:
        return None
    return os.getenv(env_name, str(log_path / default_name))


APP_LOG_FILE = _log_file("APP_LOG_FILE", "vanetsim.log")
SIM_LOG_FILE = _log_file("SIM_LOG_FILE", "simulation.log")
VANET_LOG_FILE = _log_file("VANET_LOG_FILE", "vanet.log")
CONTROL_LOG_FILE = _log_file("CONTROL_LOG_FILE", "control.log")
API_LOG_FILE = _log_file("API_LOG_FILE", "api.log")

logger = setup_logger(__name__, level=LOG_LEVEL, log_file=APP_LOG_FILE)
if not _env_loaded:
    logger.debug(f".env file not found at {env_path}, using built-in defaults")


# ============================================================
# CONTROL SERVER (text-over-TCP)
# ============================================================
CONTROL_HOST = os.getenv("CONTROL_HOST", "127.0.0.1")
CONTROL_PORT = int(os.getenv("CONTROL_PORT", "8813"))


# ============================================================
# HTTP API
# ============================================================
API_HOST = os.getenv("API_HOST", "127.0.0.1")
API_PORT = int(os.getenv("API_PORT", "8000"))
CORS_ORIGINS = os.getenv("CORS_ORIGINS", "http://localhost,http://127.0.0.1").split(",")


# ============================================================
# SIMULATION DEFAULTS
# ============================================================
DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", "42"))
DEFAULT_STEP_LENGTH = float(os.getenv("DEFAULT_STEP_LENGTH", "0.1"))
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "runs")

# Lane detectors
DETECTOR_WINDOW = float(os.getenv("DETECTOR_WINDOW", "60"))
DETECTOR_QUEUE_ZONE = float(os.getenv("DETECTOR_QUEUE_ZONE", "50"))

# Speed under which a vehicle counts as waiting/queued (m/s)
WAITING_SPEED = 0.1


# ============================================================
# RADIO / V2V DEFAULTS
# ============================================================
RADIO_RANGE = float(os.getenv("RADIO_RANGE", "250"))
RADIO_PER_HOP_LATENCY = float(os.getenv("RADIO_PER_HOP_LATENCY", "0.01"))
RADIO_PACKET_SIZE = int(os.getenv("RADIO_PACKET_SIZE", "4096"))
RADIO_CBR_RATE = float(os.getenv("RADIO_CBR_RATE", "4"))
RADIO_RREQ_TTL = int(os.getenv("RADIO_RREQ_TTL", "16"))
RADIO_ROUTE_LIFETIME = float(os.getenv("RADIO_ROUTE_LIFETIME", "10"))
RADIO_LOSS_PROBABILITY = float(os.getenv("RADIO_LOSS_PROBABILITY", "0"))


# ============================================================
# ADAPTIVE CONTROLLER DEFAULTS
# ============================================================
ADAPTIVE_CONTROL_INTERVAL = float(os.getenv("ADAPTIVE_CONTROL_INTERVAL", "120"))
ADAPTIVE_G_MIN = int(os.getenv("ADAPTIVE_G_MIN", "5"))
ADAPTIVE_G_MAX = int(os.getenv("ADAPTIVE_G_MAX", "60"))
ADAPTIVE_YELLOW = float(os.getenv("ADAPTIVE_YELLOW", "9"))
ADAPTIVE_LOAD_METRIC = os.getenv("ADAPTIVE_LOAD_METRIC", "queue_length")


def get_config_summary() -> Dict[str, Any]:
    """
    Returns a summary of the current configuration.

    Returns:
        Dictionary with configuration details
    """
    return {
        "app_name": APP_NAME,
        "version": APP_VERSION,
        "environment": ENVIRONMENT,
        "control": {"host": CONTROL_HOST, "port": CONTROL_PORT},
        "api": {"host": API_HOST, "port": API_PORT},
        "simulation": {
            "default_seed": DEFAULT_SEED,
            "default_step_length": DEFAULT_STEP_LENGTH,
            "output_dir": OUTPUT_DIR,
            "detector_window": DETECTOR_WINDOW,
            "detector_queue_zone": DETECTOR_QUEUE_ZONE,
        },
        "radio": {
            "range": RADIO_RANGE,
            "per_hop_latency": RADIO_PER_HOP_LATENCY,
            "packet_size": RADIO_PACKET_SIZE,
            "cbr_rate": RADIO_CBR_RATE,
            "rreq_ttl": RADIO_RREQ_TTL,
            "route_lifetime": RADIO_ROUTE_LIFETIME,
            "loss_probability": RADIO_LOSS_PROBABILITY,
        },
        "adaptive": {
            "control_interval": ADAPTIVE_CONTROL_INTERVAL,
            "g_min": ADAPTIVE_G_MIN,
            "g_max": ADAPTIVE_G_MAX,
            "yellow": ADAPTIVE_YELLOW,
            "load_metric": ADAPTIVE_LOAD_METRIC,
        },
        "log_level": LOG_LEVEL,
        "log_to_file": LOG_TO_FILE,
    }


def verify_config() -> Dict[str, Any]:
    """
    Validates the environment-provided defaults.

    Returns:
        Dictionary with validation status, issues and warnings
    """
    issues: List[str] = []
    warnings: List[str] = []

    for name, port in (("CONTROL_PORT", CONTROL_PORT), ("API_PORT", API_PORT)):
        if not 0 < port < 65536:
            issues.append(f"{name} must be in 1..65535, got {port}")
    if CONTROL_PORT == API_PORT and CONTROL_HOST == API_HOST:
        issues.append("CONTROL_PORT and API_PORT must differ")

    positive = {
        "DEFAULT_STEP_LENGTH": DEFAULT_STEP_LENGTH,
        "DETECTOR_WINDOW": DETECTOR_WINDOW,
        "DETECTOR_QUEUE_ZONE": DETECTOR_QUEUE_ZONE,
        "RADIO_RANGE": RADIO_RANGE,
        "RADIO_PER_HOP_LATENCY": RADIO_PER_HOP_LATENCY,
        "RADIO_PACKET_SIZE": RADIO_PACKET_SIZE,
        "RADIO_CBR_RATE": RADIO_CBR_RATE,
        "RADIO_RREQ_TTL": RADIO_RREQ_TTL,
        "RADIO_ROUTE_LIFETIME": RADIO_ROUTE_LIFETIME,
        "ADAPTIVE_CONTROL_INTERVAL": ADAPTIVE_CONTROL_INTERVAL,
        "ADAPTIVE_YELLOW": ADAPTIVE_YELLOW,
    }
    for name, value in positive.items():
        if value <= 0:
            issues.append(f"{name} must be positive, got {value}")

    if not 0 <= RADIO_LOSS_PROBABILITY < 1:
        issues.append(f"RADIO_LOSS_PROBABILITY must be in [0, 1), got {RADIO_LOSS_PROBABILITY}")
    if ADAPTIVE_G_MIN > ADAPTIVE_G_MAX:
        issues.append(f"ADAPTIVE_G_MIN ({ADAPTIVE_G_MIN}) exceeds ADAPTIVE_G_MAX ({ADAPTIVE_G_MAX})")
    if ADAPTIVE_LOAD_METRIC not in ("queue_length", "occupancy", "count"):
        issues.append(f"ADAPTIVE_LOAD_METRIC '{ADAPTIVE_LOAD_METRIC}' is not a known metric")

    if RADIO_LOSS_PROBABILITY > 0:
        warnings.append("RADIO_LOSS_PROBABILITY > 0: delivery metrics depend on the radio seed")
    if DEFAULT_STEP_LENGTH > 1.0:
        warnings.append("DEFAULT_STEP_LENGTH above 1 s exceeds the default driver reaction time")

    return {
        "valid": len(issues) == 0,
        "issues": issues,
        "warnings": warnings,
        "config_summary": get_config_summary(),
    }


# Log configuration status on import
if __name__ != "__main__":
    _status = verify_config()
    if not _status["valid"]:
        logger.warning("Configuration issues detected:")
        for issue in _status["issues"]:
            logger.warning(f"  • {issue}")
    for warning in _status["warnings"]:
        logger.warning(f"  • {warning}")
