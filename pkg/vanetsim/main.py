"""
FastAPI Backend Application

HTTP entry point for the co-simulator. Exposes health and configuration
introspection plus scenario validation, single runs and static-vs-adaptive
comparisons. Runs execute in the threadpool; each request gets its own
simulation, so concurrent requests never share state.
"""

import time
from typing import Any, Dict, Optional

from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from vanetsim.config import (
    API_LOG_FILE,
    APP_NAME,
    APP_VERSION,
    CONTROL_PORT,
    CORS_ORIGINS,
    ENVIRONMENT,
    LOG_LEVEL,
    get_config_summary,
    verify_config,
)
from vanetsim.exceptions import ScenarioError, VanetSimError
from vanetsim.logger import setup_logger
from vanetsim.schemas import (
    CompareRequest,
    ComparisonReport,
    HealthCheckResponse,
    RunReport,
    RunRequest,
    ValidateRequest,
    ValidationResponse,
)
from vanetsim.services.runner import get_runner

logger = setup_logger(__name__, level=LOG_LEVEL, log_file=API_LOG_FILE)

SLOW_REQUEST_SECONDS = 5.0

app = FastAPI(
    title="VANET Co-Simulator API",
    description="Traffic and V2V co-simulation with adaptive traffic light control",
    version=APP_VERSION,
    docs_url="/docs",
    redoc_url="/redoc",
    openapi_tags=[
        {"name": "System", "description": "Health, status and configuration endpoints"},
        {"name": "Scenarios", "description": "Scenario validation, runs and comparisons"},
        {"name": "Metrics", "description": "Request and run statistics"},
    ],
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=CORS_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

counters: Dict[str, int] = {"requests": 0, "validations": 0, "runs": 0, "compares": 0, "errors": 0}
last_run: Dict[str, Optional[Any]] = {"scenario_id": None, "mode": None, "pdf": None, "total_waiting_time": None}


@app.middleware("http")
async def time_requests(request: Request, call_next):
    """Count every request and report its wall time in X-Process-Time."""
    counters["requests"] += 1
    started = time.perf_counter()
    response = await call_next(request)
    elapsed = time.perf_counter() - started
    response.headers["X-Process-Time"] = f"{elapsed:.4f}"
    if elapsed > SLOW_REQUEST_SECONDS:
        logger.info(f"{request.method} {request.url.path} took {elapsed:.1f}s")
    return response


def _remember(report: RunReport) -> None:
    last_run.update(
        scenario_id=report.scenario_id,
        mode=report.mode,
        pdf=report.net.pdf,
        total_waiting_time=report.total_waiting_time,
    )


@app.on_event("startup")
async def startup_event():
    summary = get_config_summary()
    logger.info(f"{APP_NAME} v{APP_VERSION} ({ENVIRONMENT}) accepting scenarios")
    logger.info(f"Radio defaults: {summary['radio']}")
    logger.info(f"Adaptive defaults: {summary['adaptive']}")
    status = verify_config()
    for issue in status["issues"]:
        logger.warning(f"Configuration issue: {issue}")
    for warning in status["warnings"]:
        logger.info(f"Configuration note: {warning}")


@app.on_event("shutdown")
async def shutdown_event():
    logger.info(f"Shutting down after {counters['runs']} runs and {counters['compares']} comparisons")


@app.get("/", tags=["System"])
async def root():
    """Service identity and the scenario endpoints."""
    return {
        "name": APP_NAME,
        "version": APP_VERSION,
        "status": "running",
        "control_port": CONTROL_PORT,
        "endpoints": ["/scenarios/validate", "/runs", "/compare", "/health", "/config", "/metrics"],
    }


@app.get("/config", tags=["System"])
async def get_configuration():
    return {"configuration": get_config_summary(), "status": verify_config()}


@app.get("/metrics", tags=["Metrics"])
async def get_metrics():
    """Request counters, error rate and the outcome of the most recent run."""
    total = counters["requests"]
    return {
        "requests": {
            "total": total,
            "validations": counters["validations"],
            "runs": counters["runs"],
            "compares": counters["compares"],
            "errors": counters["errors"],
            "error_rate_percent": round(counters["errors"] / total * 100, 2) if total else 0.0,
        },
        "last_run": dict(last_run),
    }


@app.get("/health", response_model=HealthCheckResponse, tags=["System"])
async def health_check():
    """
    Health check endpoint.

    Reports "degraded" when the environment configuration has issues.
    """
    status = verify_config()
    return HealthCheckResponse(
        status="healthy" if status["valid"] else "degraded",
        version=APP_VERSION,
        environment=ENVIRONMENT,
        control_port=CONTROL_PORT,
        config_valid=status["valid"],
        issues=status["issues"],
    )


@app.post("/scenarios/validate", response_model=ValidationResponse, tags=["Scenarios"])
async def validate_scenario(request: ValidateRequest):
    """Load and cross-check a scenario; invalid scenarios are reported, not raised."""
    counters["validations"] += 1
    try:
        return await run_in_threadpool(get_runner().validate, request.scenario_path)
    except ScenarioError as e:
        logger.info(f"Scenario '{request.scenario_path}' is invalid: {e}")
        return ValidationResponse(valid=False, error=str(e))


@app.post("/runs", response_model=RunReport, tags=["Scenarios"])
async def create_run(request: RunRequest):
    """
    Run a scenario to its end time and return the run report.

    Args:
        request: Scenario path plus optional seed, controller mode, output
            directory and trace flag

    Returns:
        RunReport with traffic and delivery metrics and the output file paths
    """
    counters["runs"] += 1
    logger.info(f"Run requested: {request.scenario_path} mode={request.mode} seed={request.seed}")
    report = await run_in_threadpool(
        get_runner().run,
        request.scenario_path,
        seed=request.seed,
        mode=request.mode,
        out_dir=request.out_dir,
        trace=request.trace,
    )
    _remember(report)
    return report


@app.post("/compare", response_model=ComparisonReport, tags=["Scenarios"])
async def create_comparison(request: CompareRequest):
    # Worker processes stay out of the request path.
    counters["compares"] += 1
    logger.info(f"Comparison requested: {request.scenario_path} seed={request.seed}")
    report = await run_in_threadpool(
        get_runner().compare,
        request.scenario_path,
        seed=request.seed,
        out_dir=request.out_dir,
        parallel=False,
    )
    _remember(report.adaptive)
    return report


@app.exception_handler(ScenarioError)
async def scenario_exception_handler(request, exc: ScenarioError):
    counters["errors"] += 1
    logger.warning(f"Invalid scenario: {exc}")
    return JSONResponse(status_code=422, content={"detail": str(exc), "error": type(exc).__name__})


@app.exception_handler(VanetSimError)
async def simulator_exception_handler(request, exc: VanetSimError):
    counters["errors"] += 1
    logger.error(f"Simulation error: {exc}", exc_info=True)
    return JSONResponse(status_code=500, content={"detail": str(exc), "error": type(exc).__name__})


@app.exception_handler(Exception)
async def global_exception_handler(request, exc):
    counters["errors"] += 1
    logger.error(f"Unhandled exception: {exc}", exc_info=True)
    return JSONResponse(
        status_code=500,
        content={"detail": "An internal error occurred", "error": str(exc)},
    )
