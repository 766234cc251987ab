"""HTTP interface: one POST endpoint per operation under /v1.

Domain errors carry a machine-readable code; the exception handler maps
them to HTTP statuses so clients can distinguish bad requests from
capacity limits and solver failures.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ZenoprepError
from . import handlers, schemas

#: HTTP status per domain error code; anything unlisted is a 500.
ERROR_STATUS = {
    "config": 400,
    "capacity": 413,
    "degeneracy": 422,
    "step_floor": 422,
    "divergent": 422,
    "convergence": 500,
}


def create_app() -> FastAPI:
    app = FastAPI(title="zenoprep", version=__version__)

    @app.exception_handler(ZenoprepError)
    async def _domain_error(request: Request, exc: ZenoprepError):
        status = ERROR_STATUS.get(exc.code, 500)
        return JSONResponse(
            status_code=status, content={"error": exc.code, "detail": str(exc)}
        )

    @app.get("/v1/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.health()

    @app.post("/v1/spectrum", response_model=schemas.SpectrumResponse)
    def spectrum(req: schemas.SpectrumRequest):
        return handlers.handle_spectrum(req)

    @app.post("/v1/schedule", response_model=schemas.ScheduleResponse)
    def schedule(req: schemas.ScheduleRequest):
        return handlers.handle_schedule(req)

    @app.post("/v1/cost", response_model=schemas.CostResponse)
    def cost(req: schemas.CostRequest):
        return handlers.handle_cost(req)

    @app.post("/v1/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        return handlers.handle_simulate(req)

    @app.post("/v1/tdepth", response_model=schemas.TdepthResponse)
    def tdepth(req: schemas.TdepthRequest):
        return handlers.handle_tdepth(req)

    @app.post("/v1/run", response_model=schemas.RunResponse)
    def run(req: schemas.RunRequest):
        return handlers.handle_run(req)

    @app.post("/v1/scan", response_model=schemas.ScanResponse)
    def scan(req: schemas.ScanRequest):
        return handlers.handle_scan(req)

    @app.post("/v1/plot-data", response_model=schemas.PlotDataResponse)
    def plot_data(req: schemas.PlotDataRequest):
        return handlers.handle_plot_data(req)

    return app


app = create_app()
