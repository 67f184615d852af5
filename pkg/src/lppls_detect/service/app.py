"""FastAPI application exposing the handler functions over HTTP."""

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from ..errors import LpplsError
from . import handlers, schemas


def create_app() -> FastAPI:
    app = FastAPI(title="lppls-detect", docs_url="/docs")

    @app.exception_handler(LpplsError)
    async def lppls_error(request: Request, exc: LpplsError):
        return JSONResponse(status_code=400, content={"detail": str(exc), "kind": exc.kind})

    @app.get("/health", response_model=schemas.HealthResponse)
    def get_health():
        return handlers.health()

    @app.post("/fit", response_model=schemas.FitResponse)
    def post_fit(req: schemas.FitRequest):
        return handlers.handle_fit(req)

    @app.post("/scan", response_model=schemas.ScanResponse)
    def post_scan(req: schemas.ScanRequest):
        return handlers.handle_scan(req)

    @app.post("/multilevel", response_model=schemas.MultilevelResponse)
    def post_multilevel(req: schemas.MultilevelRequest):
        return handlers.handle_multilevel(req)

    @app.post("/multilevel/stream")
    def post_multilevel_stream(req: schemas.MultilevelRequest):
        return StreamingResponse(
            handlers.iter_multilevel(req), media_type="application/x-ndjson"
        )

    @app.post("/crashes", response_model=schemas.CrashesResponse)
    def post_crashes(req: schemas.CrashesRequest):
        return handlers.handle_crashes(req)

    @app.post("/synth", response_model=schemas.SynthResponse)
    def post_synth(req: schemas.SynthRequest):
        return handlers.handle_synth(req)

    return app
