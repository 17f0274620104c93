"""FastAPI application: stateless scoring over HTTP.

POST /v1/score  {"texts": [...], "model": "finbert"}
    -> [{"positive": f, "negative": f, "neutral": f, "truncated": b}, ...]
GET /v1/health
    -> {"status": "ok", "models_loaded": [...], "backends": {...}}
"""

from fastapi import FastAPI, HTTPException

from .backends import MODELS, ModelRegistry, ModelUnavailable
from .schemas import HealthResponse, ScoredTextOut, ScoreRequest

MAX_TEXTS_PER_REQUEST = 256


def create_app(registry: ModelRegistry | None = None) -> FastAPI:
    app = FastAPI(title="sentiment-service", version="0.1.0")
    app.state.registry = registry or ModelRegistry()

    @app.get("/v1/health", response_model=HealthResponse)
    def health():
        reg = app.state.registry
        return HealthResponse(status="ok", models_loaded=reg.loaded(), backends=reg.backends())

    @app.post("/v1/score", response_model=list[ScoredTextOut])
    def score(request: ScoreRequest):
        if not request.texts:
            raise HTTPException(status_code=400, detail="texts must be a nonempty list")
        if len(request.texts) > MAX_TEXTS_PER_REQUEST:
            raise HTTPException(
                status_code=400,
                detail=f"at most {MAX_TEXTS_PER_REQUEST} texts per request",
            )
        if any(not t.strip() for t in request.texts):
            raise HTTPException(status_code=400, detail="texts must be nonempty strings")
        if request.model not in MODELS:
            raise HTTPException(
                status_code=400, detail=f"unknown model {request.model!r}; choose from {MODELS}"
            )
        try:
            scorer = app.state.registry.get(request.model)
        except ModelUnavailable as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc
        return [
            ScoredTextOut(
                positive=s.positive, negative=s.negative, neutral=s.neutral, truncated=s.truncated
            )
            for s in scorer.score(request.texts)
        ]

    return app


app = create_app()
