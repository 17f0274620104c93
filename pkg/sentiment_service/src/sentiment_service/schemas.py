"""Request/response models for the scoring API."""

from pydantic import BaseModel


class ScoreRequest(BaseModel):
    texts: list[str]
    model: str = "finbert"


class ScoredTextOut(BaseModel):
    positive: float
    negative: float
    neutral: float
    truncated: bool


class HealthResponse(BaseModel):
    status: str
    models_loaded: list[str]
    backends: dict[str, str]
