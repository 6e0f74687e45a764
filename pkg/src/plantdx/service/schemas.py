from pydantic import BaseModel, ConfigDict


class PredictionResponse(BaseModel):
    model_config = ConfigDict(frozen=True)

    plant: str
    label: str
    confidence: float
    votes: dict[str, int]
    feature_vector: dict[str, float]


class HealthResponse(BaseModel):
    status: str
    models: list[str]


class ErrorResponse(BaseModel):
    error: str
    detail: str
