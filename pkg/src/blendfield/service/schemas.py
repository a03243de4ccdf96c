"""Pydantic wire models for the render service."""

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"


class ModelInfo(BaseModel):
    n_sites: int
    split_index_max: int
    resolution_default: int
    resolutions: list[int]
    pitch_range: tuple[float, float]
    yaw_range: tuple[float, float]
    style_code_dim: int
    feature_grid_size: int


class RenderRequest(BaseModel):
    seed: int = 0
    pitch: float | None = None   # defaults to the frontal pose
    yaw: float | None = None
    split_index: int = Field(default=11)
    resolution: int | None = None
    style_b64: str | None = None  # base64 PNG; mutually exclusive with style_seed
    style_seed: int | None = None


class EncodeRequest(BaseModel):
    image_b64: str


class EncodeResponse(BaseModel):
    code: list[float]
    dim: int
