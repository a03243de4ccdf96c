"""HTTP render service.

The model snapshot is loaded once and never mutated; rendering is
referentially transparent per (snapshot, request), so concurrent requests
are served against the same read-only state. A semaphore bounds how many
renders run at once.
"""

import base64
import binascii
import logging
import threading
import uuid
from pathlib import Path

import torch
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from ..config import Config
from ..encoder import StyleEncoder
from ..generator import StyleFieldGenerator
from ..rendering import image_to_png_bytes, png_bytes_to_image
from ..training import load_generator_from_checkpoint
from .schemas import (EncodeRequest, EncodeResponse, HealthResponse, ModelInfo,
                      RenderRequest)

logger = logging.getLogger("blendfield.service")


class ModelSnapshot:
    """Read-only bundle of generator + encoder + config."""

    def __init__(self, generator: StyleFieldGenerator, encoder: StyleEncoder,
                 cfg: Config):
        self.generator = generator
        self.encoder = encoder
        self.cfg = cfg
        for p in generator.parameters():
            p.requires_grad_(False)
        for p in encoder.parameters():
            p.requires_grad_(False)

    @classmethod
    def from_checkpoint(cls, path: str | Path) -> "ModelSnapshot":
        generator, encoder, cfg = load_generator_from_checkpoint(path)
        return cls(generator, encoder, cfg)

    def info(self) -> ModelInfo:
        cfg = self.cfg
        default_res = cfg["service.default_resolution"]
        factor = 2 ** self.generator.renderer.n_upsamples
        resolutions = sorted({default_res, 64, 128} | {cfg["model.image_size"]})
        resolutions = [r for r in resolutions if r % factor == 0]
        return ModelInfo(
            n_sites=self.generator.n_sites,
            split_index_max=self.generator.n_sites,
            resolution_default=default_res,
            resolutions=resolutions,
            pitch_range=cfg.pitch_range,
            yaw_range=cfg.yaw_range,
            style_code_dim=self.generator.style_dim,
            feature_grid_size=cfg["model.grid_size"],
        )

    def style_code(self, req: RenderRequest) -> torch.Tensor | None:
        if req.style_b64 is not None:
            try:
                raw = base64.b64decode(req.style_b64, validate=True)
            except (binascii.Error, ValueError) as exc:
                raise BadRequest(f"style_b64: invalid base64 ({exc})") from exc
            try:
                img = png_bytes_to_image(raw)
            except Exception as exc:
                raise BadRequest(f"style_b64: undecodable image ({exc})") from exc
            size = self.cfg["model.image_size"]
            if img.shape[-1] != size:
                img = torch.nn.functional.interpolate(
                    img[None], size=(size, size), mode="bilinear",
                    align_corners=False)[0]
            with torch.no_grad():
                return self.encoder(img[None])[0]
        if req.style_seed is not None:
            rng = torch.Generator().manual_seed(req.style_seed)
            return torch.randn(self.generator.style_dim, generator=rng)
        return None

    def render_png(self, req: RenderRequest) -> bytes:
        cfg = self.cfg
        resolution = req.resolution or cfg["service.default_resolution"]
        pitch = req.pitch if req.pitch is not None else torch.pi / 2
        yaw = req.yaw if req.yaw is not None else torch.pi / 2
        n = self.generator.n_sites
        if not 0 <= req.split_index <= n:
            raise BadRequest(f"split_index: must be in [0, {n}]")
        lo, hi = cfg.pitch_range
        if not lo <= pitch <= hi:
            raise BadRequest(f"pitch: must be in [{lo:.4f}, {hi:.4f}]")
        lo, hi = cfg.yaw_range
        if not lo <= yaw <= hi:
            raise BadRequest(f"yaw: must be in [{lo:.4f}, {hi:.4f}]")
        factor = 2 ** self.generator.renderer.n_upsamples
        if resolution < factor or resolution % factor != 0:
            raise BadRequest(f"resolution: must be a positive multiple of {factor}")
        style = self.style_code(req)
        rng = torch.Generator().manual_seed(req.seed)
        z = torch.randn(1, self.generator.identity_dim, generator=rng)
        z_style = None if style is None else style[None]
        with torch.no_grad():
            image = self.generator.synthesize(
                z, z_style, req.split_index,
                torch.tensor([float(pitch)]), torch.tensor([float(yaw)]),
                resolution=resolution, n_samples=cfg["model.n_samples"],
                generator=rng)
        return image_to_png_bytes(image[0])


class BadRequest(ValueError):
    pass


def create_app(snapshot: ModelSnapshot) -> FastAPI:
    app = FastAPI(title="blendfield render service")
    render_gate = threading.BoundedSemaphore(
        max(1, snapshot.cfg["service.max_parallel_renders"]))

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        fields = [".".join(str(part) for part in err["loc"] if part != "body")
                  for err in exc.errors()]
        return JSONResponse(status_code=400, content={
            "error": "invalid request", "fields": fields})

    @app.exception_handler(BadRequest)
    async def bad_request_handler(request: Request, exc: BadRequest):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def failure_handler(request: Request, exc: Exception):
        failure_id = uuid.uuid4().hex[:12]
        logger.exception("request failed (id=%s)", failure_id)
        return JSONResponse(status_code=500, content={
            "error": "internal failure", "id": failure_id})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse()

    @app.get("/model/info", response_model=ModelInfo)
    def model_info() -> ModelInfo:
        return snapshot.info()

    @app.post("/render")
    def render(req: RenderRequest) -> Response:
        with render_gate:
            png = snapshot.render_png(req)
        return Response(content=png, media_type="image/png")

    @app.post("/style/encode", response_model=EncodeResponse)
    def encode(req: EncodeRequest) -> EncodeResponse:
        render_req = RenderRequest(style_b64=req.image_b64)
        code = snapshot.style_code(render_req)
        values = [float(v) for v in code.tolist()]
        return EncodeResponse(code=values, dim=len(values))

    return app


def serve(ckpt: str | Path, port: int, host: str = "127.0.0.1") -> None:
    """Load the checkpoint and block serving HTTP requests."""
    import uvicorn

    snapshot = ModelSnapshot.from_checkpoint(ckpt)
    app = create_app(snapshot)
    uvicorn.run(app, host=host, port=port, log_level="warning")
