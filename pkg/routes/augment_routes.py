"""Routes for the augmentation catalog, intensity lookups and one-shot augmentation"""
from fastapi import APIRouter, HTTPException, UploadFile, File, Form, Response
from starlette.concurrency import run_in_threadpool
from typing import List
import io
import json
import logging

from PIL import Image, UnidentifiedImageError

from models.api_models import (
    CatalogEntry, IntensityRequest, IntensityResponse,
    TextAugmentRequest, TextAugmentResponse
)
from models.media_models import MODALITIES, Raster, TextDoc
from models.transform_models import TransformSpec
from services import augmentation_core
from services.catalog import catalog
from utils.errors import AugmentationError

logger = logging.getLogger(__name__)

router = APIRouter(tags=["augment"])

METADATA_HEADER = "X-Augment-Metadata"


def _http_error(e: AugmentationError) -> HTTPException:
    logger.warning(f"{type(e).__name__}: {e}")
    return HTTPException(status_code=e.http_status, detail=str(e))


# ==================== CATALOG ENDPOINTS ====================

@router.get("/catalog/{modality}", response_model=List[CatalogEntry])
async def list_catalog(modality: str):
    """Every transform of a modality with its category and param schema"""
    if modality not in MODALITIES:
        raise HTTPException(status_code=404, detail=f"unknown modality {modality!r}")
    return [
        CatalogEntry(name=defn.name, category=defn.category, description=defn.description,
                     params=defn.schema().get("properties", {}))
        for defn in catalog.definitions(modality)
    ]


@router.post("/intensity", response_model=IntensityResponse)
async def get_intensity(request: IntensityRequest):
    try:
        value = augmentation_core.intensity(TransformSpec(name=request.name, params=request.params),
                                            request.modality)
    except AugmentationError as e:
        raise _http_error(e)
    return IntensityResponse(name=request.name, modality=request.modality, intensity=value)


# ==================== AUGMENT ENDPOINTS ====================

@router.post("/augment/text", response_model=TextAugmentResponse)
async def augment_text(request: TextAugmentRequest):
    try:
        result, metadata = await run_in_threadpool(
            augmentation_core.augment, request.pipeline, TextDoc(request.text), request.seed
        )
    except AugmentationError as e:
        raise _http_error(e)
    return TextAugmentResponse(text=result.content, metadata=metadata)


@router.post("/augment/image")
async def augment_image(
    file: UploadFile = File(...),
    pipeline: str = Form(...),
    seed: int = Form(0),
):
    """Augment an uploaded image; the PNG result carries its metadata in a response header"""
    try:
        config = json.loads(pipeline)
    except json.JSONDecodeError as e:
        raise HTTPException(status_code=422, detail=f"pipeline is not valid JSON: {e}")

    content = await file.read()
    try:
        with Image.open(io.BytesIO(content)) as image:
            image.load()
            raster = Raster.from_pil(image)
    except (OSError, UnidentifiedImageError):
        raise HTTPException(status_code=400, detail=f"{file.filename or 'upload'} is not a readable image")

    try:
        result, metadata = await run_in_threadpool(augmentation_core.augment, config, raster, seed)
    except AugmentationError as e:
        raise _http_error(e)

    buffer = io.BytesIO()
    result.to_pil().save(buffer, format="PNG")
    return Response(
        content=buffer.getvalue(),
        media_type="image/png",
        headers={METADATA_HEADER: json.dumps(metadata)},
    )
