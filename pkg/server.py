from fastapi import FastAPI, APIRouter
from starlette.middleware.cors import CORSMiddleware
import logging
import sys
from pathlib import Path

ROOT_DIR = Path(__file__).parent

# Add project directory to Python path for service imports
sys.path.insert(0, str(ROOT_DIR))

from utils import config
from version import BUILD_VERSION
from models.media_models import MODALITIES
from services.catalog import catalog
from routes.augment_routes import router as augment_router

app = FastAPI(title="Multimodal Augmentation Service", version=BUILD_VERSION)
api_router = APIRouter(prefix="/api")


def _health():
    catalog.ensure_loaded()
    return {
        "status": "healthy",
        "service": "augment",
        "version": BUILD_VERSION,
        "catalog": {modality: len(catalog.names(modality)) for modality in MODALITIES},
    }


@app.get("/health")
async def health_check():
    return _health()


@api_router.get("/health")
async def api_health_check():
    """Health check endpoint accessible via /api/health for deployment"""
    return _health()


api_router.include_router(augment_router)

app.include_router(api_router)

cors_origins = [origin.strip() for origin in config.CORS_ORIGINS]

app.add_middleware(
    CORSMiddleware,
    allow_credentials=True,
    allow_origins=cors_origins,
    allow_methods=["*"],
    allow_headers=["*"],
)

logging.basicConfig(
    level=getattr(logging, config.LOG_LEVEL, logging.INFO),
    format=config.LOG_FORMAT
)
logger = logging.getLogger(__name__)

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=config.PORT)
