"""Request/response models for the HTTP augmentation surface"""
from pydantic import BaseModel, Field, ConfigDict
from typing import Any, Dict, List, Optional, Union


class IntensityRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)
    modality: Optional[str] = None


class IntensityResponse(BaseModel):
    name: str
    modality: Optional[str] = None
    intensity: float


class TextAugmentRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    text: str
    pipeline: Union[List[Any], Dict[str, Any]]
    seed: int = 0


class TextAugmentResponse(BaseModel):
    text: str
    metadata: List[Dict[str, Any]]


class CatalogEntry(BaseModel):
    name: str
    category: str
    description: str = ""
    params: Dict[str, Any] = Field(default_factory=dict)
