from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing import Any, Dict, List, Optional, Union


class TransformSpec(BaseModel):
    """Declarative form of one transform: {"op": name, "params": {...}, "p": float}"""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    name: str = Field(alias="op")
    params: Dict[str, Any] = Field(default_factory=dict)
    p: float = 1.0

    @property
    def is_pipeline(self) -> bool:
        return False

    def to_config(self) -> Dict[str, Any]:
        return {"op": self.name, "params": dict(self.params), "p": self.p}


class Pipeline(BaseModel):
    """Ordered children, each a TransformSpec or a nested Pipeline ({"op": "compose"})"""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    name: str = Field(default="compose", alias="op")
    children: List[Union["Pipeline", TransformSpec]] = Field(default_factory=list)
    modality: Optional[str] = None
    p: float = 1.0

    @field_validator("children", mode="before")
    @classmethod
    def parse_children(cls, value):
        if not isinstance(value, list):
            return value
        parsed = []
        for child in value:
            if isinstance(child, dict):
                if child.get("op", child.get("name")) == "compose" or "children" in child:
                    child = Pipeline.model_validate(child)
                else:
                    child = TransformSpec.model_validate(child)
            parsed.append(child)
        return parsed

    @property
    def is_pipeline(self) -> bool:
        return True

    @classmethod
    def from_config(cls, config: Any, modality: Optional[str] = None) -> "Pipeline":
        """Accepts a JSON array of specs or {"modality": ..., "transforms": [...]}"""
        if isinstance(config, Pipeline):
            return config
        if isinstance(config, list):
            return cls(children=config, modality=modality)
        if isinstance(config, dict):
            if "transforms" in config:
                return cls(children=config["transforms"], modality=config.get("modality", modality))
            pipeline = cls.model_validate(config)
            if pipeline.modality is None and modality:
                pipeline.modality = modality
            return pipeline
        raise TypeError(f"pipeline config must be a list or object, got {type(config).__name__}")

    def to_config(self) -> Dict[str, Any]:
        config: Dict[str, Any] = {"op": "compose", "children": [c.to_config() for c in self.children]}
        if self.modality:
            config["modality"] = self.modality
        if self.p != 1.0:
            config["p"] = self.p
        return config


class TransformMetadata(BaseModel):
    """Record of one transform application; nested pipelines carry their own list in children"""
    model_config = ConfigDict(extra="ignore")

    name: str
    params: Dict[str, Any] = Field(default_factory=dict)
    intensity: float = Field(default=0.0, ge=0.0, le=100.0)
    applied: bool
    src_shape: Dict[str, Any]
    dst_shape: Dict[str, Any]
    children: Optional[List["TransformMetadata"]] = None

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(exclude_none=True)


Pipeline.model_rebuild()
TransformMetadata.model_rebuild()
