"""Models for the robustness eval harness and the runtime benchmark"""
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from typing import Any, Dict, List, Literal, Optional

from models.transform_models import TransformSpec

TOP_K = 5
MIN_ITERATIONS = 5


# ==================== EVAL MODELS ====================

class DatasetItem(BaseModel):
    item_id: str
    path: str
    label: str


class Prediction(BaseModel):
    """Ranked labels for one item; at least TOP_K distinct labels"""
    item_id: str
    ranked_labels: List[str]

    @field_validator("ranked_labels")
    @classmethod
    def check_labels(cls, labels: List[str]) -> List[str]:
        if len(labels) < TOP_K:
            raise ValueError(f"need at least {TOP_K} ranked labels, got {len(labels)}")
        if len(set(labels)) != len(labels):
            raise ValueError("ranked labels must be distinct")
        return labels


class EvalAugmentation(BaseModel):
    """One augmentation of an eval set; spec None is the identity baseline"""
    model_config = ConfigDict(extra="forbid")
    name: str
    category: Literal["spatial", "color", "overlay", "pixel-level"]
    spec: Optional[TransformSpec] = None

    @property
    def is_baseline(self) -> bool:
        return self.spec is None


class EvalRow(BaseModel):
    name: str
    category: str
    baseline_acc: float
    augmented_acc: Optional[float] = None
    delta: Optional[float] = None
    failed: bool = False
    error: Optional[str] = None

    @model_validator(mode="after")
    def check_delta(self):
        if not self.failed and self.augmented_acc is not None:
            self.delta = self.augmented_acc - self.baseline_acc
        return self


class EvalReport(BaseModel):
    rows: List[EvalRow]
    sample_size: int
    seed: int
    adapter: str = ""

    def category_means(self) -> Dict[str, float]:
        """Mean delta per category over rows that did not fail"""
        grouped: Dict[str, List[float]] = {}
        for row in self.rows:
            if not row.failed and row.delta is not None:
                grouped.setdefault(row.category, []).append(row.delta)
        return {category: sum(values) / len(values) for category, values in grouped.items()}

    def to_dict(self) -> Dict[str, Any]:
        return {**self.model_dump(), "category_means": self.category_means()}


# ==================== BENCH MODELS ====================

class BenchRow(BaseModel):
    name: str
    modality: str
    mean_s: float = 0.0
    std_s: float = 0.0
    iterations: int = 0
    input_descriptor: str = ""
    skipped: bool = False
    reason: Optional[str] = None

    @model_validator(mode="after")
    def check_timing(self):
        if self.skipped:
            if not self.reason:
                raise ValueError("skipped rows need a reason")
            return self
        if self.mean_s <= 0:
            raise ValueError(f"timed rows need mean_s > 0, got {self.mean_s}")
        if self.iterations < MIN_ITERATIONS:
            raise ValueError(f"timed rows need at least {MIN_ITERATIONS} iterations, got {self.iterations}")
        if self.std_s < 0:
            raise ValueError(f"std_s must be >= 0, got {self.std_s}")
        return self
