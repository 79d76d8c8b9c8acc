"""
Augmentation core: probabilistic application, composition, intensity and metadata

All entry points validate the whole request before touching the datum, so a
raised error never leaves partial output behind. Randomness flows through
Rng streams only: a pipeline child i always sees rng.derive(i), its params
are drawn from derive(0) of that stream and the transform itself runs on
derive(1).
"""

import importlib
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from models.media_models import MODALITIES, AudioBuffer, Raster, TextDoc, VideoClip, modality_of
from models.transform_models import Pipeline, TransformMetadata, TransformSpec
from services.catalog import catalog, is_random_descriptor
from utils.errors import CatalogError, MediaIOError, ParamValidationError
from utils.rng import Rng

logger = logging.getLogger(__name__)


class NestedResult:
    """Returned by transforms that run a sub-pipeline (video.augment_audio)"""

    def __init__(self, datum: Any, children: List[TransformMetadata]):
        self.datum = datum
        self.children = children


# ==================== HELPERS ====================

def as_rng(rng: Union[Rng, int, None]) -> Rng:
    if isinstance(rng, Rng):
        return rng
    return Rng(0 if rng is None else int(rng))


def jsonable(value: Any) -> Any:
    """Make resolved params safe for metadata JSON"""
    if isinstance(value, (Raster, AudioBuffer, TextDoc, VideoClip)):
        return repr(value)
    if isinstance(value, (Pipeline, TransformSpec)):
        return value.to_config()
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return f"ndarray{tuple(value.shape)}"
    if callable(value):
        module = getattr(value, "__module__", None)
        qualname = getattr(value, "__qualname__", type(value).__name__)
        return f"{module}.{qualname}" if module else qualname
    if isinstance(value, Path):
        return str(value)
    return value


def resolve_callable(target: Any) -> Callable:
    """A callable, or a "package.module:attribute" reference to one"""
    if callable(target):
        return target
    if isinstance(target, str) and ":" in target:
        module_name, _, attribute = target.partition(":")
        try:
            module = importlib.import_module(module_name)
            func = getattr(module, attribute)
        except (ImportError, AttributeError) as e:
            raise ParamValidationError(f"cannot resolve callable {target!r}: {e}") from None
        if callable(func):
            return func
    raise ParamValidationError(f"aug_function must be callable or 'module:attr', got {target!r}")


def _check_probability(p: float, where: str) -> None:
    if not (0.0 <= p <= 1.0):
        raise ParamValidationError(f"{where}: p must be in [0, 1], got {p}")


# ==================== VALIDATION ====================

def validate_spec(spec: TransformSpec, modality: str) -> None:
    _check_probability(spec.p, f"{modality}.{spec.name}")
    catalog.get(modality, spec.name).validate_params(spec.params)


def validate_pipeline(pipeline: Pipeline, modality: str) -> None:
    """Fail-fast check of every node; raises CatalogError / ParamValidationError"""
    if modality not in MODALITIES:
        raise CatalogError(f"unknown modality {modality!r}")
    if pipeline.modality and pipeline.modality != modality:
        raise CatalogError(f"{pipeline.modality} pipeline cannot be applied to {modality} input")
    _check_probability(pipeline.p, "compose")
    for child in pipeline.children:
        if isinstance(child, Pipeline):
            validate_pipeline(child, modality)
        else:
            validate_spec(child, modality)


def load_pipeline(source: Any, modality: Optional[str] = None) -> Pipeline:
    """Build a Pipeline from a config path, JSON text, list/dict or Pipeline"""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith(("[", "{"))):
        path = Path(source)
        try:
            source = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise MediaIOError(f"cannot read pipeline config {path}: {e}") from None
        except json.JSONDecodeError as e:
            raise ParamValidationError(f"pipeline config {path} is not valid JSON: {e}") from None
    elif isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as e:
            raise ParamValidationError(f"pipeline config is not valid JSON: {e}") from None
    try:
        return Pipeline.from_config(source, modality)
    except (TypeError, ValueError) as e:
        raise ParamValidationError(f"invalid pipeline config: {e}") from None


# ==================== APPLICATION ====================

def _apply_validated(spec: TransformSpec, datum: Any, rng: Rng, modality: str) -> Tuple[Any, TransformMetadata]:
    defn = catalog.get(modality, spec.name)
    coin = float(rng.random())
    params = defn.resolve_params(spec.params, rng.derive(0))
    src_shape = datum.shape_descriptor()
    if coin >= spec.p:
        return datum, TransformMetadata(
            name=spec.name, params=jsonable(params), intensity=0.0,
            applied=False, src_shape=src_shape, dst_shape=src_shape,
        )
    result = defn.call(datum, params, rng.derive(1))
    children = None
    if isinstance(result, NestedResult):
        result, children = result.datum, result.children
    logger.debug(f"applied {modality}.{spec.name} {jsonable(params)}")
    return result, TransformMetadata(
        name=spec.name, params=jsonable(params), intensity=defn.intensity(params),
        applied=True, src_shape=src_shape, dst_shape=result.shape_descriptor(), children=children,
    )


def _compose_validated(pipeline: Pipeline, datum: Any, rng: Rng, modality: str) -> Tuple[Any, List[TransformMetadata]]:
    metadata: List[TransformMetadata] = []
    for index, child in enumerate(pipeline.children):
        child_rng = rng.derive(index)
        if isinstance(child, Pipeline):
            datum, entry = _apply_nested(child, datum, child_rng, modality)
        else:
            datum, entry = _apply_validated(child, datum, child_rng, modality)
        metadata.append(entry)
    return datum, metadata


def _apply_nested(pipeline: Pipeline, datum: Any, rng: Rng, modality: str) -> Tuple[Any, TransformMetadata]:
    coin = float(rng.random())
    src_shape = datum.shape_descriptor()
    if coin >= pipeline.p:
        return datum, TransformMetadata(name="compose", applied=False, src_shape=src_shape,
                                        dst_shape=src_shape, children=[])
    result, children = _compose_validated(pipeline, datum, rng.derive(1), modality)
    applied = [c.intensity for c in children if c.applied]
    return result, TransformMetadata(
        name="compose", intensity=max(applied) if applied else 0.0, applied=True,
        src_shape=src_shape, dst_shape=result.shape_descriptor(), children=children,
    )


def apply_with_probability(spec: TransformSpec, datum: Any, rng: Union[Rng, int],
                           modality: Optional[str] = None) -> Tuple[Any, TransformMetadata]:
    """
    Apply one transform with probability spec.p

    Exactly one uniform coin is drawn from rng whatever the outcome.
    Params are resolved from rng.derive(0); the transform runs on rng.derive(1).

    Returns:
        (output datum, TransformMetadata)
    """
    modality = modality or modality_of(datum)
    validate_spec(spec, modality)
    return _apply_validated(spec, datum, as_rng(rng), modality)


def compose(pipeline: Union[Pipeline, list, dict], datum: Any, rng: Union[Rng, int],
            modality: Optional[str] = None) -> Tuple[Any, List[TransformMetadata]]:
    """
    Apply pipeline children in order; child i uses rng.derive(i)

    Args:
        pipeline: Pipeline or its JSON config form
        datum: Raster, AudioBuffer, TextDoc or VideoClip
        rng: Rng or integer seed

    Returns:
        (output datum, one TransformMetadata per child)
    """
    modality = modality or modality_of(datum)
    pipeline = load_pipeline(pipeline, modality) if not isinstance(pipeline, Pipeline) else pipeline
    validate_pipeline(pipeline, modality)
    return _compose_validated(pipeline, datum, as_rng(rng), modality)


def augment(config: Any, datum: Any, seed: int = 0) -> Tuple[Any, List[Dict[str, Any]]]:
    """compose() with a config and integer seed, metadata returned as plain dicts"""
    result, metadata = compose(load_pipeline(config, modality_of(datum)), datum, Rng(seed))
    return result, [m.to_dict() for m in metadata]


# ==================== INTENSITY ====================

def intensity(spec: TransformSpec, modality: Optional[str] = None) -> float:
    """
    Intensity in [0, 100] of a spec with concrete params

    Without a modality the first catalog (image, text, audio, video) whose
    schema accepts the params is used.
    """
    for key, value in spec.params.items():
        if is_random_descriptor(value):
            raise ParamValidationError(f"{spec.name}.{key}: intensity needs resolved params, got a random descriptor")
    candidates = [modality] if modality else catalog.modalities_of(spec.name)
    if not candidates:
        raise CatalogError(f"unknown transform {spec.name!r}")
    last_error: Optional[Exception] = None
    for candidate in candidates:
        try:
            defn = catalog.get(candidate, spec.name)
            defn.validate_params(spec.params)
        except ParamValidationError as e:
            last_error = e
            continue
        return defn.intensity(defn.resolve_params(spec.params, None))
    raise last_error
