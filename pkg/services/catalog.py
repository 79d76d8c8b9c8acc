"""
Transform catalog

Every augmentation is a plain module function registered with @register.
The catalog derives a pydantic param schema from the function signature
(Annotated[..., Field(...)] carries the constraints), remembers the
category and the intensity formula, and validates/resolves TransformSpec
params, including random param descriptors, before anything runs.
"""

import importlib
import inspect
import logging
import typing
from typing import Annotated, Any, Callable, Dict, List, Optional, Tuple, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError, create_model

from models.media_models import MODALITIES
from utils.errors import CatalogError, ParamValidationError
from utils.rng import Rng

logger = logging.getLogger(__name__)

# ==================== PARAM TYPES ====================

Fraction = Annotated[float, Field(ge=0.0, le=1.0)]
Positive = Annotated[float, Field(gt=0.0)]
NonNegative = Annotated[float, Field(ge=0.0)]
Channel = Annotated[int, Field(ge=0, le=255)]
Color = Tuple[Channel, Channel, Channel]

CATEGORIES = {
    "image": ("spatial", "color", "overlay", "pixel-level"),
    "audio": ("temporal", "spectral", "mixing", "channel", "utility"),
    "text": ("character", "word", "utility"),
    "video": ("spatial", "color", "overlay", "pixel-level", "temporal", "composite", "mixing", "utility"),
}

RANDOM_KINDS = ("uniform", "randint", "normal", "choice")

MODALITY_MODULES = {
    "image": ("services.image_augmentations", "services.image_overlays"),
    "text": ("services.text_augmentations",),
    "audio": ("services.audio_augmentations",),
    "video": ("services.video_augmentations",),
}


def is_random_descriptor(value: Any) -> bool:
    return isinstance(value, dict) and "random" in value


class TransformDef:
    """One registered transform: callable, schema, category and intensity formula"""

    def __init__(self, name: str, modality: str, func: Callable, category: str,
                 intensity: Callable[[Dict[str, Any]], float],
                 params_model: Type[BaseModel], uses_rng: bool,
                 validate_extra: Optional[Callable[[Dict[str, Any]], None]] = None,
                 description: str = ""):
        self.name = name
        self.modality = modality
        self.func = func
        self.category = category
        self.intensity_fn = intensity
        self.params_model = params_model
        self.uses_rng = uses_rng
        self.validate_extra = validate_extra
        self.description = description

    @property
    def param_names(self) -> List[str]:
        return list(self.params_model.model_fields)

    def defaults(self) -> Dict[str, Any]:
        return dict(self.params_model())

    def schema(self) -> Dict[str, Any]:
        try:
            return self.params_model.model_json_schema()
        except Exception:
            # Media/callable params have no JSON schema
            return {"properties": {name: {} for name in self.param_names}}

    # ==================== VALIDATION ====================

    def _check(self, params: Dict[str, Any]) -> BaseModel:
        try:
            return self.params_model.model_validate(params)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or 'params'}: {err['msg']}" for err in e.errors()
            )
            raise ParamValidationError(f"{self.modality}.{self.name}: {problems}") from None

    def validate_params(self, params: Dict[str, Any]) -> None:
        """Fail-fast check of concrete values and random descriptor bounds"""
        concrete = {k: v for k, v in params.items() if not is_random_descriptor(v)}
        unknown = set(params) - set(self.param_names)
        if unknown:
            raise ParamValidationError(f"{self.modality}.{self.name}: unknown params {sorted(unknown)}")
        self._check(concrete)
        for key, descriptor in params.items():
            if is_random_descriptor(descriptor):
                for probe in self._descriptor_probes(key, descriptor):
                    self._check({**concrete, key: probe})
        if self.validate_extra:
            self.validate_extra({**self.defaults(), **concrete})

    def _descriptor_probes(self, key: str, descriptor: Dict[str, Any]) -> List[Any]:
        kind = descriptor.get("random")
        where = f"{self.modality}.{self.name}.{key}"
        if kind not in RANDOM_KINDS:
            raise ParamValidationError(f"{where}: random kind must be one of {RANDOM_KINDS}, got {kind!r}")
        if kind in ("uniform", "randint"):
            if "low" not in descriptor or "high" not in descriptor:
                raise ParamValidationError(f"{where}: {kind} needs low and high")
            if descriptor["low"] > descriptor["high"]:
                raise ParamValidationError(f"{where}: low > high")
            return [descriptor["low"], descriptor["high"]]
        if kind == "normal":
            if descriptor.get("std", 1.0) < 0:
                raise ParamValidationError(f"{where}: std must be >= 0")
            probes = [descriptor.get("mean", 0.0)]
            probes += [descriptor[k] for k in ("min", "max") if k in descriptor]
            return probes
        options = descriptor.get("options")
        if not isinstance(options, list) or not options:
            raise ParamValidationError(f"{where}: choice needs a non-empty options list")
        return options

    # ==================== RESOLUTION ====================

    def resolve_params(self, params: Dict[str, Any], rng: Optional[Rng]) -> Dict[str, Any]:
        """Draw random descriptors (in schema order) and return complete validated params"""
        drawn = dict(params)
        for key in self.param_names:
            value = params.get(key)
            if not is_random_descriptor(value):
                continue
            if rng is None:
                raise ParamValidationError(f"{self.modality}.{self.name}.{key}: unresolved random param")
            drawn[key] = draw_descriptor(value, rng)
        return dict(self._check(drawn))

    def call(self, datum: Any, params: Dict[str, Any], rng: Rng) -> Any:
        if self.uses_rng:
            return self.func(datum, rng=rng, **params)
        return self.func(datum, **params)

    def intensity(self, resolved: Dict[str, Any]) -> float:
        value = float(self.intensity_fn(resolved))
        return min(100.0, max(0.0, value))

    def __repr__(self) -> str:
        return f"TransformDef({self.modality}.{self.name})"


def draw_descriptor(descriptor: Dict[str, Any], rng: Rng) -> Any:
    kind = descriptor["random"]
    if kind == "uniform":
        return float(rng.uniform(descriptor["low"], descriptor["high"]))
    if kind == "randint":
        return int(rng.integers(descriptor["low"], descriptor["high"] + 1))
    if kind == "normal":
        value = float(rng.normal(descriptor.get("mean", 0.0), descriptor.get("std", 1.0)))
        if "min" in descriptor:
            value = max(value, descriptor["min"])
        if "max" in descriptor:
            value = min(value, descriptor["max"])
        return value
    return rng.choice(descriptor["options"])


def build_params_model(func: Callable, name: str) -> Tuple[Type[BaseModel], bool]:
    """Pydantic model over every parameter after the datum, skipping rng"""
    signature = inspect.signature(func)
    hints = typing.get_type_hints(func, include_extras=True)
    fields: Dict[str, Any] = {}
    uses_rng = False
    for index, (pname, param) in enumerate(signature.parameters.items()):
        if index == 0:
            continue
        if pname == "rng":
            uses_rng = True
            continue
        annotation = hints.get(pname, Any)
        default = ... if param.default is inspect.Parameter.empty else param.default
        fields[pname] = (annotation, default)
    model = create_model(
        f"{name.title().replace('_', '')}Params",
        __config__=ConfigDict(extra="forbid", arbitrary_types_allowed=True),
        **fields,
    )
    return model, uses_rng


class TransformCatalog:
    """Registry of every transform, keyed by (modality, name)"""

    def __init__(self):
        self._defs: Dict[str, Dict[str, TransformDef]] = {m: {} for m in MODALITIES}
        self._loaded = False

    def add(self, defn: TransformDef) -> TransformDef:
        if defn.modality not in self._defs:
            raise CatalogError(f"unknown modality {defn.modality!r}")
        if defn.category not in CATEGORIES[defn.modality]:
            raise CatalogError(f"{defn.modality}.{defn.name}: unknown category {defn.category!r}")
        self._defs[defn.modality][defn.name] = defn
        return defn

    def ensure_loaded(self) -> None:
        if self._loaded:
            return
        for modules in MODALITY_MODULES.values():
            for module in modules:
                importlib.import_module(module)
        self._loaded = True
        logger.debug("Catalog loaded: " + ", ".join(f"{m}={len(d)}" for m, d in self._defs.items()))

    def get(self, modality: str, name: str) -> TransformDef:
        self.ensure_loaded()
        if modality not in self._defs:
            raise CatalogError(f"unknown modality {modality!r}")
        defn = self._defs[modality].get(name)
        if defn is None:
            raise CatalogError(f"unknown {modality} transform {name!r}")
        return defn

    def registered(self, modality: str, name: str) -> TransformDef:
        """Lookup that never triggers module loading; for modules registering derived ops"""
        defn = self._defs.get(modality, {}).get(name)
        if defn is None:
            raise CatalogError(f"{modality}.{name} is not registered yet")
        return defn

    def names(self, modality: str) -> List[str]:
        self.ensure_loaded()
        if modality not in self._defs:
            raise CatalogError(f"unknown modality {modality!r}")
        return sorted(self._defs[modality])

    def definitions(self, modality: str) -> List[TransformDef]:
        return [self._defs[modality][name] for name in self.names(modality)]

    def modalities_of(self, name: str) -> List[str]:
        self.ensure_loaded()
        return [m for m in MODALITIES if name in self._defs[m]]


catalog = TransformCatalog()


def register(modality: str, category: str, intensity: Callable[[Dict[str, Any]], float],
             name: Optional[str] = None,
             validate_extra: Optional[Callable[[Dict[str, Any]], None]] = None):
    """Decorator: register a module-level transform function in the catalog"""
    def decorator(func: Callable) -> Callable:
        op_name = name or func.__name__
        params_model, uses_rng = build_params_model(func, op_name)
        doc = (func.__doc__ or "").strip().splitlines()
        catalog.add(TransformDef(
            name=op_name,
            modality=modality,
            func=func,
            category=category,
            intensity=intensity,
            params_model=params_model,
            uses_rng=uses_rng,
            validate_extra=validate_extra,
            description=doc[0] if doc else "",
        ))
        return func
    return decorator
