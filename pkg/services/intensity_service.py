"""
Intensity formula ledger

Each builder returns a function of the resolved params dict that yields a
score in [0, 100]. Identity parameterizations score 0, scores saturate at
100 and never decrease as a param moves away from its identity value.
"""

import math
from typing import Any, Callable, Dict, Iterable

Formula = Callable[[Dict[str, Any]], float]


def _clamp(value: float) -> float:
    return min(100.0, max(0.0, value))


def constant(value: float) -> Formula:
    """Unparameterized transforms: full change (100) or unknown/identity (0)"""
    return lambda params: value


def scaled(key: str, limit: float, offset: float = 0.0) -> Formula:
    """min(|params[key] - offset|, limit) / limit * 100"""
    def formula(params):
        return min(abs(float(params[key]) - offset), limit) / limit * 100.0
    return formula


def factor_distance(key: str = "factor") -> Formula:
    """Multiplicative factors with identity 1: min(|f - 1|, 1) * 100"""
    return scaled(key, 1.0, offset=1.0)


def log2_ratio(key: str = "factor", limit: float = 2.0) -> Formula:
    """Speed/size ratios: min(|log2 r|, limit) / limit * 100"""
    def formula(params):
        value = float(params[key])
        if value <= 0:
            return 100.0
        return min(abs(math.log2(value)), limit) / limit * 100.0
    return formula


def probability(key: str) -> Formula:
    """Fraction of units changed: p * 100"""
    return lambda params: _clamp(float(params[key]) * 100.0)


def complement(key: str) -> Formula:
    """(1 - params[key]) * 100, e.g. pixelization ratio or opacity level"""
    return lambda params: _clamp((1.0 - float(params[key])) * 100.0)


def window_loss(offset_key: str, duration_key: str) -> Formula:
    """Temporal excerpts: share of the timeline discarded"""
    def formula(params):
        kept = min(1.0, max(0.0, float(params[duration_key])))
        return _clamp((1.0 - kept) * 100.0)
    return formula


def area_fraction(size_key: str, opacity_key: str = None) -> Formula:
    """Overlays scaled relative to the canvas: covered area fraction * 100"""
    def formula(params):
        size = min(1.0, max(0.0, float(params[size_key])))
        alpha = float(params[opacity_key]) if opacity_key else 1.0
        return _clamp(size * size * alpha * 100.0)
    return formula


def crop_area(params: Dict[str, Any]) -> float:
    kept = max(0.0, params["x2"] - params["x1"]) * max(0.0, params["y2"] - params["y1"])
    return _clamp((1.0 - kept) * 100.0)


def pad_amount(params: Dict[str, Any]) -> float:
    return _clamp(min((params["w_factor"] + params["h_factor"]) / 2.0, 1.0) * 100.0)


def maximum(*formulas: Formula) -> Formula:
    return lambda params: max(f(params) for f in formulas)


def total(*formulas: Formula) -> Formula:
    return lambda params: _clamp(sum(f(params) for f in formulas))


def nonzero(key: str, identity_values: Iterable[Any] = (0, None)) -> Formula:
    """100 unless params[key] is one of the identity values"""
    identity = tuple(identity_values)
    return lambda params: 0.0 if params[key] in identity else 100.0


def explicit_target(*keys: str) -> Formula:
    """Resizes to absolute dims: source size is not part of params, so any target scores 50"""
    return lambda params: 0.0 if all(params[k] is None for k in keys) else 50.0


# ==================== NAMED FORMULAS ====================

def rotate_degrees(params: Dict[str, Any]) -> float:
    return min(abs(float(params["degrees"])), 180.0) / 180.0 * 100.0


def noise_strength(params: Dict[str, Any]) -> float:
    std = math.sqrt(max(0.0, float(params["var"])))
    return _clamp(min(std / 0.5, 1.0) * 100.0 + abs(float(params["mean"])) * 100.0)


def volume_change(params: Dict[str, Any]) -> float:
    return scaled("volume_db", 40.0)(params)


def snr_strength(params: Dict[str, Any]) -> float:
    snr = min(60.0, max(0.0, float(params["snr_level_db"])))
    return 100.0 * (1.0 - snr / 60.0)


def loop_count(key: str) -> Formula:
    return scaled(key, 10.0)


def complement_quality(params: Dict[str, Any]) -> float:
    """JPEG quality: 100 - q"""
    return _clamp(100.0 - float(params["quality"]))


def complement_area(size_key: str) -> Formula:
    """Image pasted onto a new canvas: uncovered canvas share (1 - size^2) * 100"""
    return lambda params: _clamp((1.0 - float(params[size_key]) ** 2) * 100.0)


def product(*keys: str) -> Formula:
    """Product of fraction params * 100 (e.g. stripe coverage times opacity)"""
    def formula(params):
        value = 1.0
        for key in keys:
            value *= float(params[key])
        return _clamp(value * 100.0)
    return formula
