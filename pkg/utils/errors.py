"""Exception hierarchy shared by the library, CLI and HTTP surface"""


class AugmentationError(Exception):
    """Base class for every error raised by the toolkit"""

    # CLI exit code and HTTP status used when the error escapes to an entry point
    exit_code = 1
    http_status = 422


class CatalogError(AugmentationError):
    """Unknown transform name or a transform used with the wrong modality"""
    http_status = 404


class ParamValidationError(AugmentationError):
    """Params, probability or random descriptor failed validation"""


class TransformError(AugmentationError):
    """Data-dependent failure inside a transform (e.g. audio shorter than one window)"""


class AssetError(AugmentationError):
    """Asset manifest invalid or asset missing"""
    http_status = 404


class MediaIOError(AugmentationError):
    """Unreadable or unwritable media, bad clip directory, transcoder failure"""
    exit_code = 2
    http_status = 400


class AdapterError(AugmentationError):
    """Classifier adapter missing, crashed, timed out or produced malformed output"""
    exit_code = 3
    http_status = 502
