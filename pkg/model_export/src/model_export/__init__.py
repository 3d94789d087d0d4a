"""model_export: convert image classifiers to portable graph modules
whose forward returns named activation taps, with numerical parity
checks against the source framework."""

__version__ = "0.1.0"

from .registry import MODEL_REGISTRY, ExportRequest, resolve_tap_node
from .export import export_model, verify_export

__all__ = [
    "MODEL_REGISTRY",
    "ExportRequest",
    "resolve_tap_node",
    "export_model",
    "verify_export",
]
