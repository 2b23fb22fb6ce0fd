"""detector_adapter: external-process model adapter for the detection protocol."""

from .backends import MODEL_KINDS, ModelLoadError
from .serve import AdapterConfig, serve

__all__ = ["AdapterConfig", "serve", "MODEL_KINDS", "ModelLoadError"]

__version__ = "0.1.0"
