"""Export scripts that translate model backends into mudikit's file formats."""

from .backends import Detector, Embedder, MockDetector, MockEmbedder, MockSegmenter, Segmenter
from .errors import AdapterError
from .export import ExportSummary, export_detections, export_embeddings, export_segmentations
from .manifest import AdapterManifest, load_manifest, save_manifest

__version__ = "0.1.0"

__all__ = [
    "AdapterError",
    "AdapterManifest",
    "Detector",
    "Embedder",
    "ExportSummary",
    "MockDetector",
    "MockEmbedder",
    "MockSegmenter",
    "Segmenter",
    "export_detections",
    "export_embeddings",
    "export_segmentations",
    "load_manifest",
    "save_manifest",
]
