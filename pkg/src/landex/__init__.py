"""Landmark-anchored field extraction from semi-structured documents.

Training jointly clusters annotated documents by structural blueprint,
picks one landmark phrase per cluster, synthesizes a region program
(hop-based for HTML trees, visual-motion-based for OCR box layouts)
plus a value program, and fingerprints the training regions. Extraction
re-locates the landmark on unseen documents, gates each proposed region
against the trained blueprint, and abstains rather than guess when the
layout has drifted.
"""

from .config import Config, load_config
from .docmodel import (
    Annotation,
    BoxDocument,
    DocumentError,
    TreeDocument,
    load_annotations,
    load_document,
)
from .evaluate import EvalReport, evaluate, evaluate_field, load_records
from .runtime import (
    ExtractionProgram,
    extract,
    load_bundle,
    save_bundle,
    train_program,
)
from .value_extract import SynthesisError

__all__ = [
    "Annotation",
    "BoxDocument",
    "Config",
    "DocumentError",
    "EvalReport",
    "ExtractionProgram",
    "SynthesisError",
    "TreeDocument",
    "evaluate",
    "evaluate_field",
    "extract",
    "load_annotations",
    "load_bundle",
    "load_config",
    "load_document",
    "load_records",
    "save_bundle",
    "train_program",
]
