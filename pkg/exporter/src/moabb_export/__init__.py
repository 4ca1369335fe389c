"""Export MOABB motor-imagery benchmarks to EEGB v1 directories."""

from .datasets import (
    DESCRIPTORS,
    DatasetDescriptor,
    DownloadError,
    ExportError,
    ExportSpec,
    UnsupportedDataset,
    export,
)
from .eegb import ExportFormatError, SessionData, write_session

__version__ = "0.1.0"

__all__ = [
    "DESCRIPTORS",
    "DatasetDescriptor",
    "DownloadError",
    "ExportError",
    "ExportFormatError",
    "ExportSpec",
    "SessionData",
    "UnsupportedDataset",
    "export",
    "write_session",
    "__version__",
]
