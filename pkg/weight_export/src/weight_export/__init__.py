from .export import (
    EXPECTED_CHANNELS,
    TORCHVISION_LAYER_MAP,
    ExportError,
    ExportManifest,
    export,
    write_nstw,
)

__all__ = [
    "EXPECTED_CHANNELS",
    "TORCHVISION_LAYER_MAP",
    "ExportError",
    "ExportManifest",
    "export",
    "write_nstw",
]
