"""Python access to the srrn metrics, dataset records and command-line tool.

Images are float arrays of shape (H, W, 3) with values in [0, 1]; label maps
are uint8 arrays of shape (H, W) where 255 marks unscored pixels.
"""

import json as _json

from ._srrn import (
    CLASS_COUNT,
    IGNORE_LABEL,
    SrrnError,
    blend,
    canny,
    confidence_interval,
    load_record,
    miou,
    parse_alpha_grid,
    psnr,
    run_cli,
    soft_edges,
    spearman,
    ssim,
    validate_manifest,
)
from ._srrn import manifest_json as _manifest_json

__all__ = [
    "CLASS_COUNT",
    "IGNORE_LABEL",
    "SrrnError",
    "blend",
    "canny",
    "confidence_interval",
    "load_manifest",
    "load_record",
    "miou",
    "parse_alpha_grid",
    "psnr",
    "run_cli",
    "soft_edges",
    "spearman",
    "ssim",
    "validate_manifest",
]


def load_manifest(path):
    """Parsed manifest as a dict (after the library's own schema checks)."""
    return _json.loads(_manifest_json(str(path)))
