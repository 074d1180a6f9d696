"""gazealign: synchronize gaze and UI-transform streams, reconstruct
content-relative gaze, and analyze it.

The package splits into:

* geometry - coordinate frames, pivot transforms, reconstruction
* sync - tolerance-based stream merging (batch and streaming)
* io - session directory layout, JSONL/CSV formats
* service - local HTTP ingest server
* analysis - heatmaps, traces, replay, guided-task error
* render - deterministic PNG export
* simulate - synthetic sessions with ground truth and fault injection
* cli - command-line front end
"""

from .geometry import (
    DegenerateScaleError,
    GeometryError,
    HomPoint,
    InvalidSampleError,
    Mat3,
    SingularTransformError,
    TransformState,
    ViewportGeometry,
    compose_transform,
    forward_project,
    invert_transform,
    off_image,
    off_screen,
    reconstruct,
)
from .sync import (
    CalibrationEvent,
    CombinedRecord,
    DiscardedSample,
    GazeSample,
    QualityReport,
    SessionBuffer,
    SyncConfig,
    merge_offline,
    quality,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationEvent",
    "CombinedRecord",
    "DegenerateScaleError",
    "DiscardedSample",
    "GazeSample",
    "GeometryError",
    "HomPoint",
    "InvalidSampleError",
    "Mat3",
    "QualityReport",
    "SessionBuffer",
    "SingularTransformError",
    "SyncConfig",
    "TransformState",
    "ViewportGeometry",
    "compose_transform",
    "forward_project",
    "invert_transform",
    "merge_offline",
    "off_image",
    "off_screen",
    "quality",
    "reconstruct",
    "__version__",
]
