"""Vision-side preprocessing for multimodal language models.

The package covers the whole path from raw pixels to a budgeted token
sequence: any-resolution patch tokenization with 2-D rotary positions,
difference-based pruning of redundant video tokens, timestamped sequence
serialization, and a deterministic image-curation filter chain.  No trained
weights are involved anywhere; every stage is exactly testable.
"""

from .config import Config
from .curation import (
    CurationSample,
    InstructionRecord,
    OCR_TASKS,
    TextBox,
    cluster_select,
    compose_ocr_caption,
    filter_aspect_ratio,
    filter_by_score,
    generate_ocr_instructions,
    parse_ocr_caption,
    reading_order,
)
from .errors import (
    BudgetExceededError,
    ConfigError,
    ContractViolationError,
    DimensionMismatchError,
    SequenceFormatError,
    UnsatisfiableBudgetError,
    VidtokError,
)
from .geometry import (
    ASPECT_TOLERANCE,
    ImageBuffer,
    PatchGrid,
    Resolution,
    TokenBudget,
    bilinear_resize,
    patchify,
    smart_resize,
    unpatchify,
)
from .ingest import (
    read_frame_dir,
    read_image,
    write_frame_dir,
    write_image,
)
from .pipeline import (
    ENCODERS,
    SamplingPolicy,
    TextToken,
    TokenSequence,
    downsample_tokens,
    enforce_budget,
    identity_encoder,
    make_encoder,
    random_projection_encoder,
    sample_timestamps,
    tokenize_video,
    uniform_indices,
)
from .pruning import (
    CompressionStats,
    FrameSequence,
    PruneConfig,
    PruneMask,
    VisionToken,
    apply_mask,
    compression_stats,
    compute_prune_mask,
    patch_distance,
)
from .rope2d import (
    PositionIndex,
    RopeConfig,
    position_indices,
    relative_inner_product_check,
    rope_rotate,
)
from .seqformat import (
    Answer,
    FrameTokens,
    ImageTokens,
    RenderedSequence,
    Text,
    format_time_interval,
    parse_image_sequence,
    parse_streaming_sequence,
    parse_time_interval,
    parse_video_sequence,
    render_image_sequence,
    render_streaming_sequence,
    render_video_sequence,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Config",
    # errors
    "VidtokError",
    "DimensionMismatchError",
    "ConfigError",
    "SequenceFormatError",
    "ContractViolationError",
    "BudgetExceededError",
    "UnsatisfiableBudgetError",
    # geometry
    "ASPECT_TOLERANCE",
    "Resolution",
    "ImageBuffer",
    "PatchGrid",
    "TokenBudget",
    "smart_resize",
    "patchify",
    "unpatchify",
    "bilinear_resize",
    # rope2d
    "PositionIndex",
    "RopeConfig",
    "position_indices",
    "rope_rotate",
    "relative_inner_product_check",
    # pruning
    "FrameSequence",
    "PruneConfig",
    "PruneMask",
    "VisionToken",
    "CompressionStats",
    "patch_distance",
    "compute_prune_mask",
    "apply_mask",
    "compression_stats",
    # pipeline
    "SamplingPolicy",
    "TextToken",
    "TokenSequence",
    "sample_timestamps",
    "uniform_indices",
    "downsample_tokens",
    "identity_encoder",
    "random_projection_encoder",
    "make_encoder",
    "ENCODERS",
    "tokenize_video",
    "enforce_budget",
    # ingest
    "read_image",
    "write_image",
    "read_frame_dir",
    "write_frame_dir",
    # seqformat
    "ImageTokens",
    "FrameTokens",
    "Text",
    "Answer",
    "RenderedSequence",
    "render_image_sequence",
    "parse_image_sequence",
    "render_video_sequence",
    "parse_video_sequence",
    "render_streaming_sequence",
    "parse_streaming_sequence",
    "format_time_interval",
    "parse_time_interval",
    # curation
    "TextBox",
    "CurationSample",
    "filter_aspect_ratio",
    "filter_by_score",
    "cluster_select",
    "reading_order",
    "compose_ocr_caption",
    "parse_ocr_caption",
    "OCR_TASKS",
    "InstructionRecord",
    "generate_ocr_instructions",
]
