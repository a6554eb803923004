"""Real-time event-stream threat monitoring.

Converts structured frame-level event tuples into text, deduplicates them
online into a representative-event knowledge base, and reasons over the
deduplicated timeline to emit interpretable threat reports.
"""

from .model import (
    EventRecord,
    HoipTuple,
    PipelineConfig,
    ThreatReport,
    validate_record,
)
from .embedding import cosine_sim, embed
from .textualize import render_description
from .dedup import KnowledgeBase, classify_event, ingest_event, timeline
from .reasoning import ThreatLexicon, assess_rule_based, build_prompt, parse_llm_response
from .ingest import FrameMessage, Pipeline, decode_message, fps_sample, run_pipeline
from .persist import append_log, replay_log, snapshot_load, snapshot_save
from .eval import compute_ap, compute_auc, generate_synthetic_stream, run_ablation

__version__ = "0.1.0"

__all__ = [
    "EventRecord",
    "HoipTuple",
    "PipelineConfig",
    "ThreatReport",
    "validate_record",
    "cosine_sim",
    "embed",
    "render_description",
    "KnowledgeBase",
    "classify_event",
    "ingest_event",
    "timeline",
    "ThreatLexicon",
    "assess_rule_based",
    "build_prompt",
    "parse_llm_response",
    "FrameMessage",
    "Pipeline",
    "decode_message",
    "fps_sample",
    "run_pipeline",
    "append_log",
    "replay_log",
    "snapshot_load",
    "snapshot_save",
    "compute_auc",
    "compute_ap",
    "generate_synthetic_stream",
    "run_ablation",
    "__version__",
]
