"""Core domain types: frame tuples, event records, reports, pipeline config."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import (
    RejectBadDim,
    RejectBadNorm,
    RejectEmptyDescription,
    RejectTimeRegression,
)

NORM_TOL = 1e-6
RENORM_TOL = 1e-3
TIME_SLACK = 1e-6

VERDICT_NORMAL = "NORMAL"
VERDICT_SUSPICIOUS = "SUSPICIOUS"
VERDICT_THREAT = "THREAT"

PRODUCED_BY_LLM = "LLM"
PRODUCED_BY_RULE = "RULE_FALLBACK"

FPS_PRESETS = (1.875, 1.5, 1.25, 1.318)


@dataclass(frozen=True)
class HoipTuple:
    """One human-object-interaction-place tuple extracted from a frame."""

    human: str
    interaction: str
    place: str
    object: Optional[str] = None
    confidence: float = 1.0

    def __post_init__(self):
        if not self.human:
            raise ValueError("human label must be non-empty")
        if not self.interaction:
            raise ValueError("interaction label must be non-empty")
        if not self.place:
            raise ValueError("place label must be non-empty")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0,1]")


@dataclass(frozen=True)
class EventRecord:
    """A timestamped textual event with its unit-norm embedding."""

    id: int
    timestamp: float
    frame_id: int
    description: str
    embedding: np.ndarray
    tuples: tuple[HoipTuple, ...] = ()

    def __post_init__(self):
        emb = np.asarray(self.embedding, dtype=np.float32)
        emb.setflags(write=False)
        object.__setattr__(self, "embedding", emb)


@dataclass(frozen=True)
class ThreatReport:
    window_start: float
    window_end: float
    tier1_scene: str
    tier2_semantics: str
    tier3_narrative: str
    threat_score: float
    verdict: str
    supporting_event_ids: tuple[int, ...]
    produced_by: str

    def to_dict(self) -> dict:
        return {
            "window_start": self.window_start,
            "window_end": self.window_end,
            "threat_score": self.threat_score,
            "verdict": self.verdict,
            "tier1_scene": self.tier1_scene,
            "tier2_semantics": self.tier2_semantics,
            "tier3_narrative": self.tier3_narrative,
            "supporting_event_ids": list(self.supporting_event_ids),
            "produced_by": self.produced_by,
        }


def verdict_for_score(score: float, low: float = 0.3, high: float = 0.7) -> str:
    """Map a threat score to a verdict band.  Boundary values are SUSPICIOUS."""
    if score < low:
        return VERDICT_NORMAL
    if score > high:
        return VERDICT_THREAT
    return VERDICT_SUSPICIOUS


@dataclass(frozen=True)
class PipelineConfig:
    dim: int = 384
    tau_sim: float = 0.90
    target_fps: float = 1.25
    reasoning_interval: float = 5.0
    llm_endpoint: Optional[str] = None
    llm_model: str = "default"
    fallback_enabled: bool = True
    dedup_enabled: bool = True
    verdict_low: float = 0.3
    verdict_high: float = 0.7
    action_vocab: Optional[frozenset[str]] = None
    place_vocab: Optional[frozenset[str]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not (0.0 < self.tau_sim < 1.0):
            raise ValueError("tau_sim must lie in (0,1)")
        if self.target_fps <= 0:
            raise ValueError("target_fps must be positive")
        if self.reasoning_interval <= 0:
            raise ValueError("reasoning_interval must be positive")


def validate_record(
    id: int,
    timestamp: float,
    frame_id: int,
    description: str,
    embedding: Sequence[float] | np.ndarray,
    tuples: Sequence[HoipTuple] = (),
    *,
    dim: int,
    prev_timestamp: Optional[float] = None,
) -> EventRecord:
    """Check and normalize inbound record fields into an EventRecord.

    The embedding is renormalized when its norm is within 1e-3 of unit;
    anything further off is rejected.  Timestamps may regress by at most
    1e-6 relative to ``prev_timestamp``.  Idempotent on valid records.
    """
    if not description:
        raise RejectEmptyDescription("empty description")
    emb = np.asarray(embedding, dtype=np.float32)
    if emb.ndim != 1 or emb.shape[0] != dim:
        raise RejectBadDim(f"embedding length {emb.shape} != {dim}")
    if timestamp < 0:
        raise RejectTimeRegression(f"negative timestamp {timestamp}")
    if prev_timestamp is not None and timestamp < prev_timestamp - TIME_SLACK:
        raise RejectTimeRegression(
            f"timestamp {timestamp} regresses below {prev_timestamp}"
        )
    norm = float(np.linalg.norm(emb.astype(np.float64)))
    if abs(norm - 1.0) > NORM_TOL:
        if abs(norm - 1.0) > RENORM_TOL:
            raise RejectBadNorm(f"embedding norm {norm} too far from unit")
        emb = (emb.astype(np.float64) / norm).astype(np.float32)
    return EventRecord(
        id=id,
        timestamp=float(timestamp),
        frame_id=int(frame_id),
        description=description,
        embedding=emb,
        tuples=tuple(tuples),
    )
