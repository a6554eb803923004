"""Evaluation harness: AUC/AP metrics, synthetic labeled streams, ablations."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import DegenerateLabels
from .ingest import FrameMessage, Pipeline
from .model import HoipTuple, PipelineConfig, ThreatReport
from .reasoning import ThreatLexicon
from .textualize import render_description

NORMAL_TEMPLATES = [
    ("man", None, "walking", "park"),
    ("woman", None, "sitting", "plaza"),
    ("man", "phone", "talking", "street"),
    ("woman", "book", "reading", "library"),
    ("man", "cart", "shopping", "store"),
    ("woman", None, "waiting", "station"),
    ("man", "bicycle", "cycling", "street"),
    ("woman", None, "standing", "plaza"),
]

THREAT_TEMPLATES = [
    ("man", None, "punching", "park"),
    ("man", "knife", "brandishing", "street"),
    ("woman", None, "fighting", "plaza"),
    ("man", "bag", "robbing", "store"),
]


def compute_auc(pairs: Sequence[tuple[float, int]]) -> float:
    """Mann-Whitney AUC: probability a random positive outranks a random
    negative, ties counted 0.5."""
    pos = [s for s, y in pairs if y == 1]
    neg = [s for s, y in pairs if y != 1]
    if not pos or not neg:
        raise DegenerateLabels("need at least one positive and one negative")
    # rank-sum formulation: O(n log n) with average ranks for ties
    ordered = sorted(pairs, key=lambda p: p[0])
    ranks: dict[int, float] = {}
    i = 0
    rank_sum_pos = 0.0
    while i < len(ordered):
        j = i
        while j < len(ordered) and ordered[j][0] == ordered[i][0]:
            j += 1
        avg_rank = (i + 1 + j) / 2.0  # 1-based average rank of the tie block
        for k in range(i, j):
            if ordered[k][1] == 1:
                rank_sum_pos += avg_rank
        i = j
    p, n = len(pos), len(neg)
    return (rank_sum_pos - p * (p + 1) / 2.0) / (p * n)


def compute_ap(pairs: Sequence[tuple[float, int]]) -> float:
    """Average precision in descending-score order; ties keep input order."""
    if not any(y == 1 for _, y in pairs):
        raise DegenerateLabels("need at least one positive")
    order = sorted(range(len(pairs)), key=lambda i: -pairs[i][0])
    hits = 0
    total = 0.0
    for rank, idx in enumerate(order, start=1):
        if pairs[idx][1] == 1:
            hits += 1
            total += hits / rank
    return total / hits


@dataclass
class StreamSpec:
    n_events: int = 100
    duplicate_rate: float = 0.0
    threat_fraction: float = 0.25
    frame_interval: float = 1.0
    seed: int = 0
    threat_phase: bool = True  # threats arrive as a contiguous final phase


def generate_synthetic_stream(spec: StreamSpec) -> list[FrameMessage]:
    """Deterministic labeled stream of tuple-bearing frame messages.

    Fresh events instantiate a template with a unique actor index, so with
    duplicate_rate 0 every description is distinct; duplicates are verbatim
    copies of earlier messages.  With threat_phase, all threat events form
    the tail of the stream, making rule-based scores separable by label.
    """
    rng = random.Random(spec.seed)
    n_threat = round(spec.n_events * spec.threat_fraction)
    n_normal = spec.n_events - n_threat
    phases = [0] * n_normal + [1] * n_threat
    if not spec.threat_phase:
        rng.shuffle(phases)
    messages: list[FrameMessage] = []
    fresh_serial = 0
    for i, is_threat in enumerate(phases):
        ts = i * spec.frame_interval
        if messages and rng.random() < spec.duplicate_rate:
            # verbatim duplicate of an earlier same-phase message when possible
            same = [m for m in messages if (m.label or 0) == is_threat]
            src = rng.choice(same) if same else rng.choice(messages)
            messages.append(
                FrameMessage(
                    ts=ts,
                    frame_id=i,
                    desc=src.desc,
                    hoip=src.hoip,
                    label=src.label,
                )
            )
            continue
        pool = THREAT_TEMPLATES if is_threat else NORMAL_TEMPLATES
        human, obj, action, place = pool[rng.randrange(len(pool))]
        tup = HoipTuple(
            human=f"{human} {fresh_serial}",
            object=obj,
            interaction=action,
            place=place,
            confidence=0.9,
        )
        fresh_serial += 1
        messages.append(
            FrameMessage(
                ts=ts,
                frame_id=i,
                desc=render_description([tup]),
                hoip=[tup],
                label=is_threat,
            )
        )
    return messages


@dataclass
class EvalResult:
    auc: Optional[float]
    ap: Optional[float]
    reports: list[ThreatReport]
    window_pairs: list[tuple[float, int]]
    pipeline: Pipeline
    elapsed_s: float


def evaluate_stream(
    messages: Sequence[FrameMessage],
    config: PipelineConfig,
    lexicon: Optional[ThreatLexicon] = None,
) -> EvalResult:
    """Run the pipeline and score report windows against message labels.

    A report window is positive iff at least one kept message inside
    [window_start, window_end] carries label 1."""
    pipe = Pipeline(config, lexicon=lexicon)
    reports: list[ThreatReport] = []
    kept: list[tuple[float, int]] = []
    start = time.perf_counter()
    for msg in messages:
        before = pipe.stats.kept
        reports.extend(pipe.process_message(msg))
        if pipe.stats.kept > before:
            kept.append((msg.ts, msg.label or 0))
    reports.extend(pipe.finish())
    elapsed = time.perf_counter() - start
    pairs = [
        (
            r.threat_score,
            1 if any(l for t, l in kept if r.window_start <= t <= r.window_end) else 0,
        )
        for r in reports
    ]
    try:
        auc = compute_auc(pairs)
        ap = compute_ap(pairs)
    except DegenerateLabels:
        auc = ap = None
    return EvalResult(
        auc=auc,
        ap=ap,
        reports=reports,
        window_pairs=pairs,
        pipeline=pipe,
        elapsed_s=elapsed,
    )


def run_ablation(
    messages: Sequence[FrameMessage],
    config: PipelineConfig,
    lexicon: Optional[ThreatLexicon] = None,
    fps_presets: Sequence[float] = (1.875, 1.5, 1.25),
) -> list[dict]:
    """Pipeline matrix: dedup on/off x FPS presets; one result row each."""
    import dataclasses

    rows = []
    for dedup_on in (True, False):
        for fps in fps_presets:
            cfg = dataclasses.replace(
                config, dedup_enabled=dedup_on, target_fps=fps
            )
            res = evaluate_stream(messages, cfg, lexicon=lexicon)
            n_events = res.pipeline.stats.kept
            rows.append(
                {
                    "config": f"dedup={'on' if dedup_on else 'off'},fps={fps}",
                    "kept_frames": n_events,
                    "clusters": len(res.pipeline.kb),
                    "auc": res.auc,
                    "ap": res.ap,
                    "events_per_second": (
                        n_events / res.elapsed_s if res.elapsed_s > 0 else float("inf")
                    ),
                }
            )
    return rows


def format_ablation_table(rows: Sequence[dict], sep: str = "\t") -> str:
    """Delimited text table, one row per configuration."""
    cols = ["config", "kept_frames", "clusters", "auc", "ap", "events_per_second"]
    out = [sep.join(cols)]
    for row in rows:
        cells = []
        for c in cols:
            v = row[c]
            if v is None:
                cells.append("n/a")
            elif isinstance(v, float):
                cells.append(f"{v:.4f}")
            else:
                cells.append(str(v))
        out.append(sep.join(cells))
    return "\n".join(out) + "\n"
