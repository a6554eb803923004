"""Three-tier hierarchical reasoning: prompt building, LLM dispatch, parsing,
and a deterministic rule-based fallback scorer."""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

from .dedup import TimelineEntry
from .errors import ParseFailure, RemoteError, RemoteTimeout, RemoteTransport
from .model import (
    PRODUCED_BY_LLM,
    PRODUCED_BY_RULE,
    PipelineConfig,
    ThreatReport,
    verdict_for_score,
)

log = logging.getLogger(__name__)

TIER1 = "Relational Scene Decomposition"
TIER2 = "Contextual Semantic Parsing"
TIER3 = "Temporal Narrative Synthesis"
TIER_HEADERS = (TIER1, TIER2, TIER3)
SCORE_SENTINEL = "THREAT_SCORE:"

LLM_ENDPOINT_ENV = "E2T_LLM_ENDPOINT"
LLM_TOKEN_ENV = "E2T_LLM_TOKEN"
LLM_TIMEOUT_S = 30.0

_SYSTEM_TEMPLATE = (
    "You are a security analyst monitoring a live event timeline. "
    "Reason step by step through three sections, each under its exact header: "
    f"'{TIER1}' (identify entities, their interactions, and locations), "
    f"'{TIER2}' (judge each behavior in its situational context), "
    f"'{TIER3}' (synthesize a chronological narrative of escalation and causality). "
    f"Finish with a final line '{SCORE_SENTINEL} <0.00-1.00>'."
)

NO_HISTORY_MARKER = "no prior events"


def _hms(ts: float) -> str:
    s = int(ts)
    return f"{s // 3600:02d}:{(s % 3600) // 60:02d}:{s % 60:02d}"


@dataclass(frozen=True)
class CotPrompt:
    system_instructions: str
    timeline_block: str
    current_event_block: str
    required_sections: tuple[str, ...] = TIER_HEADERS

    def user_message(self) -> str:
        return (
            "Event timeline so far:\n"
            f"{self.timeline_block}\n\n"
            "Current event:\n"
            f"{self.current_event_block}\n\n"
            "Respond with the sections "
            f"{', '.join(self.required_sections)} and the final score line."
        )


@dataclass
class ThreatLexicon:
    action_scores: dict[str, float] = field(default_factory=dict)
    context_modifiers: dict[tuple[str, str], float] = field(default_factory=dict)
    escalation_bonus: float = 0.1

    def __post_init__(self):
        for action, score in self.action_scores.items():
            if not (0.0 <= score <= 1.0):
                raise ValueError(f"base score for {action!r} outside [0,1]")
        for key, mult in self.context_modifiers.items():
            if not (mult >= 0.0 and mult == mult and mult != float("inf")):
                raise ValueError(f"modifier for {key!r} must be finite and >= 0")
        if self.escalation_bonus < 0:
            raise ValueError("escalation_bonus must be >= 0")

    def score_pair(self, action: str, place: str) -> float:
        base = self.action_scores.get(action)
        if base is None:
            log.debug("UNKNOWN_ACTION %r scored 0", action)
            return 0.0
        mult = self.context_modifiers.get((action, place), 1.0)
        return min(max(base * mult, 0.0), 1.0)


def load_lexicon(path: str) -> ThreatLexicon:
    """Parse the tab-separated lexicon file format ('#' starts a comment)."""
    actions: dict[str, float] = {}
    modifiers: dict[tuple[str, str], float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split("\t")
            if parts[0] == "action" and len(parts) == 3:
                actions[parts[1]] = float(parts[2])
            elif parts[0] == "modifier" and len(parts) == 4:
                modifiers[(parts[1], parts[2])] = float(parts[3])
            else:
                raise ValueError(f"bad lexicon line {lineno}: {line!r}")
    return ThreatLexicon(action_scores=actions, context_modifiers=modifiers)


def default_lexicon() -> ThreatLexicon:
    ref = resources.files("e2t.data") / "default_lexicon.tsv"
    with resources.as_file(ref) as path:
        return load_lexicon(str(path))


def build_prompt(
    entries: Sequence[TimelineEntry],
    current_description: str,
    current_timestamp: float,
    system_instructions: str = _SYSTEM_TEMPLATE,
) -> CotPrompt:
    """Deterministic prompt over the chronological timeline and current event."""
    if entries:
        lines = [f'["{_hms(e.first_seen)}"] {e.description}' for e in entries]
        block = "\n".join(lines)
    else:
        block = NO_HISTORY_MARKER
    current = f'["{_hms(current_timestamp)}"] {current_description}'
    return CotPrompt(
        system_instructions=system_instructions,
        timeline_block=block,
        current_event_block=current,
    )


def parse_llm_response(text: str) -> tuple[tuple[str, str, str], float]:
    """Split a response on the three tier headers (case-insensitive, in
    order) and pull the final THREAT_SCORE decimal, clamped to [0,1]."""
    lowered = text.lower()
    positions = []
    cursor = 0
    for header in TIER_HEADERS:
        idx = lowered.find(header.lower(), cursor)
        if idx < 0:
            raise ParseFailure(f"missing or out-of-order header {header!r}")
        positions.append(idx)
        cursor = idx + len(header)
    matches = re.findall(rf"{SCORE_SENTINEL}\s*([-+]?[0-9]*\.?[0-9]+)", text)
    if not matches:
        raise ParseFailure("no THREAT_SCORE line")
    score = min(max(float(matches[-1]), 0.0), 1.0)
    bounds = positions + [len(text)]
    sections = []
    for i, header in enumerate(TIER_HEADERS):
        body = text[bounds[i] + len(header): bounds[i + 1]]
        body = body.split(SCORE_SENTINEL)[0].strip(" :\n\t-")
        sections.append(body)
    return (sections[0], sections[1], sections[2]), score


def render_cot_response(report: ThreatReport) -> str:
    """Inverse of parse_llm_response for well-formed reports."""
    return (
        f"{TIER1}:\n{report.tier1_scene}\n\n"
        f"{TIER2}:\n{report.tier2_semantics}\n\n"
        f"{TIER3}:\n{report.tier3_narrative}\n\n"
        f"{SCORE_SENTINEL} {report.threat_score:.2f}\n"
    )


def _entry_pairs(entry: TimelineEntry, lexicon: ThreatLexicon) -> list[tuple[str, str]]:
    """Action/place pairs for scoring: tuples when present, otherwise a
    word-level scan of the representative description against the lexicon."""
    if entry.tuples:
        return [(t.interaction, t.place) for t in entry.tuples]
    desc = " " + entry.description.lower() + " "
    pairs = []
    places = {p for (_, p) in lexicon.context_modifiers}
    for action in lexicon.action_scores:
        if f" {action} " in desc:
            place = next((p for p in sorted(places) if p in desc), "")
            pairs.append((action, place))
    return pairs


def _cluster_score(entry: TimelineEntry, lexicon: ThreatLexicon) -> float:
    pairs = _entry_pairs(entry, lexicon)
    if not pairs:
        return 0.0
    return max(lexicon.score_pair(a, p) for a, p in pairs)


def assess_rule_based(
    entries: Sequence[TimelineEntry],
    lexicon: ThreatLexicon,
    *,
    window_start: float = 0.0,
    window_end: float = 0.0,
    config: Optional[PipelineConfig] = None,
) -> ThreatReport:
    """Deterministic lexicon scorer over the clusters active in the window.

    Per cluster: score = clamp(base x context multiplier).  The report score
    is the maximum cluster score plus an escalation bonus per additional
    distinct cluster scoring above 0.5, clamped to [0,1].
    """
    config = config or PipelineConfig()
    active = [e for e in entries if e.last_updated >= window_start]
    scores = [( _cluster_score(e, lexicon), e) for e in active]
    if scores:
        top = max(s for s, _ in scores)
        hot = sum(1 for s, _ in scores if s > 0.5)
        total = min(top + lexicon.escalation_bonus * max(hot - 1, 0), 1.0)
    else:
        total = 0.0

    if entries:
        tier1_lines = [
            f"At {_hms(e.first_seen)}: {e.description}" for e in entries
        ]
        tier1 = "Observed entities and interactions. " + " | ".join(tier1_lines)
    else:
        tier1 = f"Observed entities and interactions. {NO_HISTORY_MARKER}."
    if scores:
        judged = [
            f"'{e.description}' assessed at {s:.2f} in context"
            for s, e in scores
        ]
        tier2 = "Contextual judgment of active behaviors: " + "; ".join(judged) + "."
    else:
        tier2 = "Contextual judgment: no active behaviors in this window."
    if entries:
        narrative = " then ".join(e.description for e in entries)
        escal = sum(1 for s, _ in scores if s > 0.5)
        tier3 = (
            f"Chronologically, {narrative}. "
            f"{escal} distinct threat-level behavior(s) active in this window."
        )
    else:
        tier3 = "No events to narrate."

    return ThreatReport(
        window_start=window_start,
        window_end=window_end,
        tier1_scene=tier1,
        tier2_semantics=tier2,
        tier3_narrative=tier3,
        threat_score=total,
        verdict=verdict_for_score(total, config.verdict_low, config.verdict_high),
        supporting_event_ids=tuple(e.representative_event_id for e in active),
        produced_by=PRODUCED_BY_RULE,
    )


def assess_with_llm(
    prompt: CotPrompt,
    *,
    endpoint: str,
    model: str = "default",
    token: Optional[str] = None,
    timeout: float = LLM_TIMEOUT_S,
    window_start: float = 0.0,
    window_end: float = 0.0,
    supporting_event_ids: Sequence[int] = (),
    config: Optional[PipelineConfig] = None,
) -> ThreatReport:
    """Dispatch the prompt to a chat-completions endpoint and parse the reply.

    Raises RemoteTimeout / RemoteTransport / ParseFailure; the pipeline
    falls back to assess_rule_based when fallback is enabled.
    """
    import httpx

    config = config or PipelineConfig()
    token = token or os.environ.get(LLM_TOKEN_ENV)
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    body = {
        "model": model,
        "messages": [
            {"role": "system", "content": prompt.system_instructions},
            {"role": "user", "content": prompt.user_message()},
        ],
        "temperature": 0,
    }
    try:
        resp = httpx.post(
            endpoint.rstrip("/") + "/v1/chat/completions",
            json=body,
            headers=headers,
            timeout=timeout,
        )
        resp.raise_for_status()
        content = resp.json()["choices"][0]["message"]["content"]
    except httpx.TimeoutException as exc:
        raise RemoteTimeout(str(exc)) from exc
    except Exception as exc:
        raise RemoteTransport(str(exc)) from exc
    (tier1, tier2, tier3), score = parse_llm_response(content)
    return ThreatReport(
        window_start=window_start,
        window_end=window_end,
        tier1_scene=tier1,
        tier2_semantics=tier2,
        tier3_narrative=tier3,
        threat_score=score,
        verdict=verdict_for_score(score, config.verdict_low, config.verdict_high),
        supporting_event_ids=tuple(supporting_event_ids),
        produced_by=PRODUCED_BY_LLM,
    )


def assess(
    entries: Sequence[TimelineEntry],
    current_description: str,
    lexicon: ThreatLexicon,
    config: PipelineConfig,
    *,
    window_start: float,
    window_end: float,
) -> ThreatReport:
    """Route an assessment to the LLM path or the rule fallback."""
    endpoint = config.llm_endpoint or os.environ.get(LLM_ENDPOINT_ENV)
    if endpoint:
        prompt = build_prompt(entries, current_description, window_end)
        active_ids = tuple(
            e.representative_event_id for e in entries if e.last_updated >= window_start
        )
        try:
            return assess_with_llm(
                prompt,
                endpoint=endpoint,
                model=config.llm_model,
                window_start=window_start,
                window_end=window_end,
                supporting_event_ids=active_ids,
                config=config,
            )
        except RemoteError as exc:
            if not config.fallback_enabled:
                raise
            log.warning("LLM assessment failed (%s); using rule fallback", exc.code)
    return assess_rule_based(
        entries,
        lexicon,
        window_start=window_start,
        window_end=window_end,
        config=config,
    )
