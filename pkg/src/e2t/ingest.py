"""Stream ingestion: wire decoding, FPS sampling, and pipeline orchestration.

Wire format: newline-delimited UTF-8 JSON records with fields ts (seconds),
frame_id (int), desc (string), hoip (array of tuple objects), label (0/1,
optional; evaluation streams only).  Sources are files, stdin, or a TCP
socket (one record per line).
"""

from __future__ import annotations

import json
import logging
import math
import socket
import threading
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Optional

from . import dedup
from .embedding import embed
from .errors import Malformed, MissingContent, ValidationError
from .model import EventRecord, HoipTuple, PipelineConfig, ThreatReport, validate_record
from .reasoning import ThreatLexicon, assess, default_lexicon
from .textualize import render_description

log = logging.getLogger(__name__)

DEFAULT_PORT = 7480


@dataclass
class FrameMessage:
    ts: float
    frame_id: int
    desc: Optional[str] = None
    hoip: Optional[list[HoipTuple]] = None
    label: Optional[int] = None


@dataclass
class SamplerState:
    """First-frame-per-window FPS throttle."""

    window_len: float
    current_window_index: int = -1
    kept_count: int = 0
    dropped_count: int = 0

    def __post_init__(self):
        if self.window_len <= 0:
            raise ValueError("window_len must be positive")


def sampler_for_fps(target_fps: float) -> SamplerState:
    return SamplerState(window_len=1.0 / target_fps)


def fps_sample(msg: FrameMessage, state: SamplerState) -> bool:
    """Keep the first frame of each time window, drop the rest."""
    window = math.floor(msg.ts / state.window_len)
    if window > state.current_window_index:
        state.current_window_index = window
        state.kept_count += 1
        return True
    state.dropped_count += 1
    return False


def decode_message(line: bytes | str) -> FrameMessage:
    """Parse one wire line into a FrameMessage; unknown fields are ignored."""
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise Malformed(f"bad utf-8: {exc}") from exc
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise Malformed(f"bad json: {exc}") from exc
    if not isinstance(raw, dict):
        raise Malformed("record is not an object")
    try:
        ts = float(raw["ts"])
        frame_id = int(raw["frame_id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise Malformed(f"bad ts/frame_id: {exc}") from exc
    desc = raw.get("desc")
    if desc is not None and not isinstance(desc, str):
        raise Malformed("desc must be a string")
    hoip = None
    if raw.get("hoip") is not None:
        if not isinstance(raw["hoip"], list):
            raise Malformed("hoip must be an array")
        hoip = []
        for item in raw["hoip"]:
            try:
                hoip.append(
                    HoipTuple(
                        human=item["human"],
                        object=item.get("object"),
                        interaction=item["interaction"],
                        place=item["place"],
                        confidence=float(item.get("confidence", 1.0)),
                    )
                )
            except (TypeError, KeyError, ValueError) as exc:
                raise Malformed(f"bad hoip tuple: {exc}") from exc
    if desc is None and hoip is None:
        raise MissingContent("record carries neither desc nor hoip")
    label = raw.get("label")
    if label is not None:
        label = int(label)
    return FrameMessage(ts=ts, frame_id=frame_id, desc=desc, hoip=hoip, label=label)


@dataclass
class PipelineStats:
    decoded: int = 0
    malformed: int = 0
    kept: int = 0
    dropped: int = 0
    rejected: int = 0
    reports: int = 0


class Pipeline:
    """Single-stream embed -> dedup -> reason orchestration.

    Synchronous single-writer loop: each kept message is fully applied to the
    knowledge base before the next is read, so sources naturally block when
    downstream is slow and no kept message is ever dropped.
    """

    def __init__(
        self,
        config: PipelineConfig,
        lexicon: Optional[ThreatLexicon] = None,
        log_sink: Optional[IO[str]] = None,
    ):
        self.config = config
        self.lexicon = lexicon or default_lexicon()
        self.kb = dedup.KnowledgeBase(config)
        self.sampler = sampler_for_fps(config.target_fps)
        self.stats = PipelineStats()
        self.log_sink = log_sink
        self._next_id = 0
        self._prev_ts: Optional[float] = None
        self._last_report_ts: Optional[float] = None
        self._window_start: Optional[float] = None
        self._current_desc = ""

    def process_line(self, line: bytes | str) -> list[ThreatReport]:
        """Decode one wire line; malformed lines are counted and skipped."""
        if isinstance(line, str) and not line.strip():
            return []
        if isinstance(line, bytes) and not line.strip():
            return []
        try:
            msg = decode_message(line)
        except (Malformed, MissingContent) as exc:
            self.stats.malformed += 1
            log.debug("skipping line: %s", exc.code)
            return []
        self.stats.decoded += 1
        return self.process_message(msg)

    def process_message(self, msg: FrameMessage) -> list[ThreatReport]:
        if not fps_sample(msg, self.sampler):
            self.stats.dropped += 1
            return []
        self.stats.kept += 1
        desc = msg.desc if msg.desc is not None else render_description(msg.hoip or [])
        vec = embed(desc, self.config.dim)
        try:
            record = validate_record(
                id=self._next_id,
                timestamp=msg.ts,
                frame_id=msg.frame_id,
                description=desc,
                embedding=vec,
                tuples=msg.hoip or (),
                dim=self.config.dim,
                prev_timestamp=self._prev_ts,
            )
        except ValidationError as exc:
            self.stats.rejected += 1
            log.warning("record rejected: %s", exc.code)
            return []
        self._next_id += 1
        self._prev_ts = record.timestamp
        if self.log_sink is not None:
            self.log_sink.write(encode_record(record) + "\n")
        result = dedup.ingest_event(
            record, self.kb, force_novel=not self.config.dedup_enabled
        )
        self._current_desc = record.description
        if self._window_start is None:
            self._window_start = record.timestamp
        due = (
            self._last_report_ts is not None
            and record.timestamp - self._last_report_ts >= self.config.reasoning_interval
        )
        if result.novel or due:
            return [self._emit(record.timestamp)]
        return []

    def _emit(self, window_end: float) -> ThreatReport:
        report = assess(
            dedup.timeline_entries(self.kb),
            self._current_desc,
            self.lexicon,
            self.config,
            window_start=self._window_start if self._window_start is not None else window_end,
            window_end=window_end,
        )
        self.stats.reports += 1
        self._last_report_ts = window_end
        self._window_start = None
        return report

    def finish(self) -> list[ThreatReport]:
        """Flush a final report covering any events since the last one."""
        if self._window_start is None or self._prev_ts is None:
            return []
        return [self._emit(self._prev_ts)]

    def resume_state(self) -> dict:
        """Orchestration state needed to continue this stream after a
        snapshot restore with byte-identical output."""
        return {
            "next_id": self._next_id,
            "prev_ts": self._prev_ts,
            "last_report_ts": self._last_report_ts,
            "window_start": self._window_start,
            "current_desc": self._current_desc,
            "sampler_window_index": self.sampler.current_window_index,
            "sampler_kept": self.sampler.kept_count,
            "sampler_dropped": self.sampler.dropped_count,
        }

    @classmethod
    def from_snapshot(
        cls,
        config: PipelineConfig,
        kb: "dedup.KnowledgeBase",
        state: dict,
        lexicon: Optional[ThreatLexicon] = None,
        log_sink: Optional[IO[str]] = None,
    ) -> "Pipeline":
        pipe = cls(config, lexicon=lexicon, log_sink=log_sink)
        pipe.kb = kb
        pipe._next_id = state["next_id"]
        pipe._prev_ts = state["prev_ts"]
        pipe._last_report_ts = state["last_report_ts"]
        pipe._window_start = state["window_start"]
        pipe._current_desc = state["current_desc"]
        pipe.sampler.current_window_index = state["sampler_window_index"]
        pipe.sampler.kept_count = state["sampler_kept"]
        pipe.sampler.dropped_count = state["sampler_dropped"]
        return pipe


def run_pipeline(
    lines: Iterable[bytes | str],
    config: PipelineConfig,
    lexicon: Optional[ThreatLexicon] = None,
    log_sink: Optional[IO[str]] = None,
) -> tuple[list[ThreatReport], Pipeline]:
    """Run the full pipeline over a line source; returns reports and state."""
    pipe = Pipeline(config, lexicon=lexicon, log_sink=log_sink)
    reports: list[ThreatReport] = []
    for line in lines:
        reports.extend(pipe.process_line(line))
    reports.extend(pipe.finish())
    return reports, pipe


def encode_record(record: EventRecord) -> str:
    """Serialize a validated EventRecord for the append-only log."""
    return json.dumps(
        {
            "id": record.id,
            "timestamp": record.timestamp,
            "frame_id": record.frame_id,
            "description": record.description,
            "embedding": [float(x) for x in record.embedding],
            "tuples": [
                {
                    "human": t.human,
                    "object": t.object,
                    "interaction": t.interaction,
                    "place": t.place,
                    "confidence": t.confidence,
                }
                for t in record.tuples
            ],
        },
        separators=(",", ":"),
    )


def serve(
    config: PipelineConfig,
    port: int = DEFAULT_PORT,
    host: str = "127.0.0.1",
    max_conns: int = 1,
    lexicon: Optional[ThreatLexicon] = None,
    report_sink: Optional[IO[str]] = None,
    stop_event: Optional[threading.Event] = None,
) -> None:
    """Listen for newline-delimited streams; each connection gets its own
    pipeline and knowledge base.  Reports go to report_sink as JSON lines."""
    import sys

    sink = report_sink or sys.stdout
    sink_lock = threading.Lock()
    sem = threading.Semaphore(max_conns)

    def handle(conn: socket.socket) -> None:
        pipe = Pipeline(config, lexicon=lexicon)
        try:
            with conn, conn.makefile("rb") as fh:
                for line in fh:
                    for report in pipe.process_line(line):
                        with sink_lock:
                            sink.write(json.dumps(report.to_dict()) + "\n")
                            sink.flush()
                for report in pipe.finish():
                    with sink_lock:
                        sink.write(json.dumps(report.to_dict()) + "\n")
                        sink.flush()
        finally:
            sem.release()

    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as srv:
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host, port))
        srv.listen()
        srv.settimeout(0.2)
        log.info("listening on %s:%d", host, port)
        while stop_event is None or not stop_event.is_set():
            try:
                conn, _addr = srv.accept()
            except socket.timeout:
                continue
            sem.acquire()
            t = threading.Thread(target=handle, args=(conn,), daemon=True)
            t.start()
