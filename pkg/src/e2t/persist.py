"""Durable knowledge-base snapshots and append-only event-log replay.

Snapshot layout (UTF-8 text):
  line 1   magic "E2T-SNAPSHOT v1"
  line 2   metadata JSON (dim, tau, next_cluster_id, cluster/event counts,
           optional pipeline resume state)
  lines    one JSON record per cluster; vectors are base64-encoded
           little-endian floats (members/representatives float32, centroid
           float64 so recomputation verifies exactly)
  last     "CRC32 <hex>" over all preceding bytes

Saves are atomic (write temp file, then rename).
"""

from __future__ import annotations

import base64
import json
import os
import tempfile
import zlib
from typing import Optional

import numpy as np

from .dedup import ClusterMember, EventCluster, KnowledgeBase, ingest_event
from .errors import (
    Malformed,
    SnapshotCorrupt,
    SnapshotInconsistent,
    VersionUnsupported,
)
from .ingest import encode_record
from .model import EventRecord, HoipTuple, PipelineConfig, validate_record

MAGIC = "E2T-SNAPSHOT v1"
CENTROID_TOL = 1e-9


def _b64_f32(vec: np.ndarray) -> str:
    return base64.b64encode(np.asarray(vec, dtype="<f4").tobytes()).decode("ascii")


def _b64_f64(vec: np.ndarray) -> str:
    return base64.b64encode(np.asarray(vec, dtype="<f8").tobytes()).decode("ascii")


def _un_b64(data: str, dtype: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(data), dtype=dtype).copy()


def _tuples_to_json(tuples) -> list[dict]:
    return [
        {
            "human": t.human,
            "object": t.object,
            "interaction": t.interaction,
            "place": t.place,
            "confidence": t.confidence,
        }
        for t in tuples
    ]


def _tuples_from_json(items) -> tuple[HoipTuple, ...]:
    return tuple(
        HoipTuple(
            human=i["human"],
            object=i.get("object"),
            interaction=i["interaction"],
            place=i["place"],
            confidence=float(i.get("confidence", 1.0)),
        )
        for i in items
    )


def snapshot_save(kb: KnowledgeBase, path: str, resume: Optional[dict] = None) -> None:
    """Write an atomic snapshot; byte-identical for identical knowledge bases."""
    meta = {
        "dim": kb.config.dim,
        "tau": kb.config.tau_sim,
        "next_cluster_id": kb.next_cluster_id,
        "clusters": len(kb.clusters),
        "events": kb.event_count,
    }
    if resume is not None:
        meta["resume"] = resume
    lines = [MAGIC, json.dumps(meta, separators=(",", ":"), sort_keys=True)]
    for cid in sorted(kb.clusters):
        c = kb.clusters[cid]
        rec = {
            "cluster_id": c.cluster_id,
            "first_seen": c.first_seen,
            "last_updated": c.last_updated,
            "representative": {
                "event_id": c.representative.event_id,
                "description": c.representative.description,
                "embedding": _b64_f32(c.representative.embedding),
            },
            "centroid": _b64_f64(c.centroid),
            "members": [
                {
                    "event_id": m.event_id,
                    "timestamp": m.timestamp,
                    "description": m.description,
                    "embedding": _b64_f32(m.embedding),
                    "tuples": _tuples_to_json(m.tuples),
                }
                for m in c.members
            ],
        }
        lines.append(json.dumps(rec, separators=(",", ":"), sort_keys=True))
    body = ("\n".join(lines) + "\n").encode("utf-8")
    crc = zlib.crc32(body) & 0xFFFFFFFF
    payload = body + f"CRC32 {crc:08x}\n".encode("ascii")

    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".e2t-snap-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def snapshot_load(path: str, config: Optional[PipelineConfig] = None) -> tuple[KnowledgeBase, Optional[dict]]:
    """Load and verify a snapshot; returns the kb and any resume state.

    Centroids and representatives are recomputed from members and checked
    against the stored values (CONSISTENCY on disagreement); the trailing
    CRC guards against bit corruption."""
    from . import dedup

    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.rfind(b"\n", 0, len(raw) - 1)
    body, tail = raw[: nl + 1], raw[nl + 1 :]
    if not tail.startswith(b"CRC32 "):
        raise SnapshotCorrupt("missing CRC trailer")
    try:
        stated = int(tail.split()[1], 16)
    except (IndexError, ValueError) as exc:
        raise SnapshotCorrupt("bad CRC trailer") from exc
    if (zlib.crc32(body) & 0xFFFFFFFF) != stated:
        raise SnapshotCorrupt("checksum mismatch")

    lines = body.decode("utf-8").splitlines()
    if not lines or not lines[0].startswith("E2T-SNAPSHOT"):
        raise SnapshotCorrupt("bad magic")
    if lines[0] != MAGIC:
        raise VersionUnsupported(f"unsupported snapshot version: {lines[0]!r}")
    meta = json.loads(lines[1])
    if config is None:
        config = PipelineConfig(dim=int(meta["dim"]), tau_sim=float(meta["tau"]))
    elif config.dim != int(meta["dim"]):
        raise SnapshotInconsistent(
            f"config dim {config.dim} != snapshot dim {meta['dim']}"
        )
    kb = KnowledgeBase(config)
    kb.next_cluster_id = int(meta["next_cluster_id"])
    kb.event_count = int(meta["events"])
    for line in lines[2:]:
        rec = json.loads(line)
        members = [
            ClusterMember(
                event_id=int(m["event_id"]),
                timestamp=float(m["timestamp"]),
                description=m["description"],
                embedding=_un_b64(m["embedding"], "<f4"),
                tuples=_tuples_from_json(m.get("tuples", [])),
            )
            for m in rec["members"]
        ]
        cluster = EventCluster(
            cluster_id=int(rec["cluster_id"]),
            members=members,
            centroid=_un_b64(rec["centroid"], "<f8"),
            representative=None,  # elected below
            first_seen=float(rec["first_seen"]),
            last_updated=float(rec["last_updated"]),
        )
        recomputed = dedup.compute_centroid([m.embedding for m in members])
        if not np.allclose(recomputed, cluster.centroid, rtol=0, atol=CENTROID_TOL):
            raise SnapshotInconsistent(
                f"centroid mismatch in cluster {cluster.cluster_id}"
            )
        rep = dedup.select_representative(cluster)
        if rep.event_id != int(rec["representative"]["event_id"]):
            raise SnapshotInconsistent(
                f"representative mismatch in cluster {cluster.cluster_id}"
            )
        cluster.representative = rep
        kb.clusters[cluster.cluster_id] = cluster
        kb._append_rep_row(cluster.cluster_id, rep.embedding)
    if len(kb.clusters) != int(meta["clusters"]):
        raise SnapshotInconsistent("cluster count mismatch")
    return kb, meta.get("resume")


def append_log(record: EventRecord, path: str) -> None:
    """Append one validated event to the replay log."""
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(encode_record(record) + "\n")


def replay_log(path: str, config: PipelineConfig) -> KnowledgeBase:
    """Rebuild the knowledge base by re-ingesting a logged stream in order."""
    kb = KnowledgeBase(config)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                record = validate_record(
                    id=int(raw["id"]),
                    timestamp=float(raw["timestamp"]),
                    frame_id=int(raw["frame_id"]),
                    description=raw["description"],
                    embedding=np.asarray(raw["embedding"], dtype=np.float32),
                    tuples=_tuples_from_json(raw.get("tuples", [])),
                    dim=config.dim,
                )
            except Exception as exc:
                raise Malformed(f"log line {lineno}: {exc}") from exc
            ingest_event(record, kb, force_novel=not config.dedup_enabled)
    return kb
