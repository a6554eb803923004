"""Online event deduplication: dynamic clusters, centroids, representatives.

Each incoming event is compared against the stored cluster representatives.
A similarity above the threshold joins the best-matching cluster, whose
centroid and representative are then re-evaluated; otherwise the event
founds a new cluster.  The knowledge base keeps one representative per
cluster as the sole exemplar used for future comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DimMismatch, EmptyCluster
from .model import EventRecord, HoipTuple, PipelineConfig

NOVEL = -1

# float32 prescreen tolerance; worst-case float32 dot error on unit vectors
# of this dimension is below 5e-5, so 1e-3 keeps every possible winner
_PRESCREEN_MARGIN = 1e-3


def _row_norm(row: np.ndarray) -> float:
    # sequential summation so identical rows get bit-identical norms
    return _kernels.seq_norm(row)


@dataclass(slots=True)
class ClusterMember:
    event_id: int
    timestamp: float
    description: str
    embedding: np.ndarray  # float32, unit norm
    tuples: tuple[HoipTuple, ...] = ()


@dataclass(slots=True)
class EventCluster:
    cluster_id: int
    members: list[ClusterMember]
    centroid: np.ndarray  # float64 mean of member embeddings, not unit norm
    representative: ClusterMember
    first_seen: float
    last_updated: float
    # lazy caches for the hot path; grown in place on append and rebuilt
    # from scratch only when the member list changed behind our back.
    # _matrix holds member rows (row index == member list index), _drows
    # the first row of each distinct embedding in ascending event-id order
    _matrix: Optional[np.ndarray] = None
    _norms: Optional[np.ndarray] = None
    _ids: Optional[np.ndarray] = None
    _rows: int = 0
    # running float64 sum of member rows; centroid = _sum / len(members)
    _sum: Optional[np.ndarray] = None
    _drows: Optional[np.ndarray] = None
    _nd: int = 0
    _cbuf: Optional[np.ndarray] = None
    # member count whose derived state (norms, sum, distinct set) is valid;
    # a mismatch with len(members) forces a cache rebuild
    _derived: int = 0

    def _rebuild_cache(self) -> None:
        m = len(self.members)
        cap = max(4, m)
        dim = self.members[0].embedding.shape[0]
        self._matrix = np.empty((cap, dim), dtype=np.float32)
        self._norms = np.empty(cap, dtype=np.float64)
        self._ids = np.empty(cap, dtype=np.int64)
        self._cbuf = np.empty(dim, dtype=np.float64)
        # the running sum is rebuilt row by row so a cluster restored from
        # a snapshot accumulates exactly like one grown in place
        self._sum = np.zeros(dim, dtype=np.float64)
        groups: dict[bytes, int] = {}
        for i, mem in enumerate(self.members):
            self._matrix[i] = mem.embedding
            self._norms[i] = _row_norm(self._matrix[i])
            self._ids[i] = mem.event_id
            key = mem.embedding.tobytes()
            prev = groups.get(key)
            if prev is None or mem.event_id < self._ids[prev]:
                groups[key] = i
            self._sum += self._matrix[i]
        rows = sorted(groups.values(), key=lambda r: self._ids[r])
        self._drows = np.empty(cap, dtype=np.int64)
        self._drows[: len(rows)] = rows
        self._nd = len(rows)
        self._rows = m
        self._derived = m

    def append_member(self, member: ClusterMember) -> int:
        """Add a member row to the caches; returns its row index.

        Derived state (norm, running sum, distinct set) is completed by the
        redundant_update kernel in ingest_event or by a cache rebuild.
        """
        if self._matrix is None or self._derived != len(self.members):
            self._rebuild_cache()
        if self._rows == self._matrix.shape[0]:
            self._matrix = np.concatenate([self._matrix, np.empty_like(self._matrix)])
            self._norms = np.concatenate([self._norms, np.empty_like(self._norms)])
            self._ids = np.concatenate([self._ids, np.empty_like(self._ids)])
            self._drows = np.concatenate([self._drows, np.empty_like(self._drows)])
        r = self._rows
        self.members.append(member)
        self._matrix[r] = member.embedding
        self._ids[r] = member.event_id
        self._rows = r + 1
        return r

    def member_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        if self._matrix is None or self._derived != len(self.members):
            self._rebuild_cache()
        return self._matrix[: self._rows], self._norms[: self._rows]


@dataclass
class TimelineEntry:
    cluster_id: int
    first_seen: float
    last_updated: float
    description: str
    representative_event_id: int
    tuples: tuple[HoipTuple, ...] = ()


@dataclass
class IngestResult:
    cluster_id: int
    novel: bool
    timeline_changed: bool


class KnowledgeBase:
    """Event-time history: clusters plus a representative timeline.

    Single-writer: ingest_event must be serialized by the caller.  Reads
    (timeline, iteration) observe only fully applied ingests.
    """

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.clusters: dict[int, EventCluster] = {}
        self.next_cluster_id = 0
        self.event_count = 0
        # representative matrix cache, rows in cluster-creation order;
        # float32 storage halves scan traffic and loses nothing because the
        # source embeddings are float32 and kernels widen rows exactly
        self._rep_rows32 = np.empty((64, config.dim), dtype=np.float32)
        self._rep_norms = np.empty(64, dtype=np.float64)
        # int8 quantized copy of the rows drives the first classify tier;
        # _eps_max bounds the quantization error of every live row
        self._rep_q = np.empty((64, config.dim), dtype=np.int8)
        self._eps_max = 0.0
        self._n_rows = 0
        self._row_cluster_ids: list[int] = []
        self._row_of: dict[int, int] = {}

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self) -> Iterator[EventCluster]:
        return iter(self.clusters.values())

    def _append_rep_row(self, cluster_id: int, emb: np.ndarray) -> None:
        if self._n_rows == self._rep_rows32.shape[0]:
            self._rep_rows32 = np.concatenate([self._rep_rows32, np.empty_like(self._rep_rows32)])
            self._rep_norms = np.concatenate([self._rep_norms, np.empty_like(self._rep_norms)])
            self._rep_q = np.concatenate([self._rep_q, np.empty_like(self._rep_q)])
        i = self._n_rows
        self._rep_rows32[i] = emb
        self._rep_norms[i] = _row_norm(self._rep_rows32[i])
        q, eps = _kernels.quantize(self._rep_rows32[i])
        self._rep_q[i] = q
        if eps > self._eps_max:
            self._eps_max = eps
        self._n_rows += 1
        self._row_of[cluster_id] = len(self._row_cluster_ids)
        self._row_cluster_ids.append(cluster_id)

    def _replace_rep_row(self, cluster_id: int, emb: np.ndarray) -> None:
        idx = self._row_of[cluster_id]
        self._rep_rows32[idx] = emb
        self._rep_norms[idx] = _row_norm(self._rep_rows32[idx])
        q, eps = _kernels.quantize(self._rep_rows32[idx])
        self._rep_q[idx] = q
        if eps > self._eps_max:
            self._eps_max = eps


def compute_centroid(members: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise arithmetic mean of member embeddings; not renormalized."""
    if len(members) == 0:
        raise EmptyCluster("cannot take centroid of zero members")
    stacked = np.stack([np.asarray(m, dtype=np.float64) for m in members])
    return stacked.mean(axis=0)


def select_representative(cluster: EventCluster) -> ClusterMember:
    """Member with maximal cosine similarity to the centroid; ties take the
    smallest event id."""
    if not cluster.members:
        raise EmptyCluster(f"cluster {cluster.cluster_id} has no members")
    c = np.asarray(cluster.centroid, dtype=np.float64)
    cnorm = float(np.sqrt(c @ c))
    cluster.member_matrix()  # ensure caches
    if cnorm == 0.0:
        return cluster.members[0]
    # identical embeddings produce identical sims under the sequential dot,
    # so only the first member of each distinct group can win; electing in
    # ascending event-id order realizes the smallest-id tie rule
    rows = cluster._drows[: cluster._nd]
    best_pos = _kernels.elect(cluster._matrix, cluster._norms, rows, c, cnorm)
    return cluster.members[int(best_pos)]


def classify_event(v: np.ndarray, kb: KnowledgeBase, tau: float) -> int:
    """Return the matched cluster_id, or NOVEL when no representative
    exceeds the similarity threshold (strict).  Ties on the maximum go to
    the smallest cluster_id."""
    if v.shape != (kb.config.dim,):
        raise DimMismatch(f"vector shape {v.shape} != ({kb.config.dim},)")
    n = kb._n_rows
    if n == 0:
        return NOVEL
    # three-tier kernel: an int8 scan keeps every row whose true dot could
    # reach the maximum (band derived from the quantization error bounds),
    # a float32 prescreen narrows those further, and exact float64 cosines
    # decide; ascending order keeps the smallest cluster_id on exact ties
    v32 = np.asarray(v, dtype=np.float32)
    qv, eps_v = _kernels.quantize(v32)
    delta = kb._eps_max + eps_v + 3.0 * kb._eps_max * eps_v + 1e-4
    band = int(2.0 * delta * 16129.0) + 2
    idx = _kernels.classify_scan(
        kb._rep_norms[:n],
        kb._rep_rows32[:n],
        kb._rep_q[:n],
        np.asarray(v, dtype=np.float64),
        v32,
        qv,
        band,
        tau,
        _PRESCREEN_MARGIN,
    )
    if idx < 0:
        return NOVEL
    return kb._row_cluster_ids[idx]


def ingest_event(
    record: EventRecord, kb: KnowledgeBase, *, force_novel: bool = False
) -> IngestResult:
    """Apply one event to the knowledge base.

    Novel events found a new cluster; redundant events join the matched
    cluster, whose centroid is recomputed and representative re-elected.
    timeline_changed is true for every new cluster and for any
    representative change.
    """
    member = ClusterMember(
        event_id=record.id,
        timestamp=record.timestamp,
        description=record.description,
        embedding=record.embedding,
        tuples=record.tuples,
    )
    match = NOVEL if force_novel else classify_event(
        record.embedding, kb, kb.config.tau_sim
    )
    kb.event_count += 1
    if match == NOVEL:
        cid = kb.next_cluster_id
        kb.next_cluster_id += 1
        cluster = EventCluster(
            cluster_id=cid,
            members=[member],
            centroid=member.embedding.astype(np.float64),
            representative=member,
            first_seen=record.timestamp,
            last_updated=record.timestamp,
        )
        kb.clusters[cid] = cluster
        kb._append_rep_row(cid, member.embedding)
        return IngestResult(cluster_id=cid, novel=True, timeline_changed=True)

    cluster = kb.clusters[match]
    r = cluster.append_member(member)
    nd, best_row = _kernels.redundant_update(
        cluster._matrix,
        cluster._norms,
        cluster._drows,
        cluster._nd,
        cluster._sum,
        cluster._cbuf,
        r,
        len(cluster.members),
    )
    cluster._nd = int(nd)
    cluster._derived = cluster._rows
    cluster.centroid = cluster._cbuf
    old_rep_id = cluster.representative.event_id
    rep = cluster.members[int(best_row)]
    cluster.representative = rep
    cluster.last_updated = record.timestamp
    changed = rep.event_id != old_rep_id
    if changed:
        kb._replace_rep_row(match, rep.embedding)
    return IngestResult(cluster_id=match, novel=False, timeline_changed=changed)


def timeline(kb: KnowledgeBase) -> list[tuple[float, str, int]]:
    """(first_seen, representative description, cluster_id) per cluster,
    ordered chronologically by first_seen; ties by cluster_id."""
    entries = sorted(kb.clusters.values(), key=lambda c: (c.first_seen, c.cluster_id))
    return [(c.first_seen, c.representative.description, c.cluster_id) for c in entries]


def timeline_entries(kb: KnowledgeBase) -> list[TimelineEntry]:
    """Rich timeline view used by the reasoner; same ordering as timeline()."""
    entries = sorted(kb.clusters.values(), key=lambda c: (c.first_seen, c.cluster_id))
    return [
        TimelineEntry(
            cluster_id=c.cluster_id,
            first_seen=c.first_seen,
            last_updated=c.last_updated,
            description=c.representative.description,
            representative_event_id=c.representative.event_id,
            tuples=c.representative.tuples,
        )
        for c in entries
    ]
