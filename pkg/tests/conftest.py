import math

import numpy as np
import pytest

from e2t.model import EventRecord


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def random_unit(rng, dim):
    v = rng.normal(size=dim)
    return unit(v)


def make_record(event_id, vec, ts=None, desc=None):
    vec = np.asarray(vec, dtype=np.float64)
    vec = (vec / np.linalg.norm(vec)).astype(np.float32)
    return EventRecord(
        id=event_id,
        timestamp=float(ts if ts is not None else event_id),
        frame_id=event_id,
        description=desc or f"event {event_id}",
        embedding=vec,
    )


def random_stream(rng, n_events, dim, n_bases=30, dup_prob=0.5, noise=0.05):
    """Stream of unit-vector events: exact duplicates and noisy variants of a
    base pool, to exercise both the novel and redundant ingest paths."""
    bases = [random_unit(rng, dim) for _ in range(n_bases)]
    records = []
    for i in range(n_events):
        base = bases[rng.integers(len(bases))]
        if rng.random() < dup_prob:
            v = base
        else:
            v = unit(base + noise * rng.normal(size=dim))
        records.append(make_record(i, v))
    return records


class BruteForceDedup:
    """Independent sequential reference: plain-python loops and sums,
    no shared code with the engine beyond numpy scalars."""

    def __init__(self, dim, tau):
        self.dim = dim
        self.tau = tau
        self.clusters = []  # dicts: id, member_ids, member_vecs, centroid, rep_id, rep_vec

    @staticmethod
    def _cos(u, v):
        du = math.sqrt(sum(float(x) * float(x) for x in u))
        dv = math.sqrt(sum(float(x) * float(x) for x in v))
        dot = sum(float(a) * float(b) for a, b in zip(u, v))
        if du == 0 or dv == 0:
            return 0.0
        return max(-1.0, min(1.0, dot / (du * dv)))

    def ingest(self, event_id, vec):
        vec = [float(x) for x in np.asarray(vec, dtype=np.float64)]
        best_idx, best_sim = None, -float("inf")
        for idx, c in enumerate(self.clusters):
            sim = self._cos(vec, c["rep_vec"])
            if sim > best_sim:
                best_idx, best_sim = idx, sim
        if best_idx is None or not (best_sim > self.tau):
            self.clusters.append(
                {
                    "id": len(self.clusters),
                    "member_ids": [event_id],
                    "member_vecs": [vec],
                    "centroid": list(vec),
                    "rep_id": event_id,
                    "rep_vec": list(vec),
                }
            )
            return
        c = self.clusters[best_idx]
        c["member_ids"].append(event_id)
        c["member_vecs"].append(vec)
        m = len(c["member_vecs"])
        centroid = [
            sum(v[j] for v in c["member_vecs"]) / m for j in range(self.dim)
        ]
        c["centroid"] = centroid
        best_mid, best_mvec, best_msim = None, None, -float("inf")
        for mid, mvec in zip(c["member_ids"], c["member_vecs"]):
            sim = self._cos(mvec, centroid)
            if sim > best_msim or (sim == best_msim and mid < best_mid):
                best_mid, best_mvec, best_msim = mid, mvec, sim
        c["rep_id"] = best_mid
        c["rep_vec"] = best_mvec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
