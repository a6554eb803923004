import numpy as np
import pytest
from conftest import BruteForceDedup, make_record, random_stream, unit

from e2t.dedup import (
    NOVEL,
    KnowledgeBase,
    classify_event,
    compute_centroid,
    ingest_event,
    select_representative,
    timeline,
)
from e2t.errors import DimMismatch, EmptyCluster
from e2t.model import PipelineConfig


def _kb_small(dim, tau):
    return KnowledgeBase(PipelineConfig(dim=dim, tau_sim=tau))


def test_empty_kb_is_novel():
    kb = _kb_small(4, 0.9)
    assert classify_event(unit([1, 0, 0, 0]), kb, 0.9) == NOVEL


def test_exact_match_is_redundant():
    kb = _kb_small(4, 0.9)
    v = unit([1, 0, 0, 0])
    ingest_event(make_record(0, v), kb)
    assert classify_event(np.asarray(v, np.float64), kb, 0.9) == 0


def test_below_threshold_is_novel():
    kb = _kb_small(4, 0.9)
    # reps with similarity 0.85 and 0.62 to the probe
    probe = unit([1.0, 0.0, 0.0, 0.0])
    rep1 = unit([0.85, np.sqrt(1 - 0.85**2), 0, 0])
    rep2 = unit([0.62, 0, np.sqrt(1 - 0.62**2), 0])
    ingest_event(make_record(0, rep1), kb)
    ingest_event(make_record(1, rep2), kb)
    assert classify_event(probe, kb, 0.9) == NOVEL
    # brute-force check of the max
    sims = [float(probe @ rep1), float(probe @ rep2)]
    assert max(sims) < 0.9


def test_classify_dim_mismatch():
    kb = _kb_small(4, 0.9)
    with pytest.raises(DimMismatch):
        classify_event(np.ones(5), kb, 0.9)


def test_compute_centroid():
    v = unit([1, 2, 3, 4])
    assert np.allclose(compute_centroid([v]), v)
    c = compute_centroid([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
    assert np.allclose(c, [0.5, 0.5])


def test_compute_centroid_oracle(rng):
    members = [unit(rng.normal(size=8)) for _ in range(50)]
    got = compute_centroid(members)
    want = [sum(float(m[j]) for m in members) / 50 for j in range(8)]
    assert np.allclose(got, want, atol=1e-9)
    with pytest.raises(EmptyCluster):
        compute_centroid([])


def test_select_representative_argmax():
    from e2t.dedup import ClusterMember, EventCluster

    vecs = [[1.0, 0.0], [0.0, 1.0], [0.7071067811865476, 0.7071067811865476]]
    members = [
        ClusterMember(event_id=i, timestamp=float(i), description=f"e{i}",
                      embedding=np.asarray(v, np.float32))
        for i, v in enumerate(vecs)
    ]
    centroid = compute_centroid([m.embedding for m in members])
    cluster = EventCluster(
        cluster_id=0, members=members, centroid=centroid,
        representative=members[0], first_seen=0.0, last_updated=2.0,
    )
    rep = select_representative(cluster)
    # centroid points along (1,1); third member is exactly aligned with it
    assert rep.event_id == 2


def test_representative_tie_breaks_to_smaller_id():
    kb = _kb_small(2, 0.1)
    ingest_event(make_record(0, [1.0, 0.0]), kb)
    ingest_event(make_record(1, [0.0, 1.0]), kb)
    # both members equidistant from centroid [0.5, 0.5]
    assert kb.clusters[0].representative.event_id == 0


def test_first_event_initializes_cluster_zero():
    kb = _kb_small(4, 0.9)
    res = ingest_event(make_record(0, unit([1, 1, 0, 0])), kb)
    assert res.cluster_id == 0 and res.novel and res.timeline_changed
    assert kb.next_cluster_id == 1
    assert kb.clusters[0].representative.event_id == 0


def test_duplicate_keeps_representative():
    kb = _kb_small(4, 0.9)
    v = unit([1, 1, 0, 0])
    ingest_event(make_record(0, v), kb)
    res = ingest_event(make_record(1, v), kb)
    assert not res.novel and res.cluster_id == 0
    assert kb.clusters[0].representative.event_id == 0  # tie -> smaller id
    assert not res.timeline_changed
    assert len(kb.clusters[0].members) == 2


def test_compression_property():
    # m verbatim copies -> one cluster with m members
    for m in (2, 10, 50):
        kb = _kb_small(4, 0.9)
        v = unit([1, 2, 0, 0])
        for i in range(m):
            ingest_event(make_record(i, v), kb)
        assert len(kb) == 1
        assert len(kb.clusters[0].members) == m
    # n mutually-below-tau events -> n clusters (orthogonal basis vectors)
    n = 50
    kb = _kb_small(n, 0.5)
    for i in range(n):
        v = np.zeros(n)
        v[i] = 1.0
        ingest_event(make_record(i, v), kb)
    assert len(kb) == n


def test_timeline_ordering():
    kb = _kb_small(4, 0.9)
    assert timeline(kb) == []
    for i, (ts, axis) in enumerate([(1.0, 0), (5.0, 1), (3.0, 2)]):
        v = np.zeros(4)
        v[axis] = 1.0
        ingest_event(make_record(i, v, ts=ts), kb)
    tl = timeline(kb)
    assert [t for t, _, _ in tl] == [1.0, 3.0, 5.0]
    assert len(tl) == len(kb)


def test_oracle_equivalence_random_streams(rng):
    for trial in range(20):
        dim = int(rng.choice([4, 16]))
        tau = float(rng.choice([0.5, 0.9]))
        n = int(rng.integers(20, 120))
        records = random_stream(rng, n, dim)
        kb = _kb_small(dim, tau)
        oracle = BruteForceDedup(dim, tau)
        for rec in records:
            ingest_event(rec, kb)
            oracle.ingest(rec.id, rec.embedding)
        assert len(kb) == len(oracle.clusters)
        for c in oracle.clusters:
            engine = kb.clusters[c["id"]]
            assert [m.event_id for m in engine.members] == c["member_ids"]
            assert engine.representative.event_id == c["rep_id"]
            assert np.allclose(engine.centroid, c["centroid"], atol=1e-9)


def test_centroid_consistency_and_representative_optimality(rng):
    kb = _kb_small(8, 0.7)
    records = random_stream(rng, 100, 8)
    for rec in records:
        ingest_event(rec, kb)
        for cluster in kb:
            recomputed = compute_centroid([m.embedding for m in cluster.members])
            assert np.allclose(cluster.centroid, recomputed, atol=1e-9)
            rep = cluster.representative
            c = cluster.centroid
            rep_sim = float(rep.embedding.astype(np.float64) @ c) / (
                np.linalg.norm(rep.embedding.astype(np.float64)) * np.linalg.norm(c)
            )
            for m in cluster.members:
                e = m.embedding.astype(np.float64)
                sim = float(e @ c) / (np.linalg.norm(e) * np.linalg.norm(c))
                assert sim <= rep_sim + 1e-12


def test_every_event_in_exactly_one_cluster(rng):
    kb = _kb_small(8, 0.8)
    records = random_stream(rng, 80, 8)
    for rec in records:
        ingest_event(rec, kb)
    seen = [m.event_id for c in kb for m in c.members]
    assert sorted(seen) == list(range(80))


def test_new_cluster_representatives_below_tau_at_creation(rng):
    # historical property: on creation, a new representative is <= tau-similar
    # to all existing representatives
    tau = 0.9
    kb = _kb_small(8, tau)
    records = random_stream(rng, 80, 8)
    for rec in records:
        reps_before = [
            (c.cluster_id, c.representative.embedding.astype(np.float64)) for c in kb
        ]
        res = ingest_event(rec, kb)
        if res.novel and reps_before:
            v = rec.embedding.astype(np.float64)
            for _, r in reps_before:
                sim = float(v @ r) / (np.linalg.norm(v) * np.linalg.norm(r))
                assert sim <= tau + 1e-12
