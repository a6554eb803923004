import random

import pytest

from e2t.errors import DegenerateLabels
from e2t.eval import (
    StreamSpec,
    compute_ap,
    compute_auc,
    evaluate_stream,
    format_ablation_table,
    generate_synthetic_stream,
    run_ablation,
)
from e2t.model import PipelineConfig


def brute_force_auc(pairs):
    pos = [s for s, y in pairs if y == 1]
    neg = [s for s, y in pairs if y != 1]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def brute_force_ap(pairs):
    order = sorted(range(len(pairs)), key=lambda i: -pairs[i][0])
    hits, out = 0, []
    for rank, idx in enumerate(order, start=1):
        if pairs[idx][1] == 1:
            hits += 1
            out.append(hits / rank)
    return sum(out) / len(out)


def test_auc_perfect_separation():
    pairs = [(0.9, 1), (0.8, 1), (0.7, 0), (0.1, 0)]
    assert compute_auc(pairs) == 1.0


def test_auc_all_ties():
    pairs = [(0.5, 1), (0.5, 0), (0.5, 1), (0.5, 0)]
    assert compute_auc(pairs) == 0.5


def test_auc_hand_computed():
    # pos {0.9, 0.4}, neg {0.6, 0.2}: 3 of 4 pairs concordant
    pairs = [(0.9, 1), (0.4, 1), (0.6, 0), (0.2, 0)]
    assert compute_auc(pairs) == 0.75


def test_auc_degenerate():
    with pytest.raises(DegenerateLabels):
        compute_auc([(0.5, 1), (0.4, 1)])


def test_ap_examples():
    assert compute_ap([(0.9, 1), (0.8, 1), (0.2, 0)]) == 1.0
    # descending-order labels [0,1,0,1]
    pairs = [(0.9, 0), (0.8, 1), (0.7, 0), (0.6, 1)]
    assert compute_ap(pairs) == pytest.approx((1 / 2 + 2 / 4) / 2)
    assert compute_ap([(0.3, 1)]) == 1.0
    with pytest.raises(DegenerateLabels):
        compute_ap([(0.5, 0)])


def test_metrics_match_brute_force():
    rnd = random.Random(99)
    for _ in range(200):
        n = rnd.randint(2, 100)
        pairs = [(rnd.choice([rnd.random(), 0.5]), rnd.randint(0, 1)) for _ in range(n)]
        labels = {y for _, y in pairs}
        if labels == {0, 1}:
            assert compute_auc(pairs) == pytest.approx(brute_force_auc(pairs), abs=1e-12)
        if 1 in labels:
            assert compute_ap(pairs) == pytest.approx(brute_force_ap(pairs), abs=1e-12)


def test_auc_monotone_transform_invariance():
    rnd = random.Random(5)
    for _ in range(20):
        pairs = [(rnd.random(), rnd.randint(0, 1)) for _ in range(50)]
        if {y for _, y in pairs} != {0, 1}:
            continue
        transformed = [(2 * s + 1, y) for s, y in pairs]
        assert compute_auc(pairs) == pytest.approx(compute_auc(transformed), abs=1e-12)


def test_synthetic_stream_deterministic():
    a = generate_synthetic_stream(StreamSpec(n_events=50, seed=3, duplicate_rate=0.4))
    b = generate_synthetic_stream(StreamSpec(n_events=50, seed=3, duplicate_rate=0.4))
    assert [(m.ts, m.desc, m.label) for m in a] == [(m.ts, m.desc, m.label) for m in b]


def test_synthetic_stream_no_duplicates_distinct():
    msgs = generate_synthetic_stream(StreamSpec(n_events=80, duplicate_rate=0.0, seed=1))
    descs = [m.desc for m in msgs]
    assert len(set(descs)) == len(descs)


def test_synthetic_stream_duplicate_rate():
    msgs = generate_synthetic_stream(StreamSpec(n_events=100, duplicate_rate=0.5, seed=2))
    dup_count = len(msgs) - len({m.desc for m in msgs})
    assert 30 <= dup_count <= 70  # ~50 verbatim repeats


def test_separable_stream_perfect_scores():
    msgs = generate_synthetic_stream(
        StreamSpec(n_events=120, duplicate_rate=0.3, threat_fraction=0.3, seed=7)
    )
    config = PipelineConfig(dim=384, target_fps=2.0, reasoning_interval=5.0)
    res = evaluate_stream(msgs, config)
    assert res.auc == 1.0
    assert res.ap == 1.0


def test_ablation_matrix(tmp_path):
    msgs = generate_synthetic_stream(
        StreamSpec(n_events=60, duplicate_rate=0.5, threat_fraction=0.3, seed=11)
    )
    rows = run_ablation(msgs, PipelineConfig(dim=384), fps_presets=(1.25,))
    assert len(rows) == 2  # dedup on/off x 1 preset
    on = next(r for r in rows if "dedup=on" in r["config"])
    off = next(r for r in rows if "dedup=off" in r["config"])
    assert off["clusters"] == off["kept_frames"]
    distinct = len({m.desc for m in msgs})
    assert on["clusters"] == distinct
    table = format_ablation_table(rows)
    assert table.splitlines()[0].startswith("config\t")
    assert len(table.splitlines()) == 3
