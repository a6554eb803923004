"""Throughput comparison of the numba and numpy kernel backends.

Run without arguments to benchmark both backends (each in a fresh
interpreter, since the backend is chosen at import time) and print a
combined table:

    python3 benchmarks/bench_backends.py

Workloads:
  embed          feature-hash embedding of distinct descriptions
  dedup-100      embed->dedup, verbatim duplicates over 100 clusters
  dedup-1000     embed->dedup, verbatim duplicates over ~1000 clusters
  novel-500      embed->dedup, every event founds a new cluster
"""

import argparse
import json
import os
import random
import subprocess
import sys
import time

VERBS = ["walking", "running", "fighting", "loitering", "climbing", "throwing"]
PLACES = ["park", "street", "lobby", "garage", "rooftop", "alley"]


def _descriptions(n):
    return [
        f"person {VERBS[i % 6]} in the {PLACES[(i // 6) % 6]} sector {i}"
        for i in range(n)
    ]


def _dup_stream(n_clusters, n_events, seed=42):
    descs = _descriptions(n_clusters)
    rnd = random.Random(seed)
    return [descs[rnd.randrange(n_clusters)] for _ in range(n_events)]


def _time_ingest(descs, repeats=3):
    from e2t.dedup import KnowledgeBase, ingest_event
    from e2t.embedding import embed
    from e2t.model import EventRecord, PipelineConfig

    best = 0.0
    for _ in range(repeats):
        kb = KnowledgeBase(PipelineConfig(tau_sim=0.9))
        t0 = time.perf_counter()
        for i, d in enumerate(descs):
            ingest_event(EventRecord(i, float(i), i, d, embed(d)), kb)
        best = max(best, len(descs) / (time.perf_counter() - t0))
    return best


def run_workloads():
    from e2t import _kernels
    from e2t.dedup import KnowledgeBase, ingest_event
    from e2t.embedding import embed
    from e2t.model import EventRecord, PipelineConfig

    # warm JIT paths (novel and redundant ingest) before timing
    kb = KnowledgeBase(PipelineConfig(tau_sim=0.9))
    for i, d in enumerate(_dup_stream(40, 400, seed=1)):
        ingest_event(EventRecord(i, float(i), i, d, embed(d)), kb)

    results = {"backend": _kernels.BACKEND}

    fresh = _descriptions(4000)
    best = 0.0
    for _ in range(3):
        from e2t.embedding import _embed_cached

        _embed_cached.cache_clear()
        t0 = time.perf_counter()
        for d in fresh:
            embed(d)
        best = max(best, len(fresh) / (time.perf_counter() - t0))
    results["embed"] = best

    results["dedup-100"] = _time_ingest(_dup_stream(100, 20000))
    results["dedup-1000"] = _time_ingest(_dup_stream(1000, 20000))
    results["novel-500"] = _time_ingest(_descriptions(500))
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--child", action="store_true", help="run workloads for E2T_BACKEND and emit JSON"
    )
    args = parser.parse_args()
    if args.child:
        print(json.dumps(run_workloads()))
        return

    rows = []
    for backend in ("numba", "numpy"):
        env = dict(os.environ, E2T_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--child"],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))

    workloads = ["embed", "dedup-100", "dedup-1000", "novel-500"]
    header = f"{'workload':<12}" + "".join(f"{r['backend']+' ev/s':>16}" for r in rows)
    print(header)
    print("-" * len(header))
    for w in workloads:
        line = f"{w:<12}" + "".join(f"{r[w]:>16,.0f}" for r in rows)
        print(line)


if __name__ == "__main__":
    main()
