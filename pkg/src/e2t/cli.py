"""Operator command line: serve, replay, eval, kb dump, losses check.

Reports stream to stdout as JSON lines; diagnostics go to stderr.  Exit
codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import dataclasses
import json
import sys

import click

from . import dedup, eval as eval_harness, persist, verify_losses
from .ingest import DEFAULT_PORT, Pipeline, serve as run_server
from .model import PipelineConfig
from .reasoning import default_lexicon, load_lexicon


def _config_options(f):
    f = click.option("--tau", type=float, default=0.90, show_default=True,
                     help="Deduplication similarity threshold.")(f)
    f = click.option("--fps", type=float, default=1.25, show_default=True,
                     help="Target sampling rate (frames per second).")(f)
    f = click.option("--dim", type=int, default=384, show_default=True,
                     help="Embedding dimension.")(f)
    f = click.option("--reasoning-interval", type=float, default=5.0,
                     show_default=True, help="Seconds of stream time between reports.")(f)
    f = click.option("--llm", "llm_endpoint", type=str, default=None,
                     help="Enable the LLM path against this endpoint.")(f)
    f = click.option("--no-dedup", is_flag=True, help="Disable event deduplication.")(f)
    f = click.option("--lexicon", "lexicon_path", type=click.Path(exists=True),
                     default=None, help="Threat lexicon file.")(f)
    return f


def _build_config(tau, fps, dim, reasoning_interval, llm_endpoint, no_dedup) -> PipelineConfig:
    return PipelineConfig(
        dim=dim,
        tau_sim=tau,
        target_fps=fps,
        reasoning_interval=reasoning_interval,
        llm_endpoint=llm_endpoint,
        dedup_enabled=not no_dedup,
    )


def _load_lexicon(path):
    return load_lexicon(path) if path else default_lexicon()


@click.group()
def cli():
    """Real-time event-stream threat monitoring."""


@cli.command()
@_config_options
@click.option("--port", type=int, default=DEFAULT_PORT, show_default=True)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--max-conns", type=int, default=1, show_default=True)
def serve(tau, fps, dim, reasoning_interval, llm_endpoint, no_dedup, lexicon_path,
          port, host, max_conns):
    """Listen for newline-delimited event streams on a TCP port."""
    config = _build_config(tau, fps, dim, reasoning_interval, llm_endpoint, no_dedup)
    run_server(
        config,
        port=port,
        host=host,
        max_conns=max_conns,
        lexicon=_load_lexicon(lexicon_path),
    )


@cli.command()
@_config_options
@click.option("--input", "input_path", type=click.Path(exists=True), required=True,
              help="Wire-format stream file ('-' reads stdin).")
@click.option("--snapshot-out", type=click.Path(), default=None,
              help="Write the final knowledge-base snapshot here.")
def replay(tau, fps, dim, reasoning_interval, llm_endpoint, no_dedup, lexicon_path,
           input_path, snapshot_out):
    """Replay a recorded stream file, emitting reports to stdout."""
    config = _build_config(tau, fps, dim, reasoning_interval, llm_endpoint, no_dedup)
    pipe = Pipeline(config, lexicon=_load_lexicon(lexicon_path))
    source = sys.stdin if input_path == "-" else open(input_path, encoding="utf-8")
    try:
        for line in source:
            for report in pipe.process_line(line):
                sys.stdout.write(json.dumps(report.to_dict()) + "\n")
        for report in pipe.finish():
            sys.stdout.write(json.dumps(report.to_dict()) + "\n")
    finally:
        if source is not sys.stdin:
            source.close()
    if snapshot_out:
        persist.snapshot_save(pipe.kb, snapshot_out)
        click.echo(f"snapshot written to {snapshot_out}", err=True)
    click.echo(
        f"kept={pipe.stats.kept} dropped={pipe.stats.dropped} "
        f"clusters={len(pipe.kb)} reports={pipe.stats.reports}",
        err=True,
    )


@cli.command("eval")
@_config_options
@click.option("--input", "input_path", type=click.Path(exists=True), default=None,
              help="Labeled wire-format stream file.")
@click.option("--synthetic", type=int, default=None,
              help="Generate a synthetic labeled stream of N events instead.")
@click.option("--duplicate-rate", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--ablation", is_flag=True, help="Run the dedup x FPS ablation matrix.")
@click.option("--output", "output_path", type=click.Path(), default=None,
              help="Write the ablation table to this file.")
def eval_cmd(tau, fps, dim, reasoning_interval, llm_endpoint, no_dedup, lexicon_path,
             input_path, synthetic, duplicate_rate, seed, ablation, output_path):
    """Score a labeled stream: AUC/AP and optional ablation table."""
    config = _build_config(tau, fps, dim, reasoning_interval, llm_endpoint, no_dedup)
    lexicon = _load_lexicon(lexicon_path)
    if (input_path is None) == (synthetic is None):
        raise click.UsageError("provide exactly one of --input or --synthetic")
    if synthetic is not None:
        messages = eval_harness.generate_synthetic_stream(
            eval_harness.StreamSpec(
                n_events=synthetic, duplicate_rate=duplicate_rate, seed=seed
            )
        )
    else:
        from .ingest import decode_message

        messages = []
        with open(input_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    messages.append(decode_message(line))
    if ablation:
        rows = eval_harness.run_ablation(messages, config, lexicon=lexicon)
        table = eval_harness.format_ablation_table(rows)
        if output_path:
            with open(output_path, "w", encoding="utf-8") as fh:
                fh.write(table)
        sys.stdout.write(table)
    else:
        res = eval_harness.evaluate_stream(messages, config, lexicon=lexicon)
        auc = "n/a" if res.auc is None else f"{res.auc:.4f}"
        ap = "n/a" if res.ap is None else f"{res.ap:.4f}"
        click.echo(f"windows={len(res.window_pairs)} AUC={auc} AP={ap}")


@cli.group()
def kb():
    """Knowledge-base snapshot utilities."""


@kb.command("dump")
@click.option("--snapshot", "snapshot_path", type=click.Path(exists=True), required=True)
def kb_dump(snapshot_path):
    """Pretty-print the representative timeline of a snapshot."""
    loaded, _resume = persist.snapshot_load(snapshot_path)
    click.echo(f"clusters={len(loaded)} events={loaded.event_count}")
    for ts, desc, cid in dedup.timeline(loaded):
        cluster = loaded.clusters[cid]
        click.echo(
            f"[{ts:10.3f}] cluster {cid:4d} ({len(cluster.members)} members) {desc}"
        )


@cli.group()
def losses():
    """Training-objective reference math."""


@losses.command("check")
@click.option("--seed", type=int, default=0, show_default=True)
def losses_check(seed):
    """Run analytic-value and finite-difference verification."""
    results = verify_losses.run_all(seed=seed)
    failed = 0
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        click.echo(f"[{status}] {name}" + (f" ({detail})" if detail else ""))
        failed += 0 if ok else 1
    if failed:
        raise click.ClickException(f"{failed} loss check(s) failed")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 2
    except click.exceptions.Abort:
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
