"""Command-line pipelines: score, evaluate, bestofn, embed, sample, simulate.

Every subcommand is deterministic given its inputs, cache state, and seeds;
network-free paths are byte-reproducible. Per-record problems are printed as
diagnostics and skipped in lenient mode (use --strict to abort instead), and
each run ends with a summary line reporting records read, scored, skipped,
and network calls made. Existing outputs are never overwritten without
--force.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import pipeline
from .clients import (
    EMBED_URL_ENV,
    LLM_URL_ENV,
    EmbeddingClient,
    EndpointConfig,
    LLMClient,
    SamplingConfig,
)
from .dataio import (
    EmbeddingCache,
    PromptRecord,
    read_records,
    read_score_rows,
    write_records,
    write_sidecar,
)
from .errors import PartialBatch, RdskitError
from .simulate import REGIMES, RegimeConfig, sweep_csv

DEFAULT_EMBED_MODEL = "all-MiniLM-L6-v2"

_CORRECTNESS_FLAG = {"exact": "exact_match", "rouge": "rouge_gate"}

# Test seam: a zero-arg callable returning an httpx transport lets the test
# suite point the clients at an in-process fake endpoint.
_transport_factory = None


def _make_transport():
    return _transport_factory() if _transport_factory is not None else None


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RdskitError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdskit",
        description="Radial dispersion scoring and evaluation for sampled LLM generations.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, *, output=True):
        p.add_argument("--input", required=True, help="input JSONL path")
        if output:
            p.add_argument("--output", required=True, help="output path")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--strict", action="store_true", help="abort on the first bad record")
        p.add_argument("--workers", type=int, default=1, help="record-parallel workers")

    def add_embed_endpoint(p):
        p.add_argument("--embed-url", default=None, help=f"embedding endpoint (or ${EMBED_URL_ENV})")
        p.add_argument("--embed-model", default=DEFAULT_EMBED_MODEL, help="encoder model name")
        add_endpoint_tuning(p)

    def add_endpoint_tuning(p):
        p.add_argument("--timeout", type=float, default=30.0)
        p.add_argument("--max-retries", type=int, default=3)
        p.add_argument("--max-in-flight", type=int, default=4)
        p.add_argument("--batch-size", type=int, default=64)
        p.add_argument("--cache-dir", default=None, help="embedding cache dir (or $RDSKIT_CACHE_DIR)")

    def add_eval_options(p, default_methods):
        p.add_argument("--scores", default=None, help="reuse a score JSONL instead of rescoring")
        p.add_argument("--methods", default=default_methods, help="comma-separated method names")
        p.add_argument("--correctness", choices=("exact", "rouge"), default=None,
                       help="override each record's correctness mode")
        p.add_argument("--rouge-threshold", type=float, default=0.3)

    p = sub.add_parser("score", help="compute dispersion and baseline scores per record")
    add_common(p)
    add_embed_endpoint(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="hallucination-detection AUROC per method")
    add_common(p)
    add_embed_endpoint(p)
    add_eval_options(p, ",".join(pipeline.PROMPT_METHODS))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bestofn", help="best-of-N selection accuracy per method")
    add_common(p)
    add_embed_endpoint(p)
    add_eval_options(p, ",".join(pipeline.SAMPLE_METHODS))
    p.set_defaults(func=cmd_bestofn)

    p = sub.add_parser("embed", help="fill in missing embeddings via the endpoint")
    add_common(p)
    add_embed_endpoint(p)
    p.add_argument("--sidecar", action="store_true",
                   help="write vectors to a binary sidecar (embeds greedy texts too)")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("sample", help="draw N completions per prompt from an LLM endpoint")
    add_common(p)
    p.add_argument("--llm-url", default=None, help=f"chat endpoint (or ${LLM_URL_ENV})")
    p.add_argument("--llm-model", default=None, help="model name for sampling")
    p.add_argument("--n-samples", type=int, default=10)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-tokens", type=int, default=256)
    add_endpoint_tuning(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("simulate", help="emit regime sweep CSV for plotting")
    p.add_argument("--output", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--regimes", default=",".join(REGIMES), help="comma-separated regimes")
    p.add_argument("--n-samples", type=int, default=10)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--noise", default="0.0", help="comma-separated noise levels")
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    return parser


def _guard_output(path: str, force: bool) -> Path:
    out = Path(path)
    if out.exists() and not force:
        raise RdskitError(f"output {out} exists; pass --force to overwrite")
    return out


def _print_diags(diags) -> None:
    for d in diags:
        print(f"diag: {d}", file=sys.stderr)


def _summary(**fields) -> None:
    parts = " ".join(f"{k}={v}" for k, v in fields.items())
    print(f"summary: {parts}", file=sys.stderr)


def _read_all(args):
    diags = []
    records = list(read_records(args.input, strict=args.strict, diagnostics=diags))
    _print_diags(diags)
    return records, len(diags)


def _embedding_client(args) -> EmbeddingClient | None:
    url = args.embed_url or os.environ.get(EMBED_URL_ENV)
    if not url:
        return None
    cfg = EndpointConfig(
        base_url=url,
        model=args.embed_model,
        timeout=args.timeout,
        max_retries=args.max_retries,
        max_in_flight=args.max_in_flight,
        batch_size=args.batch_size,
    )
    return EmbeddingClient(cfg, cache=EmbeddingCache(args.cache_dir), transport=_make_transport())


def _resolve_embeddings(records, client) -> tuple[dict[str, list[float]], int]:
    """Embed every sample text that lacks a stored vector; returns text->vector."""
    texts = [s.text for rec in records for s in rec.samples if s.embedding is None]
    if not texts:
        return {}, 0
    if client is None:
        raise pipeline.MissingEmbeddings(
            "input records lack embeddings and no embedding endpoint is configured; "
            f"pass --embed-url (or set ${EMBED_URL_ENV}) or run 'rdskit embed' first"
        )
    unique = list(dict.fromkeys(texts))
    vectors = client.embed_batch(unique)
    return {t: v for t, v in zip(unique, vectors)}, client.network_calls


def _score_records(records, lookup, workers: int, strict: bool):
    """Score records in input order; per-record failures become diagnostics."""
    embed_lookup = (lambda text: lookup[text]) if lookup else None

    def one(rec):
        try:
            return pipeline.score_record(rec, embed_lookup), None
        except (RdskitError, ValueError) as e:
            if strict:
                raise
            return None, f"record {rec.id!r}: {e}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, records))
    else:
        results = [one(rec) for rec in records]
    rows = []
    skipped = 0
    for rec, (row, err) in zip(records, results):
        if err is not None:
            print(f"diag: {err}", file=sys.stderr)
            skipped += 1
        else:
            rows.append(row)
    return rows, skipped


def cmd_score(args) -> int:
    out = _guard_output(args.output, args.force)
    records, n_bad_lines = _read_all(args)
    with contextlib.ExitStack() as stack:
        client = _embedding_client(args)
        if client is not None:
            stack.enter_context(client)
        lookup, net_calls = _resolve_embeddings(records, client)
        rows, skipped = _score_records(records, lookup, args.workers, args.strict)
    with out.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    _summary(
        read=len(records) + n_bad_lines,
        scored=len(rows),
        skipped=skipped + n_bad_lines,
        network_calls=net_calls,
        rds_w_null=sum(1 for r in rows if r["rds_w"] is None),
    )
    return 0


def _rows_for_eval(args, records) -> tuple[dict[str, dict], int, int]:
    if args.scores:
        rows = read_score_rows(args.scores)
        return {r["id"]: r for r in rows if "id" in r}, 0, 0
    with contextlib.ExitStack() as stack:
        client = _embedding_client(args)
        if client is not None:
            stack.enter_context(client)
        lookup, net_calls = _resolve_embeddings(records, client)
        rows, skipped = _score_records(records, lookup, args.workers, args.strict)
    return {r["id"]: r for r in rows}, net_calls, skipped


def _report_paths(args) -> tuple[Path, Path]:
    out = _guard_output(args.output, args.force)
    csv_path = out.with_suffix(".csv") if out.suffix == ".json" else Path(str(out) + ".csv")
    if csv_path.exists() and not args.force:
        raise RdskitError(f"output {csv_path} exists; pass --force to overwrite")
    return out, csv_path


def cmd_evaluate(args) -> int:
    json_path, csv_path = _report_paths(args)
    records, n_bad_lines = _read_all(args)
    rows_by_id, net_calls, skipped = _rows_for_eval(args, records)
    report = pipeline.build_detection_report(
        records,
        rows_by_id,
        methods=args.methods.split(","),
        mode_override=_CORRECTNESS_FLAG.get(args.correctness),
        rouge_threshold=args.rouge_threshold,
    )
    json_path.write_text(report.to_json(), encoding="utf-8")
    csv_path.write_text(report.to_csv(), encoding="utf-8")
    _summary(
        read=len(records) + n_bad_lines,
        scored=report.n_prompts,
        skipped=skipped + n_bad_lines,
        network_calls=net_calls,
    )
    return 0


def cmd_bestofn(args) -> int:
    json_path, csv_path = _report_paths(args)
    records, n_bad_lines = _read_all(args)
    for rec in records:
        if not rec.references:
            raise RdskitError(
                f"record {rec.id!r} has no references; best-of-N needs per-sample correctness"
            )
    rows_by_id, net_calls, skipped = _rows_for_eval(args, records)
    report = pipeline.build_best_of_n_report(
        records,
        rows_by_id,
        methods=args.methods.split(","),
        mode_override=_CORRECTNESS_FLAG.get(args.correctness),
        rouge_threshold=args.rouge_threshold,
    )
    json_path.write_text(report.to_json(), encoding="utf-8")
    csv_path.write_text(report.to_csv(), encoding="utf-8")
    _summary(
        read=len(records) + n_bad_lines,
        scored=report.n_prompts,
        skipped=skipped + n_bad_lines,
        network_calls=net_calls,
    )
    return 0


def cmd_embed(args) -> int:
    out = _guard_output(args.output, args.force)
    side_path = Path(str(out) + ".embs")
    if args.sidecar and side_path.exists() and not args.force:
        raise RdskitError(f"output {side_path} exists; pass --force to overwrite")
    records, n_bad_lines = _read_all(args)
    need = []
    for rec in records:
        gens = [rec.greedy, *rec.samples] if args.sidecar else rec.samples
        need.extend(g.text for g in gens if g.embedding is None)
    unique = list(dict.fromkeys(need))
    lookup: dict[str, list[float]] = {}
    net_calls = 0
    if unique:
        client = _embedding_client(args)
        if client is None:
            raise RdskitError(
                f"no embedding endpoint configured; pass --embed-url or set ${EMBED_URL_ENV}"
            )
        with client:
            vectors = client.embed_batch(unique)
            net_calls = client.network_calls
        lookup = {t: [float(x) for x in v] for t, v in zip(unique, vectors)}
    for rec in records:
        gens = [rec.greedy, *rec.samples] if args.sidecar else rec.samples
        for g in gens:
            if g.embedding is None:
                g.embedding = lookup[g.text]
    if args.sidecar:
        rows = [g.embedding for rec in records for g in (rec.greedy, *rec.samples)]
        write_sidecar(side_path, np.asarray(rows, dtype=np.float64))
        for rec in records:
            rec.greedy.embedding = None
            for s in rec.samples:
                s.embedding = None
    write_records(out, records)
    _summary(
        read=len(records) + n_bad_lines,
        scored=len(records),
        skipped=n_bad_lines,
        network_calls=net_calls,
    )
    return 0


def _read_prompt_lines(path: str, strict: bool):
    """Parse minimal prompt-only JSONL ({"id","prompt",...}) for cmd_sample."""
    rows = []
    diags = 0
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            problem = None
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                problem = f"invalid JSON: {e}"
                obj = None
            if obj is not None:
                if not isinstance(obj, dict) or not isinstance(obj.get("id"), str) or not obj.get("id"):
                    problem = "missing string id"
                elif not isinstance(obj.get("prompt"), str) or not obj.get("prompt"):
                    problem = "missing non-empty prompt"
            if problem:
                if strict:
                    raise RdskitError(f"line {line_no}: {problem}")
                print(f"diag: line {line_no}: {problem}", file=sys.stderr)
                diags += 1
                continue
            rows.append(obj)
    return rows, diags


def cmd_sample(args) -> int:
    out = _guard_output(args.output, args.force)
    url = args.llm_url or os.environ.get(LLM_URL_ENV)
    if not url:
        raise RdskitError(f"no LLM endpoint configured; pass --llm-url or set ${LLM_URL_ENV}")
    if not args.llm_model:
        raise RdskitError("pass --llm-model to choose the sampling model")
    cfg = EndpointConfig(
        base_url=url,
        model=args.llm_model,
        timeout=args.timeout,
        max_retries=args.max_retries,
        max_in_flight=args.max_in_flight,
        batch_size=args.batch_size,
    )
    sampling = SamplingConfig(
        n=args.n_samples, temperature=args.temperature, max_tokens=args.max_tokens
    )
    prompts, diags = _read_prompt_lines(args.input, args.strict)
    records: list[PromptRecord] = []
    skipped = 0
    with LLMClient(cfg, transport=_make_transport()) as client:
        for obj in prompts:
            try:
                greedy = client.greedy_generation(obj["prompt"], max_tokens=args.max_tokens)
                samples = client.sample_generations(obj["prompt"], sampling)
            except PartialBatch as e:
                if args.strict:
                    raise
                print(f"diag: record {obj['id']!r}: {e}", file=sys.stderr)
                skipped += 1
                continue
            records.append(
                PromptRecord(
                    id=obj["id"],
                    prompt=obj["prompt"],
                    greedy=greedy,
                    samples=samples,
                    references=list(obj.get("references", [])),
                    dataset_tag=str(obj.get("dataset_tag", "")),
                    correctness_mode=str(obj.get("correctness_mode", "exact_match")),
                )
            )
        net_calls = client.network_calls
    write_records(out, records)
    _summary(
        read=len(prompts) + diags,
        scored=len(records),
        skipped=skipped + diags,
        network_calls=net_calls,
    )
    return 0


def cmd_simulate(args) -> int:
    out = _guard_output(args.output, args.force)
    regimes = [r.strip() for r in args.regimes.split(",") if r.strip()]
    noises = [float(x) for x in args.noise.split(",")]
    configs = [
        RegimeConfig(
            regime=regime,
            n=args.n_samples,
            dim=args.dim,
            noise=noise,
            clusters=args.clusters,
            seed=args.seed,
        )
        for regime in regimes
        for noise in noises
    ]
    out.write_text(sweep_csv(configs), encoding="utf-8")
    _summary(read=len(configs), scored=len(configs), skipped=0, network_calls=0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
