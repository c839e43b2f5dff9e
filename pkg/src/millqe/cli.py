"""Command-line entry point: ``millqe {index,run,eval,compare,case}``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .corpus import Query, RecordError, ingest, read_queries
from .embedder import Embedder
from .evalkit import (
    CUTOFFS,
    METRICS,
    DegenerateVarianceError,
    FormatError,
    evaluate,
    format_run_lines,
    measure_name,
    paired_ttest,
    parse_qrels,
    parse_run,
)
from .expander import ExpandedQuery, ExpansionError, expand
from .index import IndexBuildError, IndexFormatError, PostingsIndex, RankedList, build_index
from .llm_gateway import BackendError, HttpBackend, LLMGateway, ResponseCache
from .prompts import parse_qqd

log = logging.getLogger("millqe")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_BACKEND = 0, 1, 2, 3
SIGNIFICANCE = 0.05


class DataError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# --- shared construction ----------------------------------------------------------


def load_or_build_index(cfg: ExperimentConfig) -> PostingsIndex:
    if cfg.index:
        return PostingsIndex.load(cfg.index)
    if cfg.corpus:
        on_error = "raise" if cfg.strict else "skip"
        return build_index(ingest(cfg.corpus, cfg.corpus_format, on_error), cfg.analyzer())
    raise ConfigError("either an index or a corpus is required")


def make_backends(cfg: ExperimentConfig) -> tuple[LLMGateway, Embedder]:
    cache_dir = Path(cfg.cache_dir) if cfg.cache_dir else None
    gen_cache = ResponseCache(cache_dir / "generations.jsonl" if cache_dir else None)
    emb_cache = ResponseCache(cache_dir / "embeddings.jsonl" if cache_dir else None)
    gen_http = emb_http = None
    if cfg.llm_backend == "remote":
        gen_http = HttpBackend(cfg.llm_endpoint, retries=cfg.retries, max_in_flight=cfg.max_in_flight)
    if cfg.embed_backend == "remote":
        emb_http = HttpBackend(cfg.embed_endpoint, retries=cfg.retries, max_in_flight=cfg.max_in_flight)
    gateway = LLMGateway(
        cfg.llm_backend, cache=gen_cache, vocab=cfg.vocab(), mock_items=cfg.mock_items, seed=cfg.seed, http=gen_http
    )
    embedder = Embedder(
        cfg.embed_backend,
        model=cfg.embed_model,
        dim=cfg.embed_dim,
        cache=emb_cache,
        http=emb_http,
        max_chars=cfg.embed_max_chars,
    )
    return gateway, embedder


def run_queries(cfg: ExperimentConfig, index: PostingsIndex, queries: list[Query], gateway, embedder):
    """Expand and search every query; results come back in query order."""
    exp_cfg = cfg.expansion()

    def one(q: Query) -> tuple[Query, ExpandedQuery | None, RankedList | None, Exception | None]:
        try:
            eq = expand(q, exp_cfg, index, gateway, embedder)
        except ExpansionError as exc:
            if cfg.strict:
                raise
            log.error("skipping query %s: %s", q.query_id, exc)
            return q, None, None, exc
        ranked = index.search(eq.text, k=cfg.depth, params=exp_cfg.bm25, query_id=q.query_id)
        return q, eq, ranked, None

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(one, queries))


# --- subcommands ----------------------------------------------------------------------


def cmd_index(args, cfg: ExperimentConfig) -> int:
    if not cfg.corpus:
        raise ConfigError("--corpus is required")
    if not Path(cfg.corpus).exists():
        raise ConfigError(f"corpus not found: {cfg.corpus}")
    out = Path(args.out)
    if out.exists() and not args.force:
        raise ConfigError(f"{out} exists; pass --force to overwrite")
    on_error = "raise" if cfg.strict else "skip"
    index = build_index(ingest(cfg.corpus, cfg.corpus_format, on_error), cfg.analyzer())
    index.save(out)
    for key, value in index.stats().items():
        print(f"{key}\t{value}")
    return EXIT_OK


def cmd_run(args, cfg: ExperimentConfig) -> int:
    if not cfg.queries:
        raise ConfigError("--queries is required")
    cfg.validate()
    index = load_or_build_index(cfg)
    queries = read_queries(cfg.queries, on_error="raise" if cfg.strict else "skip")
    gateway, embedder = make_backends(cfg)
    results = run_queries(cfg, index, queries, gateway, embedder)

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = cfg.tag or cfg.expansion().label.replace("/", "").replace("*", "_star")
    failed = 0
    with open(out_dir / "run.trec", "w", encoding="utf-8") as run_fh, open(
        out_dir / "provenance.jsonl", "w", encoding="utf-8"
    ) as prov_fh, open(out_dir / "expanded.tsv", "w", encoding="utf-8") as exp_fh:
        for q, eq, ranked, err in results:
            if err is not None:
                failed += 1
                continue
            for line in format_run_lines(ranked, tag, cfg.depth):
                run_fh.write(line + "\n")
            prov_fh.write(json.dumps(eq.provenance, sort_keys=True) + "\n")
            exp_fh.write(f"{q.query_id}\t{' '.join(eq.text.split())}\n")
            if cfg.diagnostics and eq.verification is not None:
                diag_dir = out_dir / "diagnostics"
                diag_dir.mkdir(exist_ok=True)
                (diag_dir / f"{q.query_id}.json").write_text(json.dumps(case_data(eq), indent=2, sort_keys=True), encoding="utf-8")
    print(f"wrote {len(results) - failed} queries to {out_dir / 'run.trec'} ({failed} failed)")
    return EXIT_OK


def cmd_eval(args, cfg: ExperimentConfig) -> int:
    cutoffs = [int(c) for c in args.cutoffs.split(",")]
    report = evaluate(args.run, args.qrels, cutoffs=cutoffs, rel_threshold=args.rel_threshold)
    if args.out:
        Path(args.out + ".tsv").write_text(report.to_tsv(), encoding="utf-8")
        Path(args.out + ".json").write_text(report.to_json(), encoding="utf-8")
    for measure in report.measures:
        print(f"{measure}\t{report.mean[measure]:.4f}")
    return EXIT_OK


def compare_runs(run_a, run_b, qrels, metric: str, cutoff: int, rel_threshold: int = 1) -> dict:
    missing_a = sorted(set(run_b) - set(run_a))
    missing_b = sorted(set(run_a) - set(run_b))
    if missing_a or missing_b:
        raise DataError(f"query sets differ: missing from run A {missing_a}, missing from run B {missing_b}")
    measure = measure_name(metric, cutoff)
    a = evaluate(run_a, qrels, [cutoff], [metric], rel_threshold).values(measure)
    b = evaluate(run_b, qrels, [cutoff], [metric], rel_threshold).values(measure)
    qids = sorted(a)
    out = {"measure": measure, "n": len(qids), "mean_a": sum(a.values()) / len(qids), "mean_b": sum(b.values()) / len(qids)}
    try:
        t, p = paired_ttest([a[q] for q in qids], [b[q] for q in qids])
    except DegenerateVarianceError as exc:
        if not exc.identical:
            raise DataError(str(exc)) from exc
        return {**out, "t": None, "p": None, "verdict": "identical"}
    return {**out, "t": t, "p": p, "verdict": "significant" if p < SIGNIFICANCE else "not significant"}


def cmd_compare(args, cfg: ExperimentConfig) -> int:
    if args.metric not in METRICS:
        raise ConfigError(f"metric must be one of {', '.join(METRICS)}")
    res = compare_runs(parse_run(args.run_a), parse_run(args.run_b), parse_qrels(args.qrels), args.metric, args.cutoff, args.rel_threshold)
    if res["verdict"] == "identical":
        print(f"{res['measure']}: identical")
    else:
        print(
            f"{res['measure']}: A={res['mean_a']:.4f} B={res['mean_b']:.4f} "
            f"t={res['t']:.6f} p={res['p']:.6g} {res['verdict']}"
        )
    return EXIT_OK


def case_data(eq: ExpandedQuery) -> dict:
    """Selected and filtered candidates for one expanded query."""
    prov = eq.provenance
    data = {
        "query_id": eq.query_id,
        "query": prov["original_query"],
        "method": prov.get("method"),
        "expanded_query": eq.text,
    }
    if eq.verification is None:
        data["components"] = prov["components"]
        return data
    diag = eq.verification.to_diagnostics()
    for side in ("prf", "llm"):
        by_rank = {r["origin_rank"]: r for r in diag[side]}
        selected = getattr(eq.verification, f"selected_{side}")
        data[f"selected_{side}"] = [_case_row(by_rank[d.origin_rank], side) for d in selected]
        data[f"filtered_{side}"] = [_case_row(r, side) for r in diag[side] if not r["selected"]]
    data["similarity_grid"] = diag["similarity_grid"]
    return data


def _case_row(row: dict, side: str) -> dict:
    out = {"ref": row["ref"], "origin_rank": row["origin_rank"], "score": row["score"], "text": row["text"]}
    if side == "llm":
        out["sub_queries"] = [{"sub_query": q, "passage": p} for q, p in parse_qqd(row["text"]) if q]
    return out


def _clip(text: str, width: int = 160) -> str:
    text = " ".join(text.split())
    return text if len(text) <= width else text[: width - 3] + "..."


def render_case(data: dict) -> str:
    lines = [f"Query {data['query_id']}: {data['query']}", f"Method: {data['method']}"]
    if "components" in data:
        lines.append("Components:")
        lines += [f"  {c['source']} {c['ref']}" for c in data["components"]]
        lines.append(f"Expanded query: {_clip(data['expanded_query'], 400)}")
        return "\n".join(lines) + "\n"
    for side, title in (("prf", "retrieved (PRF)"), ("llm", "generated")):
        for status in ("selected", "filtered"):
            rows = data[f"{status}_{side}"]
            lines.append(f"{status.capitalize()} {title} documents ({len(rows)}):")
            for r in rows:
                lines.append(f"  [{r['ref']}] score={r['score']:.4f}  {_clip(r['text'])}")
                for sq in r.get("sub_queries", []):
                    lines.append(f"      sub-query: {_clip(sq['sub_query'], 80)}")
    lines.append(f"Expanded query: {_clip(data['expanded_query'], 400)}")
    return "\n".join(lines) + "\n"


def cmd_case(args, cfg: ExperimentConfig) -> int:
    if not cfg.queries:
        raise ConfigError("--queries is required")
    cfg.validate()
    queries = {q.query_id: q for q in read_queries(cfg.queries)}
    if args.query_id not in queries:
        raise DataError(f"query {args.query_id} not found in {cfg.queries}")
    index = load_or_build_index(cfg)
    gateway, embedder = make_backends(cfg)
    eq = expand(queries[args.query_id], cfg.expansion(), index, gateway, embedder)
    data = case_data(eq)
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(data, indent=2, sort_keys=True), encoding="utf-8")
    sys.stdout.write(render_case(data))
    return EXIT_OK


# --- argument parsing ------------------------------------------------------------------

_RUN_FLAGS = {
    "--config": dict(help="TOML experiment config; flags override it"),
    "--corpus": dict(),
    "--corpus-format": dict(choices=["jsonl", "tsv"]),
    "--index": dict(),
    "--queries": dict(),
    "--output-dir": dict(),
    "--tag": dict(),
    "--method": dict(help="MILL, w/o_PRF, w/o_MV, w/o_QQD, baseline, ensembled, no-expansion"),
    "--prompt-kind": dict(help="prompt for baseline/ensembled methods, e.g. Query2Doc-FS"),
    "--n-candidates": dict(type=int),
    "--k-candidates": dict(type=int),
    "--n-select": dict(type=int),
    "--k-select": dict(type=int),
    "--query-repeats": dict(type=int),
    "--baseline-samples": dict(type=int),
    "--ensembled-prf": dict(type=int),
    "--shots": dict(help="few-shot examples as JSONL {query, completion}"),
    "--depth": dict(type=int),
    "--llm-backend": dict(choices=["mock", "remote"]),
    "--llm-endpoint": dict(),
    "--llm-model": dict(),
    "--embed-backend": dict(choices=["mock", "remote"]),
    "--embed-endpoint": dict(),
    "--embed-model": dict(),
    "--embed-dim": dict(type=int),
    "--cache-dir": dict(),
    "--vocab-file": dict(help="mock generator vocabulary, one word per line"),
    "--seed": dict(type=int),
    "--workers": dict(type=int),
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    for flag, kw in _RUN_FLAGS.items():
        p.add_argument(flag, default=None, **kw)
    p.add_argument("--strict", action="store_true", default=None, help="abort on the first bad record or failed query")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="millqe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="build and serialize a BM25 index")
    p.add_argument("--config", default=None)
    p.add_argument("--corpus", default=None)
    p.add_argument("--corpus-format", choices=["jsonl", "tsv"], default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--strict", action="store_true", default=None)
    p.add_argument("--no-stopwords", dest="stopwords", action="store_false", default=None)
    p.add_argument("--no-stemming", dest="stemming", action="store_false", default=None)
    p.add_argument("--no-lowercase", dest="lowercase", action="store_false", default=None)

    p = sub.add_parser("run", help="expand queries, retrieve, and write a TREC run")
    _add_run_flags(p)
    p.add_argument("--diagnostics", action="store_true", default=None, help="dump per-query verification JSON")

    p = sub.add_parser("eval", help="evaluate a run against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--cutoffs", default=",".join(map(str, CUTOFFS)))
    p.add_argument("--rel-threshold", type=int, default=1)
    p.add_argument("--out", help="write <out>.tsv and <out>.json")

    p = sub.add_parser("compare", help="paired t-test between two runs")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--qrels", required=True)
    p.add_argument("--metric", default="NDCG")
    p.add_argument("--cutoff", type=int, default=10)
    p.add_argument("--rel-threshold", type=int, default=1)

    p = sub.add_parser("case", help="render expansion diagnostics for one query")
    _add_run_flags(p)
    p.add_argument("--query-id", required=True)
    p.add_argument("--json", dest="json_out", help="also write the case data as JSON")
    return parser


_COMMANDS = {"index": cmd_index, "run": cmd_run, "eval": cmd_eval, "compare": cmd_compare, "case": cmd_case}
_NOT_CONFIG = {"command", "verbose", "config", "out", "force", "query_id", "json_out", "run", "qrels", "cutoffs",
               "rel_threshold", "run_a", "run_b", "metric", "cutoff"}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG}
        cfg = load_config(getattr(args, "config", None), overrides)
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, argparse.ArgumentTypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExpansionError as exc:
        code = EXIT_BACKEND if isinstance(exc.__cause__, BackendError) else EXIT_DATA
        print(f"error: {exc}", file=sys.stderr)
        return code
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (RecordError, FormatError, IndexBuildError, IndexFormatError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
