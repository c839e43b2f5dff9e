"""Run every expansion method on the synthetic benchmark with mock backends.

Prints a metric table plus a paired t-test of each method against
no-expansion. Everything runs offline and is deterministic for a given seed.
"""

import argparse

from millqe.embedder import Embedder
from millqe.evalkit import DegenerateVarianceError, evaluate, paired_ttest
from millqe.expander import ExpansionConfig, PipelineExpander
from millqe.index import build_index
from millqe.llm_gateway import LLMGateway
from millqe.synthetic import make_benchmark

METHODS = [
    dict(method="no-expansion"),
    dict(method="MILL"),
    dict(method="w/o_PRF"),
    dict(method="w/o_MV"),
    dict(method="w/o_QQD"),
    dict(method="baseline", prompt_kind="Query2Doc"),
    dict(method="ensembled", prompt_kind="Query2Doc"),
    dict(method="baseline", prompt_kind="CoT"),
    dict(method="ensembled", prompt_kind="CoT"),
]
MEASURES = ["NDCG@10", "AP@10", "Recall@10", "MRR@10", "Recall@100"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=13, help="benchmark seed")
    ap.add_argument("--mock-seed", type=int, default=0)
    ap.add_argument("--docs", type=int, default=50)
    ap.add_argument("--queries", type=int, default=6)
    args = ap.parse_args()

    bench = make_benchmark(n_docs=args.docs, n_queries=args.queries, seed=args.seed)
    index = build_index(bench.docs)
    gateway = LLMGateway("mock", vocab=bench.vocab, seed=args.mock_seed)
    embedder = Embedder("mock")

    reports = {}
    for kw in METHODS:
        cfg = ExpansionConfig(**kw)
        exp = PipelineExpander(cfg, index, gateway, embedder)
        run = {q.query_id: index.search(exp.expand(q).text, k=1000).entries for q in bench.queries}
        reports[cfg.label] = evaluate(run, bench.qrels, cutoffs=(10, 100))

    base = reports["no-expansion"]
    print("method".ljust(14) + "".join(m.rjust(12) for m in MEASURES) + "   p(Recall@10 vs none)")
    for label, rep in reports.items():
        row = label.ljust(14) + "".join(f"{rep.mean[m]:12.4f}" for m in MEASURES)
        qids = sorted(rep.per_query)
        try:
            _, p = paired_ttest([rep.per_query[q]["Recall@10"] for q in qids], [base.per_query[q]["Recall@10"] for q in qids])
            row += f"   {p:.4f}"
        except DegenerateVarianceError as exc:
            row += "   identical" if exc.identical else "   constant shift"
        print(row)


if __name__ == "__main__":
    main()
