"""Write the seeded synthetic benchmark (corpus, queries, qrels, mock vocabulary)."""

import argparse

from millqe.synthetic import make_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir")
    ap.add_argument("--docs", type=int, default=50)
    ap.add_argument("--queries", type=int, default=6)
    ap.add_argument("--distractors", type=int, default=3)
    ap.add_argument("--seed", type=int, default=13)
    args = ap.parse_args()
    bench = make_benchmark(args.docs, args.queries, args.distractors, args.seed)
    for name, path in bench.write(args.out_dir).items():
        print(f"{name}\t{path}")


if __name__ == "__main__":
    main()
