"""Seeded synthetic retrieval benchmark for offline pipeline checks.

Each query has two topic words and three relevant documents tied together by
a rare marker token:

* the *anchor* holds both topic words and the marker (repeated),
* the *bridge* is short and holds one topic word plus the marker,
* the *hidden* document holds the marker but no topic word, so plain BM25 on
  the query cannot reach it.

Long *distractor* documents repeat the topic words inside unrelated filler, so
they crowd the top of the original ranking and make noisy PRF candidates.
The mock generator's vocabulary is the set of markers.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Document, Query

_ONSETS = "b c d f g h j k l m n p r s t v z".split()
_VOWELS = "a e i o u".split()


def _pseudo_word(rng: random.Random, syllables: int) -> str:
    return "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(syllables)) + rng.choice("kmnrt")


@dataclass
class SyntheticBenchmark:
    docs: list[Document]
    queries: list[Query]
    qrels: dict[str, dict[str, int]]
    markers: dict[str, str]
    distractors: dict[str, list[str]] = field(default_factory=dict)

    @property
    def vocab(self) -> list[str]:
        return [self.markers[q.query_id] for q in self.queries]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": out / "corpus.jsonl",
            "queries": out / "queries.tsv",
            "qrels": out / "qrels.txt",
            "vocab": out / "vocab.txt",
        }
        with open(paths["corpus"], "w", encoding="utf-8") as fh:
            for d in self.docs:
                fh.write(json.dumps({"_id": d.doc_id, "title": "", "text": d.text}) + "\n")
        with open(paths["queries"], "w", encoding="utf-8") as fh:
            for q in self.queries:
                fh.write(f"{q.query_id}\t{q.text}\n")
        with open(paths["qrels"], "w", encoding="utf-8") as fh:
            for qid, judged in self.qrels.items():
                for doc_id, grade in judged.items():
                    fh.write(f"{qid} 0 {doc_id} {grade}\n")
        paths["vocab"].write_text("\n".join(self.vocab) + "\n", encoding="utf-8")
        return paths


def make_benchmark(n_docs: int = 50, n_queries: int = 6, distractors_per_query: int = 3, seed: int = 13) -> SyntheticBenchmark:
    per_query = 3 + distractors_per_query
    if n_queries * per_query > n_docs:
        raise ValueError(f"{n_queries} queries need at least {n_queries * per_query} documents")
    rng = random.Random(seed)
    used: set[str] = set()

    def fresh(syllables: int) -> str:
        while True:
            w = _pseudo_word(rng, syllables)
            if w not in used:
                used.add(w)
                return w

    filler = [fresh(3) for _ in range(3000)]

    def noise(k: int) -> list[str]:
        return [rng.choice(filler) for _ in range(k)]

    def passage(words: list[str]) -> str:
        rng.shuffle(words)
        return " ".join(words)

    docs: list[Document] = []
    queries: list[Query] = []
    qrels: dict[str, dict[str, int]] = {}
    markers: dict[str, str] = {}
    distractors: dict[str, list[str]] = {}
    counter = 0

    def add(words: list[str]) -> str:
        nonlocal counter
        doc_id = f"D{counter:03d}"
        counter += 1
        docs.append(Document(doc_id, passage(words)))
        return doc_id

    for qi in range(n_queries):
        qid = f"Q{qi:02d}"
        topic_a, topic_b, marker = fresh(3), fresh(3), fresh(4)
        markers[qid] = marker
        queries.append(Query(qid, f"{topic_a} {topic_b}"))
        anchor = add([topic_a, topic_b, marker, marker, marker] + noise(6))
        bridge = add([topic_a, marker] + noise(2))
        hidden = add([marker] + noise(8))
        qrels[qid] = {anchor: 2, bridge: 1, hidden: 1}
        distractors[qid] = [
            add([topic_a, topic_a, topic_b, topic_b] + noise(rng.randint(30, 45)))
            for _ in range(distractors_per_query)
        ]

    while counter < n_docs:
        add(noise(rng.randint(10, 30)))

    return SyntheticBenchmark(docs, queries, qrels, markers, distractors)
