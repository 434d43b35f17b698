"""End-to-end pipeline on a small synthetic review corpus: embed, fit the
codebook, encode paths, build frequency trees, select generic and specific
subpaths, and print the attributed extractive summary."""

import json
import tempfile
from pathlib import Path

import numpy as np

from hrqsum import (QuantizerConfig, assemble, build_tree, embed_builtin,
                    encode_batch, fit, load_corpus, select_generic,
                    select_specific)

TOPICS = {
    "pool": ["the pool was warm and clean", "we loved the heated pool",
             "the pool area was spotless"],
    "food": ["breakfast was fresh and varied", "the buffet had generous choice",
             "food was tasty every morning"],
    "noise": ["street noise kept us awake", "the room was noisy at night"],
    "staff": ["staff were kind and helpful", "reception staff were friendly"],
}

rng = np.random.default_rng(0)
lines = []
rid = 0
for entity, topic_weights in (("seaside-inn", [0.5, 0.3, 0.1, 0.1]),
                              ("city-hotel", [0.1, 0.2, 0.4, 0.3])):
    names = list(TOPICS)
    for _ in range(30):
        topic = names[rng.choice(len(names), p=topic_weights)]
        text = TOPICS[topic][rng.integers(len(TOPICS[topic]))]
        lines.append(json.dumps({"entity_id": entity, "review_id": f"r{rid}",
                                 "rating": int(rng.integers(1, 6)),
                                 "sentences": [text + "."]}))
        rid += 1

with tempfile.TemporaryDirectory() as tmp:
    corpus_path = Path(tmp) / "reviews.jsonl"
    corpus_path.write_text("\n".join(lines) + "\n")
    corpus = load_corpus(corpus_path)

print(f"corpus: {len(corpus)} sentences across {len(corpus.entities)} entities")

matrix = embed_builtin(corpus, dim=64, seed=0)
codebook, report = fit(matrix, levels=3, codebook_size=4,
                       config=QuantizerConfig(epochs=10, seed=0))
print(f"fit: final recon {report.epochs[-1].recon:.4f} "
      f"(tau {report.epochs[-1].tau:.3f})")

paths = encode_batch(matrix, codebook)
path_map = {sid: tuple(int(c) for c in paths[i])
            for i, sid in enumerate(corpus.sentence_ids())}
trees = {eid: build_tree(entity, path_map)
         for eid, entity in corpus.entities.items()}

for eid, tree in trees.items():
    generic = select_generic(tree, k=2, threshold=0.01)
    specific = select_specific(trees, eid, k=2)
    summary = assemble(eid, generic, specific, "extractive", tree, corpus,
                       codebook=codebook, embeddings=matrix)
    print(f"\n=== {eid} ===")
    for sent in summary.sentences:
        print(f"[{sent.kind:8s}] path={sent.subpath} score={sent.score:.3f} "
              f"evidence={len(sent.evidence)}")
        print(f"           \"{sent.text}\"")
        for sid in sent.evidence[:3]:
            print(f"             <- {corpus.sentence(sid).text}")
