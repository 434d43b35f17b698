"""Aspect- and rating-controlled selection: label sentences with a keyword
lexicon, estimate label likelihoods per path, and reweight the specific
subpath scores toward a target aspect or rating."""

import json
import tempfile
from pathlib import Path

import numpy as np

from hrqsum import (AspectLexicon, QuantizerConfig, assemble, build_tree,
                    embed_builtin, encode_batch, fit, fit_control,
                    label_aspects, load_corpus, select_generic,
                    select_specific)

# grand-plaza's distinctive opinions: excellent breakfast (rated 5) and rude
# reception (rated 1); the other entities talk about other things, plus a
# shared pool opinion that carries no distinctive signal.
DISTINCTIVE = {
    "grand-plaza": [("the breakfast buffet was excellent", 5),
                    ("the breakfast buffet was excellent", 5),
                    ("reception staff were rude at checkin", 1),
                    ("reception staff were rude at checkin", 1)],
    "budget-stop": [("the mattress sagged badly", 2),
                    ("the mattress sagged badly", 2)],
    "lake-lodge": [("the balcony view covered the lake", 5),
                   ("the balcony view covered the lake", 5)],
}
SHARED = ("the pool was fine", 4)

rng = np.random.default_rng(2)
lines = []
rid = 0
for entity, extras in DISTINCTIVE.items():
    picks = list(extras) * 6 + [SHARED] * 8
    for text, rating in picks:
        lines.append(json.dumps({
            "entity_id": entity, "review_id": f"r{rid}", "rating": rating,
            "sentences": [text + "."]}))
        rid += 1

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "reviews.jsonl"
    path.write_text("\n".join(lines) + "\n")
    corpus = load_corpus(path)

lexicon = AspectLexicon({
    "food": {"breakfast", "buffet"},
    "service": {"staff", "reception", "checkin"},
    "rooms": {"mattress", "balcony"},
})
corpus = label_aspects(corpus, lexicon)

matrix = embed_builtin(corpus, dim=64, seed=2)
codebook, _ = fit(matrix, levels=3, codebook_size=6,
                  config=QuantizerConfig(epochs=10, seed=2))
paths = encode_batch(matrix, codebook)
path_map = {sid: tuple(int(c) for c in paths[i])
            for i, sid in enumerate(corpus.sentence_ids())}
trees = {eid: build_tree(entity, path_map)
         for eid, entity in corpus.entities.items()}

aspect_model = fit_control(corpus, path_map, "aspect")
rating_model = fit_control(corpus, path_map, "rating")

entity = "grand-plaza"
tree = trees[entity]
generic = select_generic(tree, k=1)
print("generic pick:", generic[0].path,
      f"(prob {generic[0].score:.2f})")

for label, control in (("uncontrolled", None),
                       ("aspect=food", (aspect_model, "food")),
                       ("aspect=service", (aspect_model, "service")),
                       ("rating=1", (rating_model, 1)),
                       ("rating=5", (rating_model, 5))):
    specific = select_specific(trees, entity, k=1, control=control)
    summary = assemble(entity, [], specific, "extractive", tree, corpus)
    texts = [s.text for s in summary.sentences]
    print(f"{label:>16}: " + " | ".join(texts))
