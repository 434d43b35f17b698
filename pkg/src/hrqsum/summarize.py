"""Summary assembly: evidence sets for selected subpaths, extractive
centroid sentences, nearest-sentence latent decoding, and the final
attributed summary."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aggregate import AggregateError, PathTree, ScoredSubpath
from .corpus import Corpus, bigrams, tokenize
from .embedder import EmbeddingMatrix
from .hrq import Codebook, decode


@dataclass(frozen=True)
class EvidenceSet:
    subpath: tuple[int, ...]
    sentence_ids: tuple[str, ...]
    texts: tuple[str, ...]


def evidence_set(subpath, tree: PathTree, corpus: Corpus) -> EvidenceSet:
    """All sentences whose encoded path extends the subpath."""
    node = tree.node_for(subpath)
    if node is None:
        raise AggregateError(f"subpath {tuple(subpath)} not present in tree "
                             f"for entity {tree.entity_id!r}")
    ids = tree.members(node)
    return EvidenceSet(subpath=tuple(int(c) for c in subpath), sentence_ids=ids,
                       texts=tuple(corpus.sentence(i).text for i in ids))


def _pair_f1(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    overlap = sum(min(count, b[gram]) for gram, count in a.items())
    if overlap == 0:
        return 0.0
    precision = overlap / sum(a.values())
    recall = overlap / sum(b.values())
    return 2.0 * precision * recall / (precision + recall)


def centroid_sentence(evidence: EvidenceSet) -> str:
    """Member with the highest mean ROUGE-2 F1 against all other members
    (the medoid); ties go to the smallest sentence id. Quadratic in the
    evidence size."""
    if not evidence.sentence_ids:
        raise AggregateError("evidence set is empty")
    if len(evidence.sentence_ids) == 1:
        return evidence.sentence_ids[0]
    grams = [Counter(bigrams(tokenize(text))) for text in evidence.texts]
    n = len(grams)
    best_id, best_score = None, -1.0
    for i in range(n):
        mean = sum(_pair_f1(grams[i], grams[j]) for j in range(n) if j != i) / (n - 1)
        sid = evidence.sentence_ids[i]
        if mean > best_score or (mean == best_score and sid < best_id):
            best_id, best_score = sid, mean
    return best_id


def nearest_sentence_decode(subpath, codebook: Codebook,
                            embeddings: EmbeddingMatrix, corpus: Corpus) -> str:
    """Corpus sentence whose embedding lies closest (Euclidean) to the
    subpath's cumulative embedding; ties go to the smallest sentence id."""
    ids = corpus.sentence_ids()
    if not ids:
        raise AggregateError("corpus is empty")
    if len(ids) != len(embeddings):
        raise AggregateError("embedding matrix does not match corpus size")
    z = decode(subpath, codebook)
    diffs = embeddings.values.astype(np.float64) - z[None, :]
    dists = np.sum(diffs * diffs, axis=1)
    best = dists.min()
    candidates = np.flatnonzero(dists == best)
    return min(ids[i] for i in candidates)


@dataclass(frozen=True)
class SummarySentence:
    text: str
    subpath: tuple[int, ...]
    kind: str  # "generic" | "specific"
    score: float
    evidence: tuple[str, ...]
    source: str  # "extractive" | "nearest"

    @property
    def depth(self) -> int:
        return len(self.subpath)


@dataclass(frozen=True)
class Summary:
    entity_id: str
    sentences: tuple[SummarySentence, ...]

    def to_json(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "sentences": [
                {
                    "text": s.text,
                    "subpath": list(s.subpath),
                    "depth": s.depth,
                    "kind": s.kind,
                    "score": s.score,
                    "evidence": list(s.evidence),
                    "source": s.source,
                }
                for s in self.sentences
            ],
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_json(), handle)
            handle.write("\n")


def assemble(entity_id: str, generic: list[ScoredSubpath],
             specific: list[ScoredSubpath], mode: str, tree: PathTree,
             corpus: Corpus, codebook: Codebook | None = None,
             embeddings: EmbeddingMatrix | None = None) -> Summary:
    """Combine selections into an attributed summary.

    Duplicate subpaths keep the generic copy. mode="extractive" realizes
    each subpath as its evidence centroid sentence; mode="nearest" decodes
    the subpath and takes the closest corpus sentence (codebook and
    embeddings required). Output orders generic before specific, each by
    descending score.
    """
    if mode not in ("extractive", "nearest"):
        raise AggregateError(f"unknown summary mode {mode!r}")
    if mode == "nearest" and (codebook is None or embeddings is None):
        raise AggregateError("nearest mode needs a codebook and embeddings")
    seen = {s.path for s in generic}
    kept_specific = [s for s in specific if s.path not in seen]

    def realize(selection: ScoredSubpath) -> SummarySentence:
        ev = evidence_set(selection.path, tree, corpus)
        if mode == "extractive":
            sid = centroid_sentence(ev)
        else:
            sid = nearest_sentence_decode(selection.path, codebook, embeddings, corpus)
        return SummarySentence(text=corpus.sentence(sid).text,
                               subpath=selection.path, kind=selection.kind,
                               score=selection.score, evidence=ev.sentence_ids,
                               source=mode)

    ordered = (sorted(generic, key=lambda s: -s.score)
               + sorted(kept_specific, key=lambda s: -s.score))
    return Summary(entity_id=entity_id, sentences=tuple(realize(s) for s in ordered))
