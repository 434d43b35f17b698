"""Evaluation harness: ROUGE-2/L F1 with multi-reference jackknifing,
random/centroid/flat-k-means baselines, and a synthetic planted-opinion
benchmark with recovery scoring."""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import (Corpus, Entity, Review, Sentence, bigrams, sentence_id,
                     tokenize)
from .embedder import EmbeddingMatrix
from .summarize import Summary, SummarySentence, _pair_f1


@dataclass(frozen=True)
class RougeScore:
    r2_f1: float
    rl_f1: float


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def _f1(overlap: float, len_cand: int, len_ref: int) -> float:
    if overlap == 0 or len_cand == 0 or len_ref == 0:
        return 0.0
    precision = overlap / len_cand
    recall = overlap / len_ref
    return 2.0 * precision * recall / (precision + recall)


def _rouge_single(cand_tokens: list[str], ref_tokens: list[str]) -> RougeScore:
    cand_grams = Counter(bigrams(cand_tokens))
    ref_grams = Counter(bigrams(ref_tokens))
    overlap = sum(min(count, ref_grams[g]) for g, count in cand_grams.items())
    r2 = _f1(overlap, max(len(cand_tokens) - 1, 0), max(len(ref_tokens) - 1, 0))
    lcs = _lcs_length(cand_tokens, ref_tokens)
    rl = _f1(lcs, len(cand_tokens), len(ref_tokens))
    return RougeScore(r2_f1=r2, rl_f1=rl)


def rouge(candidate: str, references: list[str]) -> RougeScore:
    """ROUGE-2/L F1 against one or more references.

    With m > 1 references, jackknifing: the mean over m leave-one-out folds
    of the max score over the remaining references. Tokens are lowercased
    word runs; ROUGE-L uses the LCS over each full text.
    """
    if not references:
        raise ValueError("need at least one reference")
    cand_tokens = tokenize(candidate)
    per_ref = [_rouge_single(cand_tokens, tokenize(ref)) for ref in references]
    if len(per_ref) == 1:
        return per_ref[0]
    m = len(per_ref)
    r2_folds, rl_folds = [], []
    for leave_out in range(m):
        rest = [per_ref[i] for i in range(m) if i != leave_out]
        r2_folds.append(max(s.r2_f1 for s in rest))
        rl_folds.append(max(s.rl_f1 for s in rest))
    return RougeScore(r2_f1=sum(r2_folds) / m, rl_f1=sum(rl_folds) / m)


def _review_summary(entity: Entity, review: Review) -> Summary:
    sentences = tuple(
        SummarySentence(text=s.text, subpath=(), kind="generic", score=0.0,
                        evidence=(s.id,), source="extractive")
        for s in review.sentences)
    return Summary(entity_id=entity.entity_id, sentences=sentences)


def baseline_random(entity: Entity, seed: int) -> Summary:
    """A seeded uniformly chosen review, used verbatim as the summary."""
    if not entity.reviews:
        raise ValueError(f"entity {entity.entity_id!r} has no reviews")
    rng = np.random.default_rng(seed)
    review = entity.reviews[int(rng.integers(len(entity.reviews)))]
    return _review_summary(entity, review)


def baseline_centroid(entity: Entity) -> Summary:
    """The review with the highest mean ROUGE-2 F1 against all other
    reviews; ties go to the smallest review_id."""
    if not entity.reviews:
        raise ValueError(f"entity {entity.entity_id!r} has no reviews")
    if len(entity.reviews) == 1:
        return _review_summary(entity, entity.reviews[0])
    grams = [Counter(bigrams(tokenize(" ".join(s.text for s in r.sentences))))
             for r in entity.reviews]
    n = len(grams)
    best, best_score = None, -1.0
    for i, review in enumerate(entity.reviews):
        mean = sum(_pair_f1(grams[i], grams[j]) for j in range(n) if j != i) / (n - 1)
        if mean > best_score or (mean == best_score and review.review_id < best.review_id):
            best, best_score = review, mean
    return _review_summary(entity, best)


def _kmeans(vectors: np.ndarray, k: int, seed: int, max_iters: int = 100):
    rng = np.random.default_rng(seed)
    n = vectors.shape[0]
    centers = vectors[rng.choice(n, size=k, replace=False)].copy()
    assign = np.full(n, -1)
    for _ in range(max_iters):
        dists = np.sum((vectors[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = np.argmin(dists, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = vectors[assign == c]
            if members.size:
                centers[c] = members.mean(axis=0)
            else:
                centers[c] = vectors[int(np.argmax(dists.min(axis=1)))]
    return centers, assign


def baseline_flat_kmeans(entity: Entity, vectors: np.ndarray, k: int,
                         seed: int) -> Summary:
    """Flat k-means ablation: cluster the entity's sentence embeddings and
    take the sentence nearest each cluster mean. vectors rows align with
    entity.sentences(). Clusters are emitted largest first."""
    sentences = entity.sentences()
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.shape[0] != len(sentences):
        raise ValueError("one embedding row per entity sentence required")
    if len(sentences) < k:
        warnings.warn(f"entity {entity.entity_id!r} has {len(sentences)} "
                      f"sentences < k={k}; reducing k")
        k = len(sentences)
    centers, assign = _kmeans(vectors, k, seed)
    picked: list[SummarySentence] = []
    sizes = np.bincount(assign, minlength=k)
    for c in np.lexsort((np.arange(k), -sizes)):
        members = np.flatnonzero(assign == c)
        if members.size == 0:
            continue
        dists = np.sum((vectors[members] - centers[c]) ** 2, axis=1)
        best = dists.min()
        ties = members[np.flatnonzero(dists == best)]
        sid = min(sentences[i].id for i in ties)
        sent = next(s for s in sentences if s.id == sid)
        picked.append(SummarySentence(
            text=sent.text, subpath=(), kind="generic",
            score=float(sizes[c] / len(sentences)), evidence=(sid,),
            source="extractive"))
    return Summary(entity_id=entity.entity_id, sentences=tuple(picked))


@dataclass
class PlantedConfig:
    n_entities: int = 20
    sentences_per_entity: int = 500
    n_opinions: int = 10
    dim: int = 16
    noise_sigma: float = 0.05
    seed: int = 0
    review_size: int = 10
    frequency_profile: tuple[float, ...] | None = None

    def profile(self) -> np.ndarray:
        if self.frequency_profile is not None:
            arr = np.asarray(self.frequency_profile, dtype=np.float64)
            if arr.size != self.n_opinions or abs(arr.sum() - 1.0) > 1e-9:
                raise ValueError("frequency_profile must have n_opinions "
                                 "entries summing to 1")
            return arr
        raw = 1.0 / np.arange(2, self.n_opinions + 2, dtype=np.float64)
        return raw / raw.sum()


@dataclass
class PlantedBenchmark:
    config: PlantedConfig
    corpus: Corpus
    embeddings: EmbeddingMatrix
    truth: dict[str, int]  # sentence id -> planted opinion index
    centroids: np.ndarray
    entity_frequencies: dict[str, np.ndarray] = field(default_factory=dict)


def generate_planted(config: PlantedConfig) -> PlantedBenchmark:
    """Synthetic corpus with known opinion clusters.

    Opinion centroids are unit-sphere points rescaled so every pairwise
    distance is at least 4 * noise_sigma; each sentence samples an opinion
    from its entity's (permuted-profile) frequency vector and embeds as
    centroid + Gaussian noise. Texts encode (entity, opinion, index) so
    extractive output stays traceable. Deterministic given the seed.
    """
    rng = np.random.default_rng(config.seed)
    centroids = rng.standard_normal((config.n_opinions, config.dim))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    if config.n_opinions > 1:
        dists = np.linalg.norm(centroids[:, None, :] - centroids[None, :, :], axis=2)
        min_dist = dists[~np.eye(config.n_opinions, dtype=bool)].min()
        required = 4.0 * config.noise_sigma
        if min_dist < required:
            centroids *= required / min_dist

    profile = config.profile()
    entities: list[Entity] = []
    rows: list[np.ndarray] = []
    truth: dict[str, int] = {}
    frequencies: dict[str, np.ndarray] = {}
    for e in range(config.n_entities):
        eid = f"ent{e}"
        if config.frequency_profile is None:
            # default profile: opinion identity shuffled per entity so the
            # popular opinions differ across entities
            freqs = profile[rng.permutation(config.n_opinions)]
        else:
            freqs = profile
        frequencies[eid] = freqs
        opinions = rng.choice(config.n_opinions, size=config.sentences_per_entity,
                              p=freqs)
        noise = rng.normal(0.0, config.noise_sigma,
                           size=(config.sentences_per_entity, config.dim))
        reviews: list[Review] = []
        review_sents: list[Sentence] = []
        for i, opinion in enumerate(opinions):
            rid = f"{eid}r{i // config.review_size}"
            sid = sentence_id(eid, rid, i % config.review_size)
            text = f"entity{e} opinion{opinion} says point{opinion} detail{i}"
            review_sents.append(Sentence(id=sid, entity_id=eid, review_id=rid,
                                         position=i % config.review_size,
                                         text=text))
            truth[sid] = int(opinion)
            rows.append(centroids[opinion] + noise[i])
            if len(review_sents) == config.review_size or i == config.sentences_per_entity - 1:
                reviews.append(Review(review_id=rid, entity_id=eid, rating=None,
                                      sentences=tuple(review_sents)))
                review_sents = []
        entities.append(Entity(entity_id=eid, reviews=tuple(reviews)))
    matrix = EmbeddingMatrix(np.asarray(rows, dtype=np.float32))
    return PlantedBenchmark(config=config, corpus=Corpus(entities),
                            embeddings=matrix, truth=truth, centroids=centroids,
                            entity_frequencies=frequencies)


def _entity_opinion_counts(entity_id: str, truth: dict[str, int]) -> Counter:
    prefix = f"{entity_id}::"
    return Counter(op for sid, op in truth.items() if sid.startswith(prefix))


def score_recovery(summary: Summary, truth: dict[str, int],
                   top_m: int) -> tuple[float, float]:
    """Map each summary sentence to the majority planted opinion of its
    evidence set; precision is the fraction of those opinions inside the
    entity's top_m most frequent, recall the fraction of the top_m covered."""
    counts = _entity_opinion_counts(summary.entity_id, truth)
    if not counts:
        raise ValueError(f"no planted sentences for entity {summary.entity_id!r}")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    top = {op for op, _ in ranked[:top_m]}
    if not summary.sentences:
        return 0.0, 0.0
    summary_opinions = []
    for sent in summary.sentences:
        votes = Counter(truth[sid] for sid in sent.evidence if sid in truth)
        if not votes:
            continue
        majority = sorted(votes.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        summary_opinions.append(majority)
    if not summary_opinions:
        return 0.0, 0.0
    precision = sum(op in top for op in summary_opinions) / len(summary_opinions)
    recall = len(set(summary_opinions) & top) / len(top)
    return precision, recall
