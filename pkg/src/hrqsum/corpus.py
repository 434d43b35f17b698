"""Review corpus ingestion: JSONL loading, sentence segmentation, aspect
labeling, and denoising-pair retrieval via bigram tf-idf."""

from __future__ import annotations

import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from pathlib import Path

ID_SEP = "::"

_WORD_RE = re.compile(r"\w+")
_SENT_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")


class CorpusError(ValueError):
    """Raised for malformed corpus files or inconsistent corpus contents."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation boundaries.

    Tokens are maximal runs of word characters; punctuation is dropped.
    """
    return _WORD_RE.findall(text.lower())


def bigrams(tokens: list[str]) -> list[tuple[str, str]]:
    return list(zip(tokens, tokens[1:]))


def segment(review_text: str) -> list[str]:
    """Split text into sentences on '.', '!' or '?' followed by whitespace.

    Never returns empty segments; all non-whitespace characters are kept.
    """
    parts = _SENT_SPLIT_RE.split(review_text.strip())
    return [p for p in parts if p]


@dataclass(frozen=True)
class Sentence:
    id: str
    entity_id: str
    review_id: str
    position: int
    text: str
    rating: int | None = None
    aspects: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Review:
    review_id: str
    entity_id: str
    rating: int | None
    sentences: tuple[Sentence, ...]


@dataclass(frozen=True)
class Entity:
    entity_id: str
    reviews: tuple[Review, ...]

    def sentences(self) -> list[Sentence]:
        return [s for r in self.reviews for s in r.sentences]


class Corpus:
    """Reviews grouped by entity, with a global sentence index.

    Canonical sentence order is entity first-appearance order, then review
    file order, then position within review. Treat instances as immutable.
    """

    def __init__(self, entities: list[Entity]):
        self.entities: dict[str, Entity] = {e.entity_id: e for e in entities}
        if len(self.entities) != len(entities):
            raise CorpusError("duplicate entity_id in entity list")
        self._by_id: dict[str, Sentence] = {}
        for entity in entities:
            for sent in entity.sentences():
                if sent.id in self._by_id:
                    raise CorpusError(f"duplicate sentence id {sent.id!r}")
                self._by_id[sent.id] = sent

    def sentences(self) -> list[Sentence]:
        return list(self._by_id.values())

    def sentence_ids(self) -> list[str]:
        return list(self._by_id.keys())

    def sentence(self, sentence_id: str) -> Sentence:
        try:
            return self._by_id[sentence_id]
        except KeyError:
            raise CorpusError(f"unknown sentence id {sentence_id!r}") from None

    def __len__(self) -> int:
        return len(self._by_id)

    def entity(self, entity_id: str) -> Entity:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise CorpusError(f"unknown entity id {entity_id!r}") from None


def sentence_id(entity_id: str, review_id: str, position: int) -> str:
    return f"{entity_id}{ID_SEP}{review_id}{ID_SEP}{position}"


def _validate_rating(value, line_no: int) -> int | None:
    if value is None:
        return None
    if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 5:
        raise CorpusError(f"line {line_no}: rating must be an integer in 1..5 or null")
    return value


def load_corpus(path: str | Path) -> Corpus:
    """Load a review JSONL file (one review per line).

    Schema: {"entity_id": str, "review_id": str, "rating": int|null,
    "sentences": [str]}. A "text" field may replace "sentences", in which
    case segment() is applied. Sentence ids are derived from
    (entity_id, review_id, position) and are stable across loads.
    """
    reviews_by_entity: dict[str, list[Review]] = defaultdict(list)
    entity_order: list[str] = []
    seen_review_ids: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise CorpusError(f"line {line_no}: expected a JSON object")
            try:
                entity_id = record["entity_id"]
                review_id = record["review_id"]
            except KeyError as exc:
                raise CorpusError(f"line {line_no}: missing field {exc.args[0]!r}") from None
            if review_id in seen_review_ids:
                raise CorpusError(f"line {line_no}: duplicate review_id {review_id!r}")
            seen_review_ids.add(review_id)
            rating = _validate_rating(record.get("rating"), line_no)
            if "sentences" in record:
                raw_sentences = record["sentences"]
                if not isinstance(raw_sentences, list):
                    raise CorpusError(f"line {line_no}: 'sentences' must be a list")
            elif "text" in record:
                raw_sentences = segment(str(record["text"]))
            else:
                raise CorpusError(f"line {line_no}: need 'sentences' or 'text'")
            sentences = []
            for pos, text in enumerate(raw_sentences):
                if not isinstance(text, str) or not text.strip():
                    raise CorpusError(f"line {line_no}: sentence {pos} is empty")
                sentences.append(
                    Sentence(
                        id=sentence_id(entity_id, review_id, pos),
                        entity_id=entity_id,
                        review_id=review_id,
                        position=pos,
                        text=text,
                        rating=rating,
                    )
                )
            if entity_id not in reviews_by_entity:
                entity_order.append(entity_id)
            reviews_by_entity[entity_id].append(
                Review(review_id=review_id, entity_id=entity_id, rating=rating,
                       sentences=tuple(sentences))
            )
    entities = [Entity(entity_id=eid, reviews=tuple(reviews_by_entity[eid]))
                for eid in entity_order]
    return Corpus(entities)


class AspectLexicon:
    """Mapping from aspect name to a lowercased keyword set."""

    def __init__(self, keywords: dict[str, set[str]]):
        for aspect, words in keywords.items():
            if not words:
                raise CorpusError(f"aspect {aspect!r} has an empty keyword set")
        self.keywords = {aspect: frozenset(w.lower() for w in words)
                         for aspect, words in keywords.items()}

    @classmethod
    def load(cls, path: str | Path) -> "AspectLexicon":
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
        if not isinstance(raw, dict):
            raise CorpusError("aspect lexicon must be a JSON object")
        return cls({aspect: set(words) for aspect, words in raw.items()})

    def aspects(self) -> list[str]:
        return sorted(self.keywords)


def label_aspects(corpus: Corpus, lexicon: AspectLexicon) -> Corpus:
    """Return a new corpus with each sentence labeled by every aspect whose
    keyword set intersects the sentence's token set."""
    new_entities = []
    for entity in corpus.entities.values():
        new_reviews = []
        for review in entity.reviews:
            new_sents = []
            for sent in review.sentences:
                tokens = set(tokenize(sent.text))
                labels = frozenset(a for a, words in lexicon.keywords.items()
                                   if tokens & words)
                new_sents.append(replace(sent, aspects=labels))
            new_reviews.append(replace(review, sentences=tuple(new_sents)))
        new_entities.append(Entity(entity_id=entity.entity_id, reviews=tuple(new_reviews)))
    return Corpus(new_entities)


@dataclass(frozen=True)
class DenoisingPair:
    target: str
    source: str
    similarity: float


def _bigram_tfidf_vectors(sentences: list[Sentence]) -> tuple[list[dict], list[float]]:
    per_sentence = [Counter(bigrams(tokenize(s.text))) for s in sentences]
    df: Counter = Counter()
    for counts in per_sentence:
        df.update(counts.keys())
    n = len(sentences)
    vectors = []
    norms = []
    for counts in per_sentence:
        vec = {}
        for term, count in counts.items():
            weight = count * math.log(n / df[term])
            if weight != 0.0:
                vec[term] = weight
        vectors.append(vec)
        norms.append(math.sqrt(sum(w * w for w in vec.values())))
    return vectors, norms


def retrieve_denoising_pairs(corpus: Corpus, top_k: int = 5,
                             min_sim: float = 0.6) -> list[DenoisingPair]:
    """For each sentence, retrieve up to top_k most similar sentences by
    cosine over bigram tf-idf, restricted to other reviews with an equal
    rating (absent ratings only match absent ratings).

    Output is sorted by target id, then similarity descending, then source
    id; every pair satisfies similarity >= min_sim.
    """
    sentences = corpus.sentences()
    if len(sentences) < 2:
        raise CorpusError("denoising retrieval needs at least 2 sentences")
    vectors, norms = _bigram_tfidf_vectors(sentences)

    by_rating: dict[object, list[int]] = defaultdict(list)
    for i, sent in enumerate(sentences):
        by_rating[sent.rating].append(i)

    # Inverted index per rating group keeps the candidate scan sparse.
    pairs: list[DenoisingPair] = []
    for group in by_rating.values():
        postings: dict = defaultdict(list)
        for i in group:
            for term in vectors[i]:
                postings[term].append(i)
        for i in group:
            if norms[i] == 0.0:
                continue
            dots: dict[int, float] = defaultdict(float)
            for term, weight in vectors[i].items():
                for j in postings[term]:
                    dots[j] += weight * vectors[j][term]
            target = sentences[i]
            candidates = []
            for j, dot in dots.items():
                if j == i or norms[j] == 0.0:
                    continue
                cand = sentences[j]
                if cand.review_id == target.review_id:
                    continue
                sim = dot / (norms[i] * norms[j])
                if sim >= min_sim:
                    candidates.append((sim, cand.id))
            candidates.sort(key=lambda item: (-item[0], item[1]))
            for sim, source_id in candidates[:top_k]:
                pairs.append(DenoisingPair(target=target.id, source=source_id,
                                           similarity=sim))
    pairs.sort(key=lambda p: (p.target, -p.similarity, p.source))
    return pairs
