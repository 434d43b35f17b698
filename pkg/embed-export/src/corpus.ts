/** Review corpus JSONL parsing, mirroring the primary pipeline's schema,
 * sentence segmentation rule, id scheme, and canonical sentence order. */

import { readFileSync } from "node:fs";

export interface CorpusSentence {
  id: string;
  entityId: string;
  reviewId: string;
  position: number;
  text: string;
  rating: number | null;
}

const SENTENCE_SPLIT = /(?<=[.!?])\s+/;

/** Split on '.', '!' or '?' followed by whitespace; drop empty segments. */
export function segment(text: string): string[] {
  return text
    .trim()
    .split(SENTENCE_SPLIT)
    .filter((part) => part.length > 0);
}

export function sentenceId(entityId: string, reviewId: string, position: number): string {
  return `${entityId}::${reviewId}::${position}`;
}

interface ReviewRecord {
  entity_id: string;
  review_id: string;
  rating?: number | null;
  sentences?: string[];
  text?: string;
}

/** Parse a review JSONL file into sentences in canonical corpus order:
 * entity first-appearance order, then review file order, then position. */
export function loadCorpus(path: string): CorpusSentence[] {
  const raw = readFileSync(path, "utf-8");
  const perEntity = new Map<string, CorpusSentence[]>();
  const seenReviews = new Set<string>();
  const lines = raw.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let record: ReviewRecord;
    try {
      record = JSON.parse(line) as ReviewRecord;
    } catch (err) {
      throw new Error(`line ${i + 1}: malformed JSON (${(err as Error).message})`);
    }
    if (typeof record.entity_id !== "string" || typeof record.review_id !== "string") {
      throw new Error(`line ${i + 1}: missing entity_id or review_id`);
    }
    if (seenReviews.has(record.review_id)) {
      throw new Error(`line ${i + 1}: duplicate review_id ${record.review_id}`);
    }
    seenReviews.add(record.review_id);
    const rating = record.rating ?? null;
    if (rating !== null && (!Number.isInteger(rating) || rating < 1 || rating > 5)) {
      throw new Error(`line ${i + 1}: rating must be an integer in 1..5 or null`);
    }
    let texts: string[];
    if (Array.isArray(record.sentences)) {
      texts = record.sentences;
    } else if (typeof record.text === "string") {
      texts = segment(record.text);
    } else {
      throw new Error(`line ${i + 1}: need 'sentences' or 'text'`);
    }
    const bucket = perEntity.get(record.entity_id) ?? [];
    if (!perEntity.has(record.entity_id)) perEntity.set(record.entity_id, bucket);
    texts.forEach((text, position) => {
      if (typeof text !== "string" || !text.trim()) {
        throw new Error(`line ${i + 1}: sentence ${position} is empty`);
      }
      bucket.push({
        id: sentenceId(record.entity_id, record.review_id, position),
        entityId: record.entity_id,
        reviewId: record.review_id,
        position,
        text,
        rating,
      });
    });
  }
  const ordered: CorpusSentence[] = [];
  for (const bucket of perEntity.values()) ordered.push(...bucket);
  return ordered;
}
