import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { HashEncoder } from "../src/encoder.js";
import { runExport } from "../src/cli.js";
import { loadCorpus } from "../src/corpus.js";
import { parseHrqe } from "../src/hrqe.js";

const TEXTS = [
  "the pool was warm.",
  "breakfast was fresh.",
  "room was noisy.",
  "staff were kind.",
  "the view was stunning.",
  "wifi kept dropping.",
  "parking cost extra.",
  "beds were comfortable.",
  "lobby smelled of flowers.",
  "water pressure was weak.",
];

function writeCorpus(): string {
  const dir = mkdtempSync(join(tmpdir(), "embed-export-"));
  const path = join(dir, "corpus.jsonl");
  const lines = TEXTS.map((text, i) =>
    JSON.stringify({ entity_id: "e1", review_id: `r${i}`, rating: 5, sentences: [text] }),
  );
  writeFileSync(path, lines.join("\n") + "\n");
  return path;
}

describe("HashEncoder", () => {
  it("is deterministic and unit-norm", async () => {
    const encoder = new HashEncoder(64);
    const [a] = await encoder.encode(["the pool was warm"]);
    const [b] = await encoder.encode(["the pool was warm"]);
    expect(Array.from(a)).toEqual(Array.from(b));
    const norm = Math.sqrt(a.reduce((acc, v) => acc + v * v, 0));
    expect(Math.abs(norm - 1)).toBeLessThan(1e-5);
  });

  it("gives different vectors to different sentences", async () => {
    const encoder = new HashEncoder(64);
    const [a, b] = await encoder.encode(["the pool was warm", "parking cost extra"]);
    expect(Array.from(a)).not.toEqual(Array.from(b));
  });

  it("rejects dim < 2", () => {
    expect(() => new HashEncoder(1)).toThrow(/dim/);
  });
});

describe("runExport", () => {
  it("writes an HRQE file plus manifest matching the corpus", async () => {
    const corpus = writeCorpus();
    const out = join(mkdtempSync(join(tmpdir(), "embed-export-")), "emb.hrqe");
    const manifest = await runExport({ corpus, model: "hash", dim: 48, out });

    expect(manifest.model).toBe("hash");
    expect(manifest.dim).toBe(48);
    expect(manifest.sentence_count).toBe(10);
    expect(manifest.sentence_ids).toEqual(loadCorpus(corpus).map((s) => s.id));
    expect(manifest.corpus_checksum).toMatch(/^[0-9a-f]{64}$/);

    const { header, rows } = parseHrqe(readFileSync(out));
    expect(header).toEqual({ dim: 48, count: 10 });
    for (const row of rows) {
      const norm = Math.sqrt(row.reduce((acc, v) => acc + v * v, 0));
      expect(Math.abs(norm - 1)).toBeLessThan(1e-5);
    }

    const sidecar = JSON.parse(readFileSync(out.replace(/\.hrqe$/, ".manifest.json"), "utf-8"));
    expect(sidecar).toEqual(manifest);
  });

  it("export is deterministic across runs", async () => {
    const corpus = writeCorpus();
    const dir = mkdtempSync(join(tmpdir(), "embed-export-"));
    const outA = join(dir, "a.hrqe");
    const outB = join(dir, "b.hrqe");
    await runExport({ corpus, model: "hash", dim: 32, out: outA });
    await runExport({ corpus, model: "hash", dim: 32, out: outB });
    expect(readFileSync(outA).equals(readFileSync(outB))).toBe(true);
  });

  it("fails on an empty corpus", async () => {
    const dir = mkdtempSync(join(tmpdir(), "embed-export-"));
    const corpus = join(dir, "empty.jsonl");
    writeFileSync(corpus, "");
    await expect(
      runExport({ corpus, model: "hash", dim: 16, out: join(dir, "x.hrqe") }),
    ).rejects.toThrow(/no sentences/);
  });
});
