#!/usr/bin/env node
/** CLI: embed a review corpus JSONL with a sentence encoder and write the
 * embeddings as HRQE v1, plus a manifest JSON describing the export. */

import { createHash } from "node:crypto";
import { readFileSync, unlinkSync, writeFileSync } from "node:fs";
import { exit } from "node:process";

import { loadCorpus } from "./corpus.js";
import { loadEncoder } from "./encoder.js";
import { writeHrqe } from "./hrqe.js";

interface Args {
  corpus: string;
  model: string;
  dim: number;
  out: string;
}

function parseArgs(argv: string[]): Args {
  const values = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`usage: embed-export --corpus FILE --model NAME [--dim N] --out FILE`);
    }
    values.set(key.slice(2), argv[i + 1]);
  }
  const corpus = values.get("corpus");
  const out = values.get("out");
  if (!corpus || !out) throw new Error("--corpus and --out are required");
  const model = values.get("model") ?? "hash";
  const dim = Number(values.get("dim") ?? "256");
  if (!Number.isInteger(dim) || dim < 2) throw new Error("--dim must be an integer >= 2");
  return { corpus, model, dim, out };
}

export interface ExportManifest {
  model: string;
  dim: number;
  corpus_checksum: string;
  sentence_count: number;
  sentence_ids: string[];
}

export async function runExport(args: Args): Promise<ExportManifest> {
  const sentences = loadCorpus(args.corpus);
  if (sentences.length === 0) throw new Error("corpus contains no sentences");
  const encoder = await loadEncoder(args.model, args.dim);
  const rows = await encoder.encode(sentences.map((s) => s.text));
  if (rows.length !== sentences.length) {
    throw new Error(`encoder returned ${rows.length} rows for ${sentences.length} sentences`);
  }
  for (const row of rows) {
    if (row.length !== encoder.dim) {
      throw new Error(`row dim ${row.length} does not match encoder dim ${encoder.dim}`);
    }
  }
  writeHrqe(args.out, rows, encoder.dim);
  const manifest: ExportManifest = {
    model: encoder.model,
    dim: encoder.dim,
    corpus_checksum: createHash("sha256").update(readFileSync(args.corpus)).digest("hex"),
    sentence_count: sentences.length,
    sentence_ids: sentences.map((s) => s.id),
  };
  const manifestPath = args.out.replace(/(\.[A-Za-z0-9]+)?$/, ".manifest.json");
  writeFileSync(manifestPath, JSON.stringify(manifest) + "\n");
  return manifest;
}

async function main(): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  try {
    const manifest = await runExport(args);
    console.log(
      `wrote ${manifest.sentence_count} x ${manifest.dim} embeddings (${manifest.model}) to ${args.out}`,
    );
    return 0;
  } catch (err) {
    for (const path of [args.out, args.out.replace(/(\.[A-Za-z0-9]+)?$/, ".manifest.json")]) {
      try {
        unlinkSync(path);
      } catch {
        // no partial output to remove
      }
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const invokedDirectly = process.argv[1]?.endsWith("cli.js") || process.argv[1]?.endsWith("cli.ts");
if (invokedDirectly) {
  main().then(exit);
}
