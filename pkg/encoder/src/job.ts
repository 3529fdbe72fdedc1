import * as fs from "node:fs";

import { EmptyInputError, InvalidJobError, MalformedLineError } from "./errors.js";
import { MIN_CHUNK_LEN } from "./chunk.js";
import type { Pooling } from "./hash_encoder.js";

export type InputFormat = "tsv" | "jsonl";

export interface EncodeJob {
  inputPath: string;
  format: InputFormat;
  /** Encoder model identifier, e.g. "hash-256". */
  modelId: string;
  pooling: Pooling;
  batchSize: number;
  /** 0 disables truncation. */
  maxTokens: number;
  /** Token count per chunk; undefined disables chunking. */
  chunkLen?: number;
  /** Output paths: `<prefix>.emb1`, `<prefix>.ids`, `<prefix>.manifest.json`. */
  outputPrefix: string;
}

export function validateJob(job: EncodeJob): void {
  if (job.format !== "tsv" && job.format !== "jsonl") {
    throw new InvalidJobError(`format must be tsv or jsonl, got ${job.format}`);
  }
  if (job.pooling !== "mean" && job.pooling !== "cls") {
    throw new InvalidJobError(`pooling must be mean or cls, got ${job.pooling}`);
  }
  if (job.batchSize < 1) {
    throw new InvalidJobError(`batch size must be >= 1, got ${job.batchSize}`);
  }
  if (job.maxTokens < 0) {
    throw new InvalidJobError(`max tokens must be >= 0, got ${job.maxTokens}`);
  }
  if (job.chunkLen !== undefined && (!Number.isInteger(job.chunkLen) || job.chunkLen < MIN_CHUNK_LEN)) {
    throw new InvalidJobError(`chunk_len must be an integer >= ${MIN_CHUNK_LEN}, got ${job.chunkLen}`);
  }
}

export interface Passage {
  id: string;
  text: string;
}

/** Parse the corpus: TSV `id<TAB>text` or JSONL `{"id": ..., "text": ...}`. */
export function readPassages(path: string, format: InputFormat): Passage[] {
  const raw = fs.readFileSync(path, "utf-8");
  const lines = raw.split("\n").filter((line) => line.length > 0);
  const passages: Passage[] = [];
  lines.forEach((line, n) => {
    if (format === "tsv") {
      const cut = line.indexOf("\t");
      if (cut <= 0) throw new MalformedLineError(path, n + 1, "expected id<TAB>text");
      passages.push({ id: line.slice(0, cut), text: line.slice(cut + 1) });
    } else {
      let obj: unknown;
      try {
        obj = JSON.parse(line);
      } catch {
        throw new MalformedLineError(path, n + 1, "invalid JSON");
      }
      const rec = obj as { id?: unknown; text?: unknown };
      if (typeof rec.id !== "string" || typeof rec.text !== "string") {
        throw new MalformedLineError(path, n + 1, "need string fields id and text");
      }
      passages.push({ id: rec.id, text: rec.text });
    }
  });
  if (passages.length === 0) throw new EmptyInputError(path);
  return passages;
}
