import * as fs from "node:fs";

import { chunkText } from "./chunk.js";
import { writeEmb1, writeIds } from "./emb1.js";
import { loadEncoder } from "./hash_encoder.js";
import { readPassages, validateJob, type EncodeJob } from "./job.js";

export interface Manifest {
  model_id: string;
  pooling: string;
  dim: number;
  rows: number;
  input: string;
  format: string;
  chunk_len: number | null;
  max_tokens: number;
}

export interface EncodeResult {
  embPath: string;
  idsPath: string;
  manifestPath: string;
  manifest: Manifest;
}

/**
 * Encode a corpus into an EMB1 file with aligned ids sidecar and a
 * manifest recording how the rows were produced. With chunking enabled,
 * each row is one chunk and its id is `<passage_id>#<i>`; otherwise one
 * row per passage.
 */
export function encodeCorpus(job: EncodeJob): EncodeResult {
  validateJob(job);
  const encoder = loadEncoder(job.modelId);
  const passages = readPassages(job.inputPath, job.format);

  const ids: string[] = [];
  const texts: string[] = [];
  for (const passage of passages) {
    if (job.chunkLen !== undefined) {
      for (const segment of chunkText(passage.text, job.chunkLen, passage.id)) {
        ids.push(segment.id);
        texts.push(segment.text);
      }
    } else {
      ids.push(passage.id);
      texts.push(passage.text);
    }
  }

  const rows: Float32Array[] = [];
  for (let start = 0; start < texts.length; start += job.batchSize) {
    const batch = texts.slice(start, start + job.batchSize);
    rows.push(...encoder.encode(batch, job.pooling, job.maxTokens));
  }

  const embPath = `${job.outputPrefix}.emb1`;
  const idsPath = `${job.outputPrefix}.ids`;
  const manifestPath = `${job.outputPrefix}.manifest.json`;
  writeEmb1(embPath, rows, encoder.dim);
  writeIds(idsPath, ids);
  const manifest: Manifest = {
    model_id: encoder.id,
    pooling: job.pooling,
    dim: encoder.dim,
    rows: rows.length,
    input: job.inputPath,
    format: job.format,
    chunk_len: job.chunkLen ?? null,
    max_tokens: job.maxTokens,
  };
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return { embPath, idsPath, manifestPath, manifest };
}
