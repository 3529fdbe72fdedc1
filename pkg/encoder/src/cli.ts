#!/usr/bin/env node
/**
 * encoder-adapter --input corpus.tsv --output-prefix out/passages
 *                 [--format tsv|jsonl] [--encoder hash-256]
 *                 [--pooling mean|cls] [--batch-size 64]
 *                 [--max-tokens 0] [--chunk-len N]
 */
import { encodeCorpus } from "./encode.js";
import type { EncodeJob, InputFormat } from "./job.js";
import type { Pooling } from "./hash_encoder.js";

function parseArgs(argv: string[]): EncodeJob {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) {
      throw new Error(`expected --flag value pairs, got ${key}`);
    }
    flags.set(key.slice(2), value);
  }
  const input = flags.get("input");
  const prefix = flags.get("output-prefix");
  if (!input || !prefix) {
    throw new Error("--input and --output-prefix are required");
  }
  const chunkRaw = flags.get("chunk-len");
  return {
    inputPath: input,
    format: (flags.get("format") ?? "tsv") as InputFormat,
    modelId: flags.get("encoder") ?? "hash-256",
    pooling: (flags.get("pooling") ?? "mean") as Pooling,
    batchSize: Number(flags.get("batch-size") ?? 64),
    maxTokens: Number(flags.get("max-tokens") ?? 0),
    chunkLen: chunkRaw === undefined ? undefined : Number(chunkRaw),
    outputPrefix: prefix,
  };
}

try {
  const result = encodeCorpus(parseArgs(process.argv.slice(2)));
  console.log(
    `encoded ${result.manifest.rows} rows (dim ${result.manifest.dim}) -> ${result.embPath}`,
  );
} catch (err) {
  console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
  process.exit(1);
}
