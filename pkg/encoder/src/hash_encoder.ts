import { EncoderLoadFailure } from "./errors.js";
import { tokenize } from "./tokenizer.js";

export type Pooling = "mean" | "cls";

export interface Encoder {
  readonly id: string;
  readonly dim: number;
  /** One embedding row per input text; deterministic for fixed inputs. */
  encode(texts: string[], pooling: Pooling, maxTokens: number): Float32Array[];
}

/** 32-bit FNV-1a over a string, with a seed to derive independent hashes. */
function fnv1a(text: string, seed: number): number {
  let h = (0x811c9dc5 ^ seed) >>> 0;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

/**
 * Deterministic feature-hashing text encoder: every token and adjacent
 * token bigram maps to a signed coordinate, pooled over the sequence and
 * L2-normalized. No model weights, no I/O, fully reproducible; it stands
 * in for a pretrained transformer behind the same interface when none is
 * available locally.
 */
class FeatureHashingEncoder implements Encoder {
  constructor(readonly id: string, readonly dim: number) {}

  private addFeature(vec: Float64Array, feature: string): void {
    const index = fnv1a(feature, 0) % this.dim;
    const sign = fnv1a(feature, 0x9e3779b9) & 1 ? 1.0 : -1.0;
    vec[index] += sign;
  }

  private embedTokens(tokens: string[]): Float64Array {
    const vec = new Float64Array(this.dim);
    for (let i = 0; i < tokens.length; i++) {
      this.addFeature(vec, tokens[i]);
      if (i + 1 < tokens.length) this.addFeature(vec, `${tokens[i]} ${tokens[i + 1]}`);
    }
    return vec;
  }

  encode(texts: string[], pooling: Pooling, maxTokens: number): Float32Array[] {
    return texts.map((text) => {
      let tokens = tokenize(text);
      if (maxTokens > 0 && tokens.length > maxTokens) tokens = tokens.slice(0, maxTokens);
      const pooled =
        pooling === "cls" && tokens.length > 0
          ? this.embedTokens(tokens.slice(0, 1))
          : this.embedTokens(tokens);
      if (tokens.length > 1 && pooling === "mean") {
        for (let i = 0; i < this.dim; i++) pooled[i] /= tokens.length;
      }
      let norm = 0;
      for (let i = 0; i < this.dim; i++) norm += pooled[i] * pooled[i];
      norm = Math.sqrt(norm);
      const out = new Float32Array(this.dim);
      if (norm > 0) {
        for (let i = 0; i < this.dim; i++) out[i] = pooled[i] / norm;
      }
      return out;
    });
  }
}

/**
 * Resolve an encoder model identifier. Built in: `hash-<dim>`, e.g.
 * hash-256 or hash-768. Anything else fails with EncoderLoadFailure
 * (a transformer backend would hook in here).
 */
export function loadEncoder(modelId: string): Encoder {
  const match = /^hash-(\d+)$/.exec(modelId);
  if (!match) {
    throw new EncoderLoadFailure(modelId, "unknown model id (built-in encoders: hash-<dim>)");
  }
  const dim = Number(match[1]);
  if (dim < 2 || dim > 65536) {
    throw new EncoderLoadFailure(modelId, `dimension ${dim} out of range`);
  }
  return new FeatureHashingEncoder(modelId, dim);
}
