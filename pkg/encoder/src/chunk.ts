import { InvalidJobError } from "./errors.js";
import { tokenize } from "./tokenizer.js";

export interface Segment {
  /** `<passageId>#<i>` when a passage id is supplied, else `#<i>`. */
  id: string;
  tokens: string[];
  text: string;
}

export const MIN_CHUNK_LEN = 16;

/**
 * Split a text into token-boundary segments of exactly `chunkLen` tokens,
 * with the final segment carrying the remainder. Empty text gives an
 * empty list. Segment token arrays concatenate back to the original
 * token sequence.
 */
export function chunkText(text: string, chunkLen: number, passageId = ""): Segment[] {
  if (!Number.isInteger(chunkLen) || chunkLen < MIN_CHUNK_LEN) {
    throw new InvalidJobError(`chunk_len must be an integer >= ${MIN_CHUNK_LEN}, got ${chunkLen}`);
  }
  const tokens = tokenize(text);
  const segments: Segment[] = [];
  for (let start = 0; start < tokens.length; start += chunkLen) {
    const piece = tokens.slice(start, start + chunkLen);
    segments.push({
      id: `${passageId}#${segments.length}`,
      tokens: piece,
      text: piece.join(" "),
    });
  }
  return segments;
}

/** Recover the owning passage id from a chunk id (used by document-mode dedup). */
export function parentId(chunkId: string): string {
  const cut = chunkId.lastIndexOf("#");
  return cut < 0 ? chunkId : chunkId.slice(0, cut);
}
