import assert from "node:assert/strict";
import { test } from "node:test";

import { chunkText, parentId } from "../src/chunk.js";
import { tokenize } from "../src/tokenizer.js";

/** xorshift32: tiny deterministic generator for the random-text law. */
function makeRng(seed: number): () => number {
  let state = seed >>> 0 || 1;
  return () => {
    state ^= state << 13;
    state ^= state >>> 17;
    state ^= state << 5;
    state >>>= 0;
    return state / 0x100000000;
  };
}

function randomText(rng: () => number): string {
  const words = ["klage", "urteil", "frist", "vertrag", "satz", "norm", "recht", "absatz"];
  const n = Math.floor(rng() * 120);
  const parts: string[] = [];
  for (let i = 0; i < n; i++) {
    parts.push(words[Math.floor(rng() * words.length)]);
    if (rng() < 0.1) parts.push(" ");
  }
  return parts.join(rng() < 0.3 ? "  " : " ");
}

test("100-token text at chunk_len 40 gives 40/40/20", () => {
  const text = Array.from({ length: 100 }, (_, i) => `w${i}`).join(" ");
  const segments = chunkText(text, 40, "p7");
  assert.deepEqual(segments.map((s) => s.tokens.length), [40, 40, 20]);
  assert.deepEqual(segments.map((s) => s.id), ["p7#0", "p7#1", "p7#2"]);
});

test("short text yields a single segment", () => {
  const segments = chunkText("nur drei worte", 16, "p0");
  assert.equal(segments.length, 1);
  assert.deepEqual(segments[0].tokens, ["nur", "drei", "worte"]);
});

test("empty text yields no segments", () => {
  assert.deepEqual(chunkText("", 16, "p0"), []);
  assert.deepEqual(chunkText("   \n\t ", 16, "p0"), []);
});

test("chunk_len below 16 is rejected", () => {
  assert.throws(() => chunkText("a b c", 8, "p0"), /chunk_len/);
});

test("partition law on 100 random texts", () => {
  const rng = makeRng(20240808);
  for (let trial = 0; trial < 100; trial++) {
    const text = randomText(rng);
    const chunkLen = 16 + Math.floor(rng() * 48);
    const segments = chunkText(text, chunkLen, `p${trial}`);
    const original = tokenize(text);
    // segments concatenate to the original token sequence
    assert.deepEqual(
      segments.flatMap((s) => s.tokens),
      original,
    );
    // all but the last segment are exactly chunk_len tokens
    for (const segment of segments.slice(0, -1)) {
      assert.equal(segment.tokens.length, chunkLen);
    }
    if (segments.length > 0) {
      const last = segments[segments.length - 1];
      assert.ok(last.tokens.length >= 1 && last.tokens.length <= chunkLen);
    }
    // ids are dense and recover the parent passage
    segments.forEach((segment, i) => {
      assert.equal(segment.id, `p${trial}#${i}`);
      assert.equal(parentId(segment.id), `p${trial}`);
    });
  }
});
