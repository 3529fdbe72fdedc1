/**
 * Whitespace tokenization. Chunk boundaries and token budgets are defined
 * over this token sequence, so chunking is exactly reversible at the
 * token level (joining with single spaces).
 */
export function tokenize(text: string): string[] {
  return text.split(/\s+/).filter((t) => t.length > 0);
}
