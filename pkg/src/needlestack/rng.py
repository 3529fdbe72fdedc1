"""Deterministic pseudorandom primitives for reproducible partitioning.

Bagging plans and train/test row splits must be byte-reproducible across
processes, thread counts and (ideally) reimplementations in other
languages, so they are driven by a fully specified generator rather than
by whatever a library's default stream happens to be.

Generator
    SplitMix64. The k-th output (k = 0, 1, ...) of a stream with seed s is

        out_k = mix64((s + (k + 1) * 0x9E3779B97F4A7C15) mod 2^64)

    where mix64 is the finalizer

        z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
        z ^= z >> 27;  z *= 0x94D049BB133111EB
        z ^= z >> 31

    with all arithmetic modulo 2^64.

Bounded draws
    below(b) = out_k mod b. The modulo bias is at most b / 2^64, which is
    irrelevant at the corpus sizes this package handles and keeps the
    draw a single output word (easy to port, easy to vectorize).

Shuffle
    Fisher-Yates, descending: for i = n-1 .. 1 swap a[i] with
    a[below(i + 1)]. Consumes exactly n - 1 outputs.

Partial sample
    sample(pool, m): for t = 0 .. m-1 swap pool[t] with
    pool[t + below(len(pool) - t)], return pool[:m]. Consumes m outputs.

Derived seeds
    derive_seed(seed, *parts) folds each part into the state with
    state = mix64(state XOR mix64(part + 0x9E3779B97F4A7C15)), giving
    independent child streams for e.g. per-subset row splits.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *parts: int) -> int:
    state = seed & _MASK
    for part in parts:
        state = mix64(state ^ mix64((part + _GOLDEN) & _MASK))
    return state


def _outputs(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs start+1 .. start+count of the stream, vectorized."""
    with np.errstate(over="ignore"):
        ks = np.arange(start + 1, start + count + 1, dtype=np.uint64)
        z = np.uint64(seed & _MASK) + ks * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Sequential view of the stream; next() matches _outputs order."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK
        self._k = 0

    def next_u64(self) -> int:
        self._k += 1
        return mix64((self.seed + self._k * _GOLDEN) & _MASK)

    def below(self, bound: int) -> int:
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound

    def shuffle(self, items: list) -> None:
        n = len(items)
        if n < 2:
            return
        draws = _outputs(self.seed, self._k, n - 1)
        bounds = np.arange(n, 1, -1, dtype=np.uint64)
        js = (draws % bounds).tolist()
        self._k += n - 1
        for i, j in zip(range(n - 1, 0, -1), js):
            items[i], items[j] = items[j], items[i]

    def sample(self, pool, m: int):
        """m distinct items from pool (list or ndarray, consumed in place);
        the draw sequence is identical for both container types."""
        n = len(pool)
        if m > n:
            raise ValueError(f"cannot sample {m} from pool of {n}")
        if m == 0:
            return pool[:0]
        draws = _outputs(self.seed, self._k, m)
        bounds = np.arange(n, n - m, -1, dtype=np.uint64)
        js = (draws % bounds).tolist()
        self._k += m
        for t, j in enumerate(js):
            r = t + j
            pool[t], pool[r] = pool[r], pool[t]
        return pool[:m]
