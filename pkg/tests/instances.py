"""Shared fixture generator for the SMO-vs-oracle equivalence checks."""

import numpy as np

from needlestack.svr import SvrParams


def oracle_instances(seed: int = 1234, count: int = 20):
    """Seeded random SVR problems: n <= 12, F <= 3, C in {0.5, 1, 10},
    eps in {0.01, 0.1}, alternating RBF and linear kernels."""
    rng = np.random.default_rng(seed)
    out = []
    for trial in range(count):
        n = int(rng.integers(2, 13))
        n_features = int(rng.integers(1, 4))
        C = float(rng.choice([0.5, 1.0, 10.0]))
        eps = float(rng.choice([0.01, 0.1]))
        kernel = "rbf" if trial % 2 == 0 else "linear"
        X = rng.normal(size=(n, n_features)).astype(np.float32)
        y = rng.normal(size=n)
        probes = rng.normal(size=(50, n_features)).astype(np.float32)
        params = SvrParams(C=C, epsilon=eps, kernel=kernel, gamma="scale",
                           tol=1e-6, max_passes=200_000)
        out.append((X, y, probes, params))
    return out
