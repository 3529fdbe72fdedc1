"""Column-wise z-score standardization for SVR feature rows.

Statistics accumulate in float64 (stable over millions of rows), output
stays float32. Population standard deviation, i.e. divide by the row
count, not by count - 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, LengthMismatchError

_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class FeatureScaler:
    means: np.ndarray       # float64 [F]
    stds: np.ndarray        # float64 [F], >= 0
    fitted_on: int

    @property
    def n_features(self) -> int:
        return self.means.shape[0]


def fit(rows: np.ndarray) -> FeatureScaler:
    rows = np.asarray(rows)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise EmptyInputError("scaler.fit needs a non-empty 2-D array")
    x = rows.astype(np.float64, copy=False)
    means = x.mean(axis=0)
    stds = np.sqrt(np.mean((x - means) ** 2, axis=0))
    return FeatureScaler(means=means, stds=stds, fitted_on=rows.shape[0])


def transform(s: FeatureScaler, row: np.ndarray) -> np.ndarray:
    """Standardize a single row or a matrix of rows, returning float32."""
    row = np.asarray(row)
    if row.shape[-1] != s.n_features:
        raise LengthMismatchError(
            f"row has {row.shape[-1]} features, scaler was fitted on {s.n_features}"
        )
    divisor = np.maximum(s.stds, _STD_FLOOR)
    out = (row.astype(np.float64, copy=False) - s.means) / divisor
    return out.astype(np.float32)
