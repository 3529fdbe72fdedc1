"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved in the halved parameterization beta_i = alpha_i -
alpha_i_star, each beta_i box-constrained to [-C, C] with sum(beta) = 0:

    minimize 0.5 * beta' K beta + eps * ||beta||_1 - y' beta

Sequential minimal optimization: each step takes the index with the
largest KKT violation, pairs it with the partner promising the largest
second-order objective decrease, and minimizes the one-dimensional
piecewise-quadratic subproblem exactly, so the dual objective never
increases and sum(beta) = 0 is preserved by construction. Convergence
is declared when the bias window (max lower bound minus min upper
bound) closes below tol. Kernel values are computed in float64 on
float32 inputs.

svr_reference solves the same dual by a dense projected-gradient method
and serves as the independent correctness oracle; nothing here shares
code with it.
"""

from __future__ import annotations

import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    EmptyInputError,
    InfeasiblePointError,
    InvalidParamsError,
    LengthMismatchError,
    NonFiniteInputError,
)

_FULL_KERNEL_LIMIT = 8192   # above this, rows are computed on demand (LRU)
_LRU_ROWS = 1024

KERNELS = ("rbf", "linear")


@dataclass(frozen=True)
class SvrParams:
    """Hyperparameters. gamma='scale' resolves to 1 / (n_features * Var(X)).

    max_passes caps the number of two-variable working-set updates; None
    resolves to 10 * n_samples at fit time. The 'linear' kernel exists
    for oracle tests only; production training uses 'rbf'.
    """

    C: float = 1.0
    epsilon: float = 0.1
    gamma: float | str = "scale"
    tol: float = 1e-3
    max_passes: int | None = None
    kernel: str = "rbf"

    def validate(self) -> None:
        if not self.C > 0:
            raise InvalidParamsError(f"C must be > 0, got {self.C}")
        if self.epsilon < 0:
            raise InvalidParamsError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.tol > 0:
            raise InvalidParamsError(f"tol must be > 0, got {self.tol}")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise InvalidParamsError(f"gamma must be positive or 'scale', got {self.gamma!r}")
        elif not self.gamma > 0:
            raise InvalidParamsError(f"gamma must be positive or 'scale', got {self.gamma}")
        if self.kernel not in KERNELS:
            raise InvalidParamsError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")


@dataclass
class TrainSummary:
    iterations: int
    converged: bool
    kkt_residual: float
    objective: float
    n_support: int
    objective_trace: list[float] | None = None


@dataclass
class SvrModel:
    """Trained regressor: f(x) = sum_i beta_i * k(sv_i, x) + bias."""

    support_vectors: np.ndarray         # float32 [S, F]
    beta: np.ndarray                    # float64 [S], all nonzero
    bias: float
    gamma: float
    params: SvrParams
    support_row_idx: np.ndarray | None = None   # training-row provenance, not serialized
    summary: TrainSummary | None = field(default=None, compare=False)

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]


def rbf_kernel(x: np.ndarray, y: np.ndarray, gamma: float) -> float:
    """exp(-gamma * squared Euclidean distance); 1 at x == y."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] != y.shape[0]:
        raise LengthMismatchError(f"kernel inputs of length {x.shape[0]} and {y.shape[0]}")
    if not gamma > 0:
        raise InvalidParamsError(f"gamma must be > 0, got {gamma}")
    d = x - y
    return math.exp(-gamma * float(d @ d))


def kernel_matrix(A: np.ndarray, B: np.ndarray, kind: str, gamma: float) -> np.ndarray:
    """Pairwise kernel values, float64 [len(A), len(B)]."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if kind == "linear":
        return A @ B.T
    sq = (
        np.einsum("ij,ij->i", A, A)[:, None]
        + np.einsum("ij,ij->i", B, B)[None, :]
        - 2.0 * (A @ B.T)
    )
    np.maximum(sq, 0.0, out=sq)
    K = np.exp(-gamma * sq)
    if A is B:
        np.fill_diagonal(K, 1.0)
    return K


def resolve_gamma(params: SvrParams, X: np.ndarray) -> float:
    if params.kernel == "linear":
        return 0.0
    if isinstance(params.gamma, str):
        var = float(np.asarray(X, dtype=np.float64).var())
        n_features = X.shape[1]
        return 1.0 / (n_features * var) if var > 0 else 1.0 / n_features
    return float(params.gamma)


class _Kernel:
    """Row access to the training kernel matrix, dense or LRU-cached."""

    def __init__(self, X64: np.ndarray, kind: str, gamma: float):
        self.X = X64
        self.kind = kind
        self.gamma = gamma
        n = X64.shape[0]
        if kind == "linear":
            self.diag = np.einsum("ij,ij->i", X64, X64)
        else:
            self.diag = np.ones(n)
        if n <= _FULL_KERNEL_LIMIT:
            self._full = kernel_matrix(X64, X64, kind, gamma)
            self._cache = None
        else:
            self._full = None
            self._cache: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        if self._full is not None:
            return self._full[i]
        cached = self._cache.get(i)
        if cached is not None:
            self._cache.move_to_end(i)
            return cached
        r = kernel_matrix(self.X[i:i + 1], self.X, self.kind, self.gamma)[0]
        if self.kind == "rbf":
            r[i] = 1.0
        self._cache[i] = r
        if len(self._cache) > _LRU_ROWS:
            self._cache.popitem(last=False)
        return r

    def dot(self, beta: np.ndarray, support: np.ndarray) -> np.ndarray:
        """K @ beta restricted to the nonzero rows listed in support."""
        if self._full is not None:
            return self._full[:, support] @ beta[support]
        G = kernel_matrix(self.X[support], self.X, self.kind, self.gamma)
        if self.kind == "rbf":
            for pos, i in enumerate(support):
                G[pos, i] = 1.0
        return beta[support] @ G


def _solve_pair(bi: float, bj: float, ei: float, ej: float,
                eta: float, eps: float, C: float) -> tuple[float, float]:
    """Exact minimizer of the pair subproblem over t in [0, t_max].

    phi(t) = 0.5*eta*t^2 + (ei-ej)*t + eps*(|bi+t| - |bi|) + eps*(|bj-t| - |bj|)
    """
    t_max = min(C - bi, bj + C)
    if t_max <= 0.0:
        return 0.0, 0.0
    points = [0.0]
    for brk in (-bi, bj):
        if 0.0 < brk < t_max:
            points.append(brk)
    points.append(t_max)
    points.sort()

    def phi(t: float) -> float:
        return (0.5 * eta * t * t + (ei - ej) * t
                + eps * (abs(bi + t) - abs(bi))
                + eps * (abs(bj - t) - abs(bj)))

    best_t, best_val = 0.0, 0.0
    for a, b in zip(points[:-1], points[1:]):
        mid = 0.5 * (a + b)
        si = 1.0 if bi + mid >= 0.0 else -1.0
        sj = 1.0 if bj - mid >= 0.0 else -1.0
        slope0 = (ei - ej) + eps * (si - sj)
        if eta > 0.0:
            t = min(max(-slope0 / eta, a), b)
        else:
            t = a if slope0 >= 0.0 else b
        val = phi(t)
        if val < best_val:
            best_t, best_val = t, val
    return best_t, best_val


def train_svr(
    X: np.ndarray,
    y: np.ndarray,
    params: SvrParams = SvrParams(),
    record_objective: bool = False,
) -> SvrModel:
    """Fit by SMO. Non-convergence within the pass budget is a warning,
    not an error; the residual is reported in the model summary."""
    params.validate()
    X = np.ascontiguousarray(X, dtype=np.float32)
    if X.ndim != 2:
        raise EmptyInputError("X must be a 2-D array")
    n, n_features = X.shape
    if n < 1:
        raise EmptyInputError("training set is empty")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != n:
        raise LengthMismatchError(f"{n} rows but {y.shape[0]} targets")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise NonFiniteInputError("training data contains NaN or Inf")

    C = float(params.C)
    eps = float(params.epsilon)
    tol = float(params.tol)
    gamma = resolve_gamma(params, X)
    max_updates = params.max_passes if params.max_passes is not None else 10 * n
    snap = 1e-12 * max(1.0, C)

    X64 = X.astype(np.float64)
    kern = _Kernel(X64, params.kernel, gamma)
    beta = np.zeros(n)
    E = -y.copy()           # K beta - y at beta = 0
    objective = 0.0
    trace = [0.0] if record_objective else None

    iterations = 0
    while iterations < max_updates:
        up_vals = np.where(beta < 0.0, -E + eps, -E - eps)
        up_vals[beta >= C] = -np.inf
        dn_vals = np.where(beta > 0.0, -E - eps, -E + eps)
        dn_vals[beta <= -C] = np.inf
        i = int(np.argmax(up_vals))
        if up_vals[i] - dn_vals.min() <= tol:
            break
        row_i = kern.row(i)
        # second index: largest second-order decrease estimate among
        # violating partners (slope^2 / curvature), not the plain argmin;
        # the maximal-violation partner stalls badly at large C
        slope = up_vals[i] - dn_vals
        curv = np.maximum(kern.diag[i] + kern.diag - 2.0 * row_i, 1e-12)
        with np.errstate(invalid="ignore"):
            gain = np.where(slope > 0.0, slope * slope / curv, -np.inf)
        j = int(np.argmax(gain))
        row_j = kern.row(j)
        eta = max(kern.diag[i] + kern.diag[j] - 2.0 * row_i[j], 0.0)
        t, delta = _solve_pair(beta[i], beta[j], E[i], E[j], eta, eps, C)
        if t <= 0.0:
            break   # numerically stuck below tol resolution
        beta[i] += t
        beta[j] -= t
        for idx in (i, j):
            b = beta[idx]
            if abs(b - C) <= snap:
                beta[idx] = C
            elif abs(b + C) <= snap:
                beta[idx] = -C
            elif abs(b) <= snap:
                beta[idx] = 0.0
        E += t * (row_i - row_j)
        objective += delta
        iterations += 1
        assert delta <= 1e-9, "dual objective increased"
        assert abs(beta[i]) <= C + 1e-9 and abs(beta[j]) <= C + 1e-9
        if trace is not None:
            trace.append(objective)
        if iterations % (n + 1) == 0:
            assert abs(beta.sum()) <= 1e-6 * max(1.0, C) * n

    support = np.flatnonzero(beta)
    E = kern.dot(beta, support) - y if support.size else -y.copy()
    up_vals = np.where(beta < 0.0, -E + eps, -E - eps)
    up_vals[beta >= C] = -np.inf
    dn_vals = np.where(beta > 0.0, -E - eps, -E + eps)
    dn_vals[beta <= -C] = np.inf
    residual = float(up_vals.max() - dn_vals.min())
    bias = 0.5 * float(up_vals.max() + dn_vals.min())
    converged = residual <= tol
    if not converged:
        warnings.warn(
            f"SMO stopped after {iterations} updates with KKT residual "
            f"{residual:.3e} > tol {tol:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    final_objective = float(0.5 * beta @ (E + y) + eps * np.abs(beta).sum() - y @ beta)

    summary = TrainSummary(
        iterations=iterations,
        converged=converged,
        kkt_residual=residual,
        objective=final_objective,
        n_support=int(support.size),
        objective_trace=trace,
    )
    resolved = replace(params, gamma=gamma if params.kernel == "rbf" else params.gamma)
    return SvrModel(
        support_vectors=X[support].copy(),
        beta=beta[support].copy(),
        bias=bias,
        gamma=gamma,
        params=resolved,
        support_row_idx=support,
        summary=summary,
    )


def predict(m: SvrModel, x: np.ndarray):
    """f(x) for a single vector (returns float) or a matrix of rows."""
    x = np.asarray(x, dtype=np.float32)
    single = x.ndim == 1
    rows = x.reshape(1, -1) if single else x
    if rows.shape[1] != m.n_features:
        raise LengthMismatchError(
            f"input has {rows.shape[1]} features, model expects {m.n_features}"
        )
    if m.beta.shape[0] == 0:
        out = np.full(rows.shape[0], m.bias)
    else:
        G = kernel_matrix(m.support_vectors, rows, m.params.kernel, m.gamma)
        out = m.beta @ G + m.bias
    return float(out[0]) if single else out


def dual_objective(beta: np.ndarray, X: np.ndarray, y: np.ndarray,
                   params: SvrParams) -> float:
    """Dual value at a feasible beta, eps-term via the minimal-norm split."""
    params.validate()
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    X = np.asarray(X, dtype=np.float32)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = beta.shape[0]
    if np.abs(beta).max(initial=0.0) > params.C + 1e-9 * max(1.0, params.C):
        raise InfeasiblePointError("beta outside the [-C, C] box")
    if abs(float(beta.sum())) > params.tol * max(1, n):
        raise InfeasiblePointError("sum(beta) != 0 beyond tolerance")
    gamma = resolve_gamma(params, X)
    K = kernel_matrix(X, X, params.kernel, gamma)
    return float(0.5 * beta @ K @ beta + params.epsilon * np.abs(beta).sum() - y @ beta)


def kkt_violation(m: SvrModel, X: np.ndarray, y: np.ndarray) -> float:
    """Largest per-point violation of the eps-tube KKT conditions at the
    model's own bias. Requires training-row provenance on the model."""
    if m.support_row_idx is None:
        raise InvalidParamsError("model lacks support_row_idx; cannot map rows to beta")
    X = np.asarray(X, dtype=np.float32)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = X.shape[0]
    beta = np.zeros(n)
    beta[np.asarray(m.support_row_idx, dtype=np.int64)] = m.beta
    r = np.asarray(predict(m, X), dtype=np.float64) - y
    C = float(m.params.C)
    eps = float(m.params.epsilon)
    btol = 1e-12 * max(1.0, C)
    worst = 0.0
    for i in range(n):
        b = beta[i]
        if b >= C - btol:
            v = max(0.0, r[i] + eps)
        elif b > btol:
            v = abs(r[i] + eps)
        elif b <= -C + btol:
            v = max(0.0, eps - r[i])
        elif b < -btol:
            v = abs(r[i] - eps)
        else:
            v = max(0.0, abs(r[i]) - eps)
        worst = max(worst, v)
    return worst
