"""Dense reference solver for the epsilon-SVR dual problem.

Solves, over the 2n variables a = (alpha, alpha_star),

    minimize   0.5 * b' K b  +  eps * sum(a)  -  y' b      with b = alpha - alpha_star
    subject to 0 <= a <= C,   sum(alpha) == sum(alpha_star)

by accelerated projected gradient descent, where the projection onto
{box intersect hyperplane} is computed exactly via bisection on the
hyperplane multiplier. Slow and simple on purpose: this module is the
independent ground truth the sequential solver is checked against, so
it shares no code path with it. Runs to an objective stall of ~1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class ReferenceSolution:
    beta: np.ndarray        # float64 [n], alpha - alpha_star
    alpha: np.ndarray       # float64 [n]
    alpha_star: np.ndarray  # float64 [n]
    bias: float
    objective: float
    iterations: int


def dual_value(K: np.ndarray, y: np.ndarray, beta: np.ndarray, epsilon: float) -> float:
    """Dual objective at beta using the minimal-norm (alpha, alpha*) split."""
    return float(0.5 * beta @ K @ beta + epsilon * np.abs(beta).sum() - y @ beta)


def _project(v: np.ndarray, C: float, z: np.ndarray) -> np.ndarray:
    """Euclidean projection of v onto {0 <= x <= C, z.x = 0}, z in {+1,-1}^2n."""
    lo = -(np.abs(v).max() + C + 1.0)
    hi = -lo
    for _ in range(128):
        mid = 0.5 * (lo + hi)
        g = z @ np.clip(v - mid * z, 0.0, C)
        if g > 0.0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi) * z, 0.0, C)


def solve_dual(
    K: np.ndarray,
    y: np.ndarray,
    C: float,
    epsilon: float,
    stall_tol: float = 1e-10,
    max_iter: int = 200_000,
) -> ReferenceSolution:
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = y.shape[0]
    z = np.concatenate([np.ones(n), -np.ones(n)])

    def objective(a: np.ndarray) -> float:
        beta = a[:n] - a[n:]
        return float(0.5 * beta @ K @ beta + epsilon * a.sum() - y @ beta)

    def gradient(a: np.ndarray) -> np.ndarray:
        kb = K @ (a[:n] - a[n:])
        return np.concatenate([kb + epsilon - y, -kb + epsilon + y])

    # Lipschitz constant of the gradient: the 2n Hessian [[K,-K],[-K,K]]
    # has spectral norm 2 * lambda_max(K).
    lam = float(np.linalg.eigvalsh(0.5 * (K + K.T)).max()) if n > 0 else 0.0
    step = 1.0 / max(2.0 * lam, 1e-12)

    x = np.zeros(2 * n)
    v = x.copy()
    t = 1.0
    fx = objective(x)
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        cand = _project(v - step * gradient(v), C, z)
        fcand = objective(cand)
        if fcand > fx:
            # momentum overshoot: restart from the best point
            v = x.copy()
            t = 1.0
            cand = _project(x - step * gradient(x), C, z)
            fcand = objective(cand)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        v = cand + ((t - 1.0) / t_next) * (cand - x)
        improvement = fx - fcand
        x, fx, t = cand, fcand, t_next
        if improvement <= stall_tol * max(1.0, abs(fx)):
            stall += 1
            if stall >= 20:
                break
        else:
            stall = 0

    alpha = x[:n]
    alpha_star = x[n:]
    beta = alpha - alpha_star
    beta = _active_set_polish(K, y, C, epsilon, beta)
    alpha = np.maximum(beta, 0.0)
    alpha_star = np.maximum(-beta, 0.0)
    obj = dual_value(K, y, beta, epsilon)
    bias = _bias_from_kkt(K, y, alpha, alpha_star, C, epsilon)
    return ReferenceSolution(
        beta=beta, alpha=alpha, alpha_star=alpha_star,
        bias=bias, objective=obj, iterations=it,
    )


def _active_set_polish(
    K: np.ndarray,
    y: np.ndarray,
    C: float,
    epsilon: float,
    beta: np.ndarray,
) -> np.ndarray:
    """Refine a near-optimal beta by solving the free-set KKT system exactly.

    With the active set fixed (variables at 0 or +-C), stationarity of the
    free variables plus the sum constraint is linear; solving it removes
    the slow tail of the first-order iteration along flat directions. The
    refined point is kept only when it stays feasible, keeps its signs,
    and does not increase the dual objective.
    """
    atol = 1e-7 * max(1.0, C)
    free = np.flatnonzero((np.abs(beta) > atol) & (np.abs(beta) < C - atol))
    if free.size == 0:
        return beta
    bound = np.setdiff1d(np.arange(beta.shape[0]), free)
    beta_b = beta[bound].copy()
    beta_b[np.abs(beta_b) <= atol] = 0.0
    beta_b[np.abs(beta_b - C) <= atol] = C
    beta_b[np.abs(beta_b + C) <= atol] = -C
    signs = np.sign(beta[free])
    nf = free.size
    A = np.zeros((nf + 1, nf + 1))
    A[:nf, :nf] = K[np.ix_(free, free)]
    A[:nf, nf] = 1.0
    A[nf, :nf] = 1.0
    rhs = np.zeros(nf + 1)
    rhs[:nf] = y[free] - epsilon * signs - K[np.ix_(free, bound)] @ beta_b
    rhs[nf] = -beta_b.sum()
    try:
        sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    except np.linalg.LinAlgError:
        return beta
    candidate = beta.copy()
    candidate[bound] = beta_b
    candidate[free] = sol[:nf]
    if np.abs(candidate).max() > C + 1e-12 * max(1.0, C):
        return beta
    if np.any(np.sign(candidate[free]) != signs):
        return beta
    if abs(candidate.sum()) > 1e-8 * max(1.0, C):
        return beta
    if dual_value(K, y, candidate, epsilon) > dual_value(K, y, beta, epsilon) + 1e-12:
        return beta
    np.clip(candidate, -C, C, out=candidate)
    return candidate


def _bias_from_kkt(
    K: np.ndarray,
    y: np.ndarray,
    alpha: np.ndarray,
    alpha_star: np.ndarray,
    C: float,
    epsilon: float,
) -> float:
    """Midpoint of the feasible bias interval implied by the KKT conditions."""
    e = K @ (alpha - alpha_star) - y
    atol = 1e-8 * max(1.0, C)
    lower = []
    upper = []
    for i in range(y.shape[0]):
        lo_val = -e[i] - epsilon   # from the alpha side
        up_val = -e[i] + epsilon   # from the alpha_star side
        if alpha[i] < C - atol:
            lower.append(lo_val)
        if alpha[i] > atol:
            upper.append(lo_val)
        if alpha_star[i] > atol:
            lower.append(up_val)
        if alpha_star[i] < C - atol:
            upper.append(up_val)
    if not lower or not upper:
        return 0.0
    return 0.5 * (max(lower) + min(upper))


def kkt_gap(
    K: np.ndarray,
    y: np.ndarray,
    alpha: np.ndarray,
    alpha_star: np.ndarray,
    C: float,
    epsilon: float,
) -> float:
    """max(lower bias candidates) - min(upper candidates); <= 0 at optimality."""
    e = K @ (alpha - alpha_star) - y
    atol = 1e-8 * max(1.0, C)
    lower = [-np.inf]
    upper = [np.inf]
    for i in range(y.shape[0]):
        if alpha[i] < C - atol:
            lower.append(-e[i] - epsilon)
        if alpha[i] > atol:
            upper.append(-e[i] - epsilon)
        if alpha_star[i] > atol:
            lower.append(-e[i] + epsilon)
        if alpha_star[i] < C - atol:
            upper.append(-e[i] + epsilon)
    return float(max(lower) - min(upper))


def predict(
    X: np.ndarray,
    sol: ReferenceSolution,
    kernel_fn,
    probes: np.ndarray,
) -> np.ndarray:
    """f(x) = sum_i beta_i k(x_i, x) + b over all training rows."""
    G = kernel_fn(np.asarray(X, dtype=np.float64), np.asarray(probes, dtype=np.float64))
    return sol.beta @ G + sol.bias
