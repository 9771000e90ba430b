"""Lightweight regressors over reduced features: linear, quadratic, epsilon-SVR.

The SVR dual is solved by sequential pairwise optimization: at each step the
maximal-violating pair of dual coefficients moves along the equality
constraint, with the piecewise-quadratic one-dimensional subproblem solved
exactly (the epsilon-insensitive terms kink at zero). All models serialize
to self-describing JSON text that round-trips parameters bit-exactly.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "LinearModel",
    "PolyModel",
    "SvrModel",
    "SvrParams",
    "SvrConvergenceError",
    "fit_lr",
    "fit_pr",
    "fit_svr",
    "predict",
    "quadratic_expansion",
    "quadratic_dim",
    "save_model",
    "load_model",
    "dumps_model",
    "loads_model",
]


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray
    intercept: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if not (np.all(np.isfinite(w)) and np.isfinite(self.intercept)):
            raise ValueError("non-finite model parameters")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class PolyModel:
    """Second-order polynomial model over the expansion
    [1, x_1..x_k, x_1^2..x_k^2, x_i*x_j for i<j (lexicographic)].

    `weights` covers the expanded basis in that exact order (bias first).
    With interactions disabled the pairwise-product block is omitted.
    """

    weights: np.ndarray
    n_features: int
    interactions: bool = True

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        expected = quadratic_dim(self.n_features, self.interactions)
        if w.size != expected:
            raise ValueError(f"expected {expected} weights, got {w.size}")
        if not np.all(np.isfinite(w)):
            raise ValueError("non-finite model parameters")
        object.__setattr__(self, "weights", w)


def quadratic_dim(k: int, interactions: bool = True) -> int:
    """Expanded basis size: 1 + k + k(k+1)/2 (or 1 + 2k without interactions)."""
    return 1 + k + (k * (k + 1)) // 2 if interactions else 1 + 2 * k


def quadratic_expansion(x, interactions: bool = True) -> np.ndarray:
    """Map n x k inputs onto the documented quadratic basis (bias included)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected an n x k matrix")
    n, k = x.shape
    blocks = [np.ones((n, 1)), x, x ** 2]
    if interactions and k > 1:
        iu, ju = np.triu_indices(k, k=1)
        blocks.append(x[:, iu] * x[:, ju])
    return np.concatenate(blocks, axis=1)


def _lstsq_with_intercept(x, y, what: str):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n, k = x.shape
    if n != y.size:
        raise ValueError("X row count does not match y length")
    a = np.concatenate([np.ones((n, 1)), x], axis=1)
    if n <= k:
        warnings.warn(f"{what}: {n} samples for {k} features; "
                      "returning the minimal-norm least-squares fit")
    coef, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < a.shape[1] and n > k:
        warnings.warn(f"{what}: rank-deficient design (rank {rank} of {a.shape[1]}); "
                      "returning the minimal-norm least-squares fit")
    return coef


def fit_lr(x, y) -> LinearModel:
    """Ordinary least squares via orthogonal factorization (minimal-norm on rank deficiency)."""
    coef = _lstsq_with_intercept(x, y, "fit_lr")
    return LinearModel(coef[1:], float(coef[0]))


def fit_pr(x, y, interactions: bool = True, ridge: float = 0.0) -> PolyModel:
    """Least squares on the quadratic expansion; optional ridge penalty (bias unpenalized)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    a = quadratic_expansion(x, interactions)
    n, d = a.shape
    if n <= d:
        warnings.warn(f"fit_pr: {n} samples for {d} expanded terms; "
                      "returning the minimal-norm least-squares fit")
    if ridge > 0.0:
        penalty = np.sqrt(ridge) * np.eye(d)
        penalty[0, 0] = 0.0
        a = np.concatenate([a, penalty], axis=0)
        y = np.concatenate([y, np.zeros(d)])
    coef, _, _, _ = np.linalg.lstsq(a, y, rcond=None)
    return PolyModel(coef, x.shape[1], interactions)


class SvrConvergenceError(RuntimeError):
    """SMO hit the iteration cap; `.model` carries the best iterate."""

    def __init__(self, message: str, model: "SvrModel"):
        super().__init__(message)
        self.model = model


@dataclass(frozen=True)
class SvrParams:
    kernel: str = "rbf"
    c: float = 10.0
    epsilon: float | None = None  # None -> 0.1 * std(y)
    gamma: float | None = None    # None -> 1 / (k * var(X)) after scaling
    tol: float = 1e-3
    max_iter: int = 200_000

    def __post_init__(self):
        if self.kernel not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.c <= 0:
            raise ValueError("C must be positive")
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")


@dataclass(frozen=True)
class SvrModel:
    kernel: str
    gamma: float
    c: float
    epsilon: float
    support_vectors: np.ndarray   # already feature-scaled
    dual_coef: np.ndarray         # beta_i = alpha_i - alpha_i*
    support_idx: np.ndarray       # indices into the training set
    bias: float
    x_mean: np.ndarray
    x_std: np.ndarray
    n_iter: int = 0

    def __post_init__(self):
        for name in ("support_vectors", "dual_coef", "support_idx", "x_mean", "x_std"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))


def _kernel_matrix(kind: str, gamma: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return a @ b.T
    sq = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * (a @ b.T))
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _pair_objective(t, s, kii, kjj, kij, ri, rj, yi, yj, eps):
    # dual objective restricted to the pair, up to a constant
    u = s - t
    return (0.5 * kii * t * t + 0.5 * kjj * u * u + kij * t * u
            + t * ri + u * rj - yi * t - yj * u
            + eps * (abs(t) + abs(u)))


def _optimize_pair(s, lo, hi, kii, kjj, kij, ri, rj, yi, yj, eps):
    """Exact minimizer of the pair subproblem over t in [lo, hi] (beta_j = s - t)."""
    eta = kii + kjj - 2.0 * kij
    breaks = sorted({lo, hi} | {v for v in (0.0, s) if lo < v < hi})
    candidates = list(breaks)
    if eta > 0.0:
        for a, b in zip(breaks[:-1], breaks[1:]):
            mid = 0.5 * (a + b)
            sig1 = np.sign(mid) if mid != 0 else 0.0
            sig2 = np.sign(s - mid) if s - mid != 0 else 0.0
            t_star = ((kjj - kij) * s - (ri - rj) + (yi - yj) - eps * (sig1 - sig2)) / eta
            if a < t_star < b:
                candidates.append(t_star)
    vals = [_pair_objective(t, s, kii, kjj, kij, ri, rj, yi, yj, eps) for t in candidates]
    return candidates[int(np.argmin(vals))]


def fit_svr(x, y, params: SvrParams = SvrParams()) -> SvrModel:
    """Fit epsilon-SVR by SMO on the dual; raises SvrConvergenceError past the cap.

    Inputs are standardized per dimension inside the fit (the scaling is
    stored on the model). Scale covariance: replacing y by c*y while scaling
    epsilon and C by the same factor c scales all dual coefficients, the
    bias, and hence every prediction by c.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n, k = x.shape
    if n != y.size:
        raise ValueError("X row count does not match y length")
    if n < 1:
        raise ValueError("empty training set")

    x_mean = x.mean(axis=0)
    x_std = x.std(axis=0)
    x_std = np.where(x_std > 0, x_std, 1.0)
    xs = (x - x_mean) / x_std

    gamma = params.gamma
    if gamma is None:
        var = xs.var()
        gamma = 1.0 / (k * var) if var > 0 else 1.0 / k
    eps = params.epsilon
    if eps is None:
        eps = 0.1 * float(y.std())
    c = params.c

    kmat = _kernel_matrix(params.kernel, gamma, xs, xs)
    beta = np.zeros(n)
    u = np.zeros(n)  # u = K @ beta
    bound_slack = 1e-12 * max(1.0, c)

    n_iter = 0
    converged = False
    while n_iter < params.max_iter:
        f_up = y - u - eps    # b value putting point i exactly on the upper tube edge
        f_dn = y - u + eps
        lower = np.where(beta < 0, f_dn, f_up)     # constraints b >= lower[i]
        upper = np.where(beta > 0, f_up, f_dn)     # constraints b <= upper[i]
        can_raise = beta < c - bound_slack
        can_lower = beta > -c + bound_slack
        if not can_raise.any() or not can_lower.any():
            converged = True
            break
        i = int(np.argmax(np.where(can_raise, lower, -np.inf)))
        j = int(np.argmin(np.where(can_lower, upper, np.inf)))
        if lower[i] - upper[j] <= params.tol:
            converged = True
            break

        s = beta[i] + beta[j]
        lo = max(-c, s - c)
        hi = min(c, s + c)
        ri = u[i] - kmat[i, i] * beta[i] - kmat[i, j] * beta[j]
        rj = u[j] - kmat[i, j] * beta[i] - kmat[j, j] * beta[j]
        t = _optimize_pair(s, lo, hi, kmat[i, i], kmat[j, j], kmat[i, j],
                           ri, rj, y[i], y[j], eps)
        d_i = t - beta[i]
        d_j = (s - t) - beta[j]
        beta[i] += d_i
        beta[j] += d_j
        u += d_i * kmat[:, i] + d_j * kmat[:, j]
        n_iter += 1

    f_up = y - u - eps
    f_dn = y - u + eps
    lower = np.where(beta < 0, f_dn, f_up)
    upper = np.where(beta > 0, f_up, f_dn)
    can_raise = beta < c - bound_slack
    can_lower = beta > -c + bound_slack
    b_lo = float(np.max(lower[can_raise])) if can_raise.any() else -np.inf
    b_hi = float(np.min(upper[can_lower])) if can_lower.any() else np.inf
    if np.isfinite(b_lo) and np.isfinite(b_hi):
        bias = 0.5 * (b_lo + b_hi)
    else:
        bias = b_lo if np.isfinite(b_lo) else (b_hi if np.isfinite(b_hi) else float(y.mean()))

    sv_mask = np.abs(beta) > 1e-12 * max(1.0, c)
    model = SvrModel(params.kernel, float(gamma), float(c), float(eps),
                     xs[sv_mask], beta[sv_mask], np.flatnonzero(sv_mask),
                     float(bias), x_mean, x_std, n_iter)
    if not converged:
        raise SvrConvergenceError(
            f"SMO did not converge within {params.max_iter} pair steps "
            f"(KKT gap {lower.max() - upper.min():.3g})", model)
    return model


def predict(model, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("expected an n x k matrix")
    if isinstance(model, LinearModel):
        if x.shape[1] != model.weights.size:
            raise ValueError("dimension mismatch with trained model")
        return x @ model.weights + model.intercept
    if isinstance(model, PolyModel):
        if x.shape[1] != model.n_features:
            raise ValueError("dimension mismatch with trained model")
        return quadratic_expansion(x, model.interactions) @ model.weights
    if isinstance(model, SvrModel):
        if x.shape[1] != model.x_mean.size:
            raise ValueError("dimension mismatch with trained model")
        xs = (x - model.x_mean) / model.x_std
        if model.dual_coef.size == 0:
            return np.full(x.shape[0], model.bias)
        kmat = _kernel_matrix(model.kernel, model.gamma, xs, model.support_vectors)
        return kmat @ model.dual_coef + model.bias
    raise TypeError(f"unknown model type {type(model).__name__}")


def _arr(a) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def dumps_model(model) -> str:
    """Self-describing text serialization; floats round-trip bit-exactly."""
    if isinstance(model, LinearModel):
        doc = {"type": "linear", "weights": _arr(model.weights),
               "intercept": model.intercept}
    elif isinstance(model, PolyModel):
        doc = {"type": "poly", "weights": _arr(model.weights),
               "n_features": model.n_features, "interactions": model.interactions}
    elif isinstance(model, SvrModel):
        doc = {"type": "svr", "kernel": model.kernel, "gamma": model.gamma,
               "c": model.c, "epsilon": model.epsilon,
               "support_vectors": _arr(model.support_vectors),
               "dual_coef": _arr(model.dual_coef),
               "support_idx": model.support_idx.astype(int).tolist(),
               "bias": model.bias, "x_mean": _arr(model.x_mean),
               "x_std": _arr(model.x_std), "n_iter": model.n_iter}
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    return json.dumps(doc, sort_keys=True)


def loads_model(text: str):
    doc = json.loads(text)
    kind = doc.get("type")
    if kind == "linear":
        return LinearModel(np.array(doc["weights"]), float(doc["intercept"]))
    if kind == "poly":
        return PolyModel(np.array(doc["weights"]), int(doc["n_features"]),
                         bool(doc["interactions"]))
    if kind == "svr":
        sv = np.array(doc["support_vectors"], dtype=np.float64)
        if sv.size == 0:
            sv = sv.reshape(0, len(doc["x_mean"]))
        return SvrModel(doc["kernel"], float(doc["gamma"]), float(doc["c"]),
                        float(doc["epsilon"]), sv,
                        np.array(doc["dual_coef"], dtype=np.float64),
                        np.array(doc["support_idx"], dtype=int),
                        float(doc["bias"]), np.array(doc["x_mean"]),
                        np.array(doc["x_std"]), int(doc["n_iter"]))
    raise ValueError(f"unknown model type tag {kind!r}")


def save_model(model, path) -> None:
    Path(path).write_text(dumps_model(model) + "\n", encoding="utf-8")


def load_model(path):
    return loads_model(Path(path).read_text(encoding="utf-8"))
