"""Gaussian mixture models: seeded k-means, EM fitting, BIC model selection.

All randomness flows through numpy Generators built from explicit seeds, so
every routine is deterministic for a fixed (data, seed) pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import (
    DimensionMismatch,
    EmptyData,
    NumericalFailure,
    TooFewSamples,
)

# Floor added to every fitted covariance diagonal. Keeps covariances SPD in
# the presence of degenerate (e.g. identical) samples.
SIGMA_MIN = 1e-6

_LOG_2PI = math.log(2.0 * math.pi)


def _check_spd(cov: np.ndarray, what: str) -> None:
    if not np.allclose(cov, cov.T, rtol=1e-7, atol=1e-12):
        raise ValueError(f"{what} is not symmetric")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as e:
        raise ValueError(f"{what} is not positive definite: {e}") from e


@dataclass(frozen=True)
class Gaussian:
    """A single d-dimensional Gaussian with full covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        cov = np.array(self.cov, dtype=np.float64)
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise DimensionMismatch(f"cov shape {cov.shape} does not match mean dim {d}")
        _check_spd(cov, "covariance")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def d(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """An ordered Gaussian mixture: weights (K,), means (K, d), covs (K, d, d).

    Weights are strictly positive and sum to 1.
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        means = np.array(self.means, dtype=np.float64)
        covs = np.array(self.covs, dtype=np.float64)
        k = weights.shape[0]
        if k == 0:
            raise EmptyData("a mixture needs at least one component")
        if means.ndim != 2 or means.shape[0] != k:
            raise DimensionMismatch(f"means shape {means.shape} does not match K={k}")
        d = means.shape[1]
        if covs.shape != (k, d, d):
            raise DimensionMismatch(f"covs shape {covs.shape} does not match (K={k}, d={d})")
        if not (np.isfinite(weights).all() and np.isfinite(means).all() and np.isfinite(covs).all()):
            raise NumericalFailure("mixture parameters must be finite")
        if (weights <= 0.0).any():
            raise ValueError("mixture weights must be strictly positive")
        if abs(float(weights.sum()) - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {weights.sum()!r}, expected 1")
        for i in range(k):
            _check_spd(covs[i], f"component {i} covariance")
        for arr in (weights, means, covs):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]

    @property
    def components(self) -> list[tuple[float, Gaussian]]:
        return [
            (float(w), Gaussian(m, c))
            for w, m, c in zip(self.weights, self.means, self.covs)
        ]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MixtureModel):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.covs, other.covs)
        )


def _as_data(data: np.ndarray) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionMismatch(f"data must be (n, d), got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise EmptyData("no data points")
    if not np.isfinite(arr).all():
        raise NumericalFailure("data contains non-finite values")
    return arr


def _kmeans_pp(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: iteratively sample centers with probability
    proportional to squared distance from the nearest chosen center."""
    n = data.shape[0]
    centroids = np.empty((k, data.shape[1]))
    idx = int(rng.integers(n))
    centroids[0] = data[idx]
    d2 = ((data - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining points coincide with chosen centers
            idx = int(rng.integers(n))
        centroids[i] = data[idx]
        d2 = np.minimum(d2, ((data - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans(data: np.ndarray, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm with k-means++ seeding.

    Runs until assignments stop changing or 100 iterations. A cluster left
    empty by an assignment step is reseeded to the point farthest from its
    current centroid. Returns (centroids (k, d), assignments (n,)).
    """
    arr = _as_data(data)
    n = arr.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < k:
        raise TooFewSamples(f"{n} samples for k={k} clusters")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(arr, k, rng)
    prev = None
    for _ in range(100):
        d2 = ((arr[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        counts = np.bincount(assign, minlength=k)
        for j in np.flatnonzero(counts == 0):
            far = int(d2[np.arange(n), assign].argmax())
            assign[far] = j
            d2[far] = 0.0  # keep a second empty cluster from stealing it
            counts = np.bincount(assign, minlength=k)
        if prev is not None and np.array_equal(assign, prev):
            break
        prev = assign
        for j in range(k):
            centroids[j] = arr[assign == j].mean(axis=0)
    return centroids, assign


def _chol_or_fail(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"covariance not positive definite: {e}") from e


def _component_log_pdfs(model: MixtureModel, x: np.ndarray) -> np.ndarray:
    """log N(x | mu_i, Sigma_i) for every point/component, shape (n, K)."""
    n = x.shape[0]
    out = np.empty((n, model.k))
    for i in range(model.k):
        L = _chol_or_fail(model.covs[i])
        diff = (x - model.means[i]).T
        sol = solve_triangular(L, diff, lower=True, check_finite=False)
        log_det = 2.0 * np.log(np.diag(L)).sum()
        out[:, i] = -0.5 * (model.d * _LOG_2PI + log_det + (sol**2).sum(axis=0))
    return out


def log_pdf_many(model: MixtureModel, x: np.ndarray) -> np.ndarray:
    """Mixture log-density at each row of x, computed via log-sum-exp."""
    arr = _as_data(x)
    if arr.shape[1] != model.d:
        raise DimensionMismatch(f"points have dim {arr.shape[1]}, model has {model.d}")
    comp = _component_log_pdfs(model, arr) + np.log(model.weights)[None, :]
    return logsumexp(comp, axis=1)


def log_pdf(model: MixtureModel, x) -> float:
    """Mixture log-density at a single point."""
    return float(log_pdf_many(model, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def sample(model: MixtureModel, n: int, seed: int) -> np.ndarray:
    """Draw n points: a categorical component draw, then the component's
    Gaussian via its Cholesky factor. Deterministic for fixed seed."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    rng = np.random.default_rng(seed)
    out = np.empty((n, model.d))
    if n == 0:
        return out
    which = rng.choice(model.k, size=n, p=model.weights)
    z = rng.standard_normal((n, model.d))
    for i in range(model.k):
        mask = which == i
        if not mask.any():
            continue
        L = _chol_or_fail(model.covs[i])
        out[mask] = model.means[i] + z[mask] @ L.T
    return out


def _floored_cov(points: np.ndarray, mean: np.ndarray, cov_floor: float) -> np.ndarray:
    diff = points - mean
    cov = diff.T @ diff / points.shape[0]
    return cov + cov_floor * np.eye(points.shape[1])


def _init_from_kmeans(
    arr: np.ndarray, k: int, seed: int, cov_floor: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n, d = arr.shape
    centroids, assign = kmeans(arr, k, seed)
    weights = np.bincount(assign, minlength=k).astype(np.float64)
    means = centroids.copy()
    covs = np.empty((k, d, d))
    global_cov = _floored_cov(arr, arr.mean(axis=0), cov_floor)
    for j in range(k):
        pts = arr[assign == j]
        if pts.shape[0] == 0:
            # degenerate data (e.g. duplicates); give the empty cluster a
            # tiny weight and the global covariance so EM can proceed
            weights[j] = 1.0
            covs[j] = global_cov
        else:
            covs[j] = _floored_cov(pts, means[j], cov_floor)
    weights /= weights.sum()
    return weights, means, covs


def em_fit(
    data: np.ndarray,
    k: int,
    seed: int,
    tol: float = 1e-6,
    max_iter: int = 200,
    cov_floor: float = SIGMA_MIN,
) -> tuple[MixtureModel, list[float]]:
    """Fit a k-component mixture with EM.

    Initialization comes from :func:`kmeans` (weights = cluster fractions,
    means = centroids, covariances = per-cluster MLE + cov_floor * I). Every
    M-step covariance also gets the cov_floor diagonal. Iterates until the
    change in mean per-sample log-likelihood drops below ``tol`` or
    ``max_iter`` iterations.

    Returns (model, trace) where trace holds the mean log-likelihood at each
    EM iteration; the trace is non-decreasing for a stable fit.
    """
    arr = _as_data(data)
    n, d = arr.shape
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < k:
        raise TooFewSamples(f"{n} samples for k={k} components")
    weights, means, covs = _init_from_kmeans(arr, k, seed, cov_floor)
    trace: list[float] = []
    prev_ll = None
    for _ in range(max_iter):
        # E step in log space
        comp = np.empty((n, k))
        for i in range(k):
            L = _chol_or_fail(covs[i])
            diff = (arr - means[i]).T
            sol = solve_triangular(L, diff, lower=True, check_finite=False)
            log_det = 2.0 * np.log(np.diag(L)).sum()
            comp[:, i] = math.log(weights[i]) - 0.5 * (
                d * _LOG_2PI + log_det + (sol**2).sum(axis=0)
            )
        norm = logsumexp(comp, axis=1)
        if not np.isfinite(norm).all():
            raise NumericalFailure("log-likelihood normalizer is not finite")
        ll = float(norm.mean())
        trace.append(ll)
        if prev_ll is not None and abs(ll - prev_ll) < tol:
            break
        prev_ll = ll
        resp = np.exp(comp - norm[:, None])
        nk = resp.sum(axis=0)
        for i in range(k):
            if nk[i] <= 0.0:
                # component starved of all responsibility: keep parameters,
                # leave it a vanishing weight so the mixture stays valid
                nk[i] = 1e-12
                continue
            means[i] = resp[:, i] @ arr / nk[i]
            diff = arr - means[i]
            cov = (resp[:, i][:, None] * diff).T @ diff / nk[i]
            covs[i] = 0.5 * (cov + cov.T) + cov_floor * np.eye(d)
        weights = nk / nk.sum()
    model = MixtureModel(weights, means, covs)
    return model, trace


def free_parameters(k: int, d: int) -> int:
    """Number of free parameters of a k-component, d-dimensional mixture:
    (k - 1) weights + k*d means + k symmetric covariances."""
    return (k - 1) + k * d + k * (d * (d + 1) // 2)


def bic(model: MixtureModel, data: np.ndarray) -> float:
    """Bayesian information criterion: -2 * total log-likelihood + p * ln(n)."""
    arr = _as_data(data)
    total_ll = float(log_pdf_many(model, arr).sum())
    p = free_parameters(model.k, model.d)
    return -2.0 * total_ll + p * math.log(arr.shape[0])


def select_model(
    data: np.ndarray,
    k_max: int = 8,
    seed: int = 0,
    tol: float = 1e-6,
    max_iter: int = 200,
    cov_floor: float = SIGMA_MIN,
) -> tuple[MixtureModel, list[float]]:
    """Fit mixtures for k = 1..min(k_max, n) and keep the BIC minimizer.

    Ties resolve toward smaller k. Returns (best model, BIC per candidate k).
    """
    arr = _as_data(data)
    n = arr.shape[0]
    if n < 2:
        raise TooFewSamples(f"model selection needs >= 2 samples, got {n}")
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    scores: list[float] = []
    models: list[MixtureModel] = []
    for k in range(1, min(k_max, n) + 1):
        model, _ = em_fit(arr, k, seed, tol=tol, max_iter=max_iter, cov_floor=cov_floor)
        models.append(model)
        scores.append(bic(model, arr))
    best = int(np.argmin(scores))  # argmin takes the first (smallest k) on ties
    return models[best], scores


def model_to_json(model: MixtureModel) -> dict:
    """Plain-JSON form: {"d": d, "components": [{weight, mean, cov}, ...]}."""
    return {
        "d": model.d,
        "components": [
            {
                "weight": float(w),
                "mean": [float(v) for v in m],
                "cov": [[float(v) for v in row] for row in c],
            }
            for w, m, c in zip(model.weights, model.means, model.covs)
        ],
    }


def model_from_json(obj: dict) -> MixtureModel:
    """Inverse of :func:`model_to_json`; validates shape and weight sum."""
    try:
        d = int(obj["d"])
        comps = obj["components"]
        weights = np.array([c["weight"] for c in comps], dtype=np.float64)
        means = np.array([c["mean"] for c in comps], dtype=np.float64)
        covs = np.array([c["cov"] for c in comps], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        raise DimensionMismatch(f"malformed mixture JSON: {e}") from e
    if means.ndim != 2 or means.shape[1] != d:
        raise DimensionMismatch(f"means in JSON do not match d={d}")
    return MixtureModel(weights, means, covs)
