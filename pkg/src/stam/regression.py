"""Gaussian mixture regression over relative poses.

The follow task is learned in the target's frame: each demonstration record
becomes a sample <dx, dy, dalpha> of the follower pose expressed relative to
the target. Conditioning the fitted joint on a position (dx, dy) predicts the
orientation offset; marginalizing onto (dx, dy) and evaluating on a grid
yields a spatial likelihood field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import BadIndex, DimensionMismatch, EmptyData, SingularInputBlock
from .grid import OccupancyGrid, Pose, ScalarField, cell_centers, field_like, wrap_angle, wrap_angles
from .mixtures import Gaussian, MixtureModel, log_pdf_many, select_model

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class RelativeSample:
    """Follower pose expressed in the target frame: offsets along the
    target's heading (dx), its left (dy), and the heading difference."""

    dx: float
    dy: float
    dalpha: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "dy", float(self.dy))
        object.__setattr__(self, "dalpha", wrap_angle(float(self.dalpha)))

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dalpha])


def to_relative(target: Pose, follower: Pose) -> RelativeSample:
    """Express ``follower`` in ``target``'s frame: rotate the world offset by
    -target.alpha and difference the headings."""
    c, s = math.cos(target.alpha), math.sin(target.alpha)
    ox, oy = follower.x - target.x, follower.y - target.y
    return RelativeSample(
        dx=c * ox + s * oy,
        dy=-s * ox + c * oy,
        dalpha=wrap_angle(follower.alpha - target.alpha),
    )


def from_relative(target: Pose, rel: RelativeSample) -> Pose:
    """Inverse of :func:`to_relative`."""
    c, s = math.cos(target.alpha), math.sin(target.alpha)
    return Pose(
        x=target.x + c * rel.dx - s * rel.dy,
        y=target.y + s * rel.dx + c * rel.dy,
        alpha=wrap_angle(target.alpha + rel.dalpha),
    )


def _check_dims(d: int, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(i) for i in dims)
    if len(dims) == 0:
        raise BadIndex("dimension selection must be non-empty")
    if len(set(dims)) != len(dims):
        raise BadIndex(f"repeated dimension in {dims}")
    for i in dims:
        if not 0 <= i < d:
            raise BadIndex(f"dimension {i} out of range for d={d}")
    return dims


def marginal(model: MixtureModel, dims: Sequence[int]) -> MixtureModel:
    """Marginalize the mixture onto the selected dimensions (in the given
    order): weights unchanged, means/covariances sliced."""
    dims = _check_dims(model.d, dims)
    idx = np.asarray(dims)
    return MixtureModel(
        model.weights,
        model.means[:, idx],
        model.covs[:, idx[:, None], idx[None, :]],
    )


def condition(
    model: MixtureModel,
    in_dims: Sequence[int],
    out_dims: Sequence[int],
    x_in: Sequence[float],
) -> tuple[MixtureModel, Gaussian]:
    """Condition the mixture on observed values of ``in_dims``.

    Each component conditions by the usual Gaussian formulas (Schur
    complement); component weights become the posterior responsibilities of
    the observation under the input marginal. Returns the full conditional
    mixture (components with numerically zero posterior weight are dropped)
    and its single-Gaussian moment match.
    """
    in_dims = _check_dims(model.d, in_dims)
    out_dims = _check_dims(model.d, out_dims)
    if set(in_dims) & set(out_dims):
        raise BadIndex("in_dims and out_dims overlap")
    x = np.asarray(x_in, dtype=np.float64).reshape(-1)
    if x.shape[0] != len(in_dims):
        raise DimensionMismatch(f"x_in has {x.shape[0]} values for {len(in_dims)} input dims")
    ai = np.asarray(in_dims)
    bi = np.asarray(out_dims)
    da, db = len(in_dims), len(out_dims)

    log_h = np.empty(model.k)
    cond_means = np.empty((model.k, db))
    cond_covs = np.empty((model.k, db, db))
    for i in range(model.k):
        mu_a = model.means[i, ai]
        mu_b = model.means[i, bi]
        saa = model.covs[i][ai[:, None], ai[None, :]]
        sab = model.covs[i][ai[:, None], bi[None, :]]
        sbb = model.covs[i][bi[:, None], bi[None, :]]
        try:
            L = np.linalg.cholesky(saa)
        except np.linalg.LinAlgError as e:
            raise SingularInputBlock(f"component {i} input block is singular: {e}") from e
        diff = x - mu_a
        # solve Saa^-1 via the Cholesky factor
        u = solve_triangular(L, diff, lower=True, check_finite=False)
        w = solve_triangular(L, sab, lower=True, check_finite=False)
        log_det = 2.0 * float(np.log(np.diag(L)).sum())
        log_h[i] = math.log(model.weights[i]) - 0.5 * (da * _LOG_2PI + log_det + float(u @ u))
        cond_means[i] = mu_b + w.T @ u
        cov = sbb - w.T @ w
        cond_covs[i] = 0.5 * (cov + cov.T)

    log_h -= logsumexp(log_h)
    h = np.exp(log_h)
    keep = h > 0.0
    h = h[keep] / h[keep].sum()
    cond_means = cond_means[keep]
    cond_covs = cond_covs[keep]
    mixture = MixtureModel(h, cond_means, cond_covs)

    mean = h @ cond_means
    second = np.einsum("i,ijk->jk", h, cond_covs) + np.einsum(
        "i,ij,ik->jk", h, cond_means, cond_means
    )
    cov = second - np.outer(mean, mean)
    return mixture, Gaussian(mean, 0.5 * (cov + cov.T))


def circular_mean(angles: np.ndarray) -> float:
    """Mean direction of a set of angles (atan2 of averaged sin/cos)."""
    arr = np.asarray(angles, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise EmptyData("circular mean of no angles")
    return math.atan2(float(np.sin(arr).mean()), float(np.cos(arr).mean()))


def fit_relative_model(
    samples: np.ndarray,
    k_max: int = 8,
    seed: int = 0,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> tuple[MixtureModel, list[float]]:
    """Fit a BIC-selected mixture to (dx, dy, dalpha) samples.

    The angle column is recentred on its circular mean before fitting so a
    band of headings straddling the -pi/pi seam stays unimodal; the mean is
    added back to the fitted component means afterwards. Because of that the
    dalpha means may leave (-pi, pi]; conditional predictions are wrapped at
    the point of use.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DimensionMismatch(f"samples must be (n, 3), got {arr.shape}")
    center = circular_mean(arr[:, 2])
    shifted = arr.copy()
    shifted[:, 2] = wrap_angles(arr[:, 2] - center)
    model, scores = select_model(shifted, k_max=k_max, seed=seed, tol=tol, max_iter=max_iter)
    means = model.means.copy()
    means[:, 2] += center
    return MixtureModel(model.weights, means, model.covs), scores


def density_map(model: MixtureModel, target: Pose, grid: OccupancyGrid | ScalarField) -> ScalarField:
    """Spatial affordance likelihood over the grid.

    Marginalizes the relative-pose model onto (dx, dy), evaluates the density
    at every cell center expressed in the target frame and max-normalizes to
    [0, 1] (an all-underflow field stays all zero).
    """
    if model.d != 3:
        raise DimensionMismatch(f"relative-pose model must have d=3, got {model.d}")
    pos = marginal(model, (0, 1))
    xs, ys = cell_centers(grid)
    ox, oy = xs - target.x, ys - target.y
    c, s = math.cos(target.alpha), math.sin(target.alpha)
    dxs = c * ox + s * oy
    dys = -s * ox + c * oy
    pts = np.column_stack([dxs.ravel(), dys.ravel()])
    dens = np.exp(log_pdf_many(pos, pts)).reshape(grid.height, grid.width)
    peak = float(dens.max())
    if peak > 0.0:
        dens = dens / peak
    return field_like(grid, dens)


def best_relative_pose(model: MixtureModel, target: Pose, position: tuple[float, float]) -> Pose:
    """Pose at ``position`` with the orientation the model predicts there:
    the moment-matched mean of dalpha conditioned on the relative (dx, dy)."""
    if model.d != 3:
        raise DimensionMismatch(f"relative-pose model must have d=3, got {model.d}")
    c, s = math.cos(target.alpha), math.sin(target.alpha)
    ox, oy = position[0] - target.x, position[1] - target.y
    dx = c * ox + s * oy
    dy = -s * ox + c * oy
    _, fused = condition(model, (0, 1), (2,), (dx, dy))
    return Pose(position[0], position[1], wrap_angle(target.alpha + float(fused.mean[0])))
