"""Closed-form denoising autoencoders for Gaussians and Gaussian mixtures.

The ordinary DAE trained with corruption variance ``t`` is
``Phi_t = Id + t grad log[W_{t/2} * p0]``; the continuous DAE ``phi_t`` is
the flow of ``dx/dt = grad log p_t(x)`` with ``p_t = phi_t# p0``.
For a Gaussian both are affine. For mixtures the ordinary map and the
continuous velocity are exact; the per-cluster continuous map is only a
well-separated approximation.
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import as_points, restore, sym_eigh
from .errors import CollapseError
from .maps import AffineMap, TransportMap
from .measures import (
    GaussianMeasure,
    GaussianMixture,
    _diffusion_matrix,
    _responsibilities_from_logs,
    as_mixture,
    mixture_score,
)

# Margin kept below the collapse time lambda_min / 2.
EPS_SING = 1e-9
# Minimum pairwise Mahalanobis separation for a mixture to count as well separated.
WELL_SEPARATED_MAHALANOBIS = 6.0


def _require_pd(g, what="covariance"):
    w = g.eigenvalues
    if w[0] <= 1e-12:
        raise CollapseError(f"{what} is singular (min eigenvalue {w[0]:.3e})")
    return w


def collapse_time(measure):
    """First time ``lambda_min / 2`` at which the continuous DAE collapses a component."""
    gmm = as_mixture(measure)
    return min(0.5 * float(g.eigenvalues[0]) for g in gmm.gaussians)


def _check_before_collapse(measure, t, margin=EPS_SING):
    if t < 0:
        raise ValueError("time must be nonnegative")
    tc = collapse_time(measure)
    if t >= tc - margin:
        raise CollapseError(f"covariance collapse at t = lambda_min/2 = {tc:.12g} (requested t = {t:.12g})")


def ordinary_dae_gaussian(g0, t):
    """``Phi_t(x) = (I + t S^-1)^-1 x + (I + t^-1 S)^-1 mu``, an affine map."""
    if t <= 0:
        raise ValueError("ordinary DAE time must be positive")
    _require_pd(g0)
    m = g0.dim
    # (I + t S^-1)^-1 = S (S + tI)^-1 and (I + S/t)^-1 = t (S + tI)^-1
    shifted = g0.cov + t * np.eye(m)
    a = np.linalg.solve(shifted, g0.cov).T
    b = t * np.linalg.solve(shifted, g0.mean)
    return AffineMap(0.5 * (a + a.T), b)


def ordinary_dae_gaussian_pushforward(g0, t):
    """``N(mu, S (I + t S^-1)^-2)``."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0:
        return g0
    w, u = sym_eigh(g0.cov)
    if w[0] <= 1e-12:
        raise CollapseError("ordinary DAE needs a positive-definite covariance")
    scaled = w / (1.0 + t / w) ** 2
    return GaussianMeasure(g0.mean, (u * scaled) @ u.T)


def continuous_dae_gaussian(g0, t):
    """``phi_t(x) = sqrt(I - 2t S^-1)(x - mu) + mu`` with the symmetric square root."""
    _require_pd(g0)
    _check_before_collapse(g0, t)
    w, u = sym_eigh(g0.cov)
    a = (u * np.sqrt(1.0 - 2.0 * t / w)) @ u.T
    a = 0.5 * (a + a.T)
    return AffineMap(a, g0.mean - a @ g0.mean)


def continuous_dae_gaussian_pushforward(g0, t):
    """``N(mu, S - 2t I)``, defined before the collapse time."""
    _require_pd(g0)
    _check_before_collapse(g0, t)
    return GaussianMeasure(g0.mean, g0.cov - 2.0 * t * np.eye(g0.dim))


def continuous_dae_gmm_pushforward(gmm0, t):
    """Exact pushforward ``sum_k pi_k N(mu_k, S_k - 2t I)``."""
    gmm0 = as_mixture(gmm0)
    _check_before_collapse(gmm0, t)
    return GaussianMixture(gmm0.weights, [continuous_dae_gaussian_pushforward(g, t) for g in gmm0.gaussians])


def ordinary_dae_gmm_pushforward_approx(gmm0, t):
    """Well-separated approximation ``sum_k pi_k N(mu_k, S_k (I + t S_k^-1)^-2)``."""
    gmm0 = as_mixture(gmm0)
    return GaussianMixture(gmm0.weights, [ordinary_dae_gaussian_pushforward(g, t) for g in gmm0.gaussians])


def continuous_dae_cluster_map(gmm0, k, t):
    """Per-cluster affine map of component ``k``.

    Approximates ``phi_t`` only inside the basin of ``mu_k`` of a well-separated
    mixture; the deviation there is bounded by the off-cluster responsibility
    mass (about 1e-6 at Mahalanobis separation 6).
    """
    gmm0 = as_mixture(gmm0)
    return continuous_dae_gaussian(gmm0.gaussians[k], t)


def mahalanobis_separation(gmm):
    """Smallest pairwise Mahalanobis distance between means, under either component."""
    gmm = as_mixture(gmm)
    best = np.inf
    for i, gi in enumerate(gmm.gaussians):
        for j, gj in enumerate(gmm.gaussians):
            if i == j:
                continue
            d = gj.mean - gi.mean
            best = min(best, float(np.sqrt(d @ np.linalg.solve(gi.cov, d))))
    return best


def is_well_separated(gmm, threshold=WELL_SEPARATED_MAHALANOBIS):
    return mahalanobis_separation(gmm) >= threshold


@dataclass(frozen=True)
class ResponsibilityProfile:
    values: np.ndarray
    mode: str

    def __post_init__(self):
        if self.mode not in ("ordinary", "continuous"):
            raise ValueError(f"unknown responsibility mode {self.mode!r}")
        if abs(float(np.sum(self.values)) - 1.0) > 1e-12:
            raise ValueError("responsibilities must sum to 1")


def _cov_shift(mode, t):
    if mode == "ordinary":
        return t
    if mode == "continuous":
        return -2.0 * t
    raise ValueError(f"unknown responsibility mode {mode!r}")


def responsibility_matrix(gmm, t, x, mode):
    """Posterior weights at each row of ``x``: ordinary uses ``S_k + t I``, continuous ``S_k - 2t I``."""
    gmm = as_mixture(gmm)
    if mode == "continuous":
        _check_before_collapse(gmm, t)
    pts, _ = as_points(x, gmm.dim)
    return _responsibilities_from_logs(gmm.component_logpdfs(pts, _cov_shift(mode, t)))


def responsibilities(gmm, t, x, mode):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("responsibilities() takes a single point; use responsibility_matrix for batches")
    values = responsibility_matrix(gmm, t, x, mode)[0]
    return ResponsibilityProfile(values, mode)


class GMMOrdinaryMap(TransportMap):
    """``Phi_t(x) = sum_k gamma_k(x) Phi_kt(x)`` with ordinary-mode responsibilities."""

    kind = "gmm_ordinary"

    def __init__(self, gmm, t):
        gmm = as_mixture(gmm)
        super().__init__(gmm.dim)
        self.gmm = gmm
        self.t = float(t)
        self.component_maps = [ordinary_dae_gaussian(g, t) for g in gmm.gaussians]

    def _apply(self, pts):
        resp = responsibility_matrix(self.gmm, self.t, pts, "ordinary")
        out = np.zeros_like(pts)
        for k, cmap in enumerate(self.component_maps):
            out += resp[:, k : k + 1] * cmap(pts)
        return out


def ordinary_dae_gmm(gmm, t):
    if t <= 0:
        raise ValueError("ordinary DAE time must be positive")
    gmm = as_mixture(gmm)
    for g in gmm.gaussians:
        _require_pd(g, "component covariance")
    return GMMOrdinaryMap(gmm, t)


def cdae_velocity_gmm(gmm0, t, x):
    """``-sum_k gamma_kt(x) (S_k - 2t I)^-1 (x - mu_k)``, the continuous-DAE velocity at time t."""
    gmm0 = as_mixture(gmm0)
    _check_before_collapse(gmm0, t)
    pts, vec = as_points(x, gmm0.dim)
    return restore(mixture_score(gmm0, pts, cov_shift=-2.0 * t), vec)


def anisotropic_dae_gaussian(g0, t, d=None):
    """``x -> x - t (S + 2t D)^-1 (x - mu)``; ``S`` may be rank deficient."""
    if t <= 0:
        raise ValueError("anisotropic DAE time must be positive")
    mat = _diffusion_matrix(d, g0.dim)
    spread = g0.cov + 2.0 * t * mat
    gain = t * np.linalg.inv(spread)
    return AffineMap(np.eye(g0.dim) - gain, gain @ g0.mean)
