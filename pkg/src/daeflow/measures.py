"""Probability measures: Gaussians, Gaussian mixtures and weighted particle clouds.

All types are immutable values. Entropies drop the additive constant
``(m/2)(1 + log 2 pi)``; only differences and monotonicity are meaningful.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._linalg import (
    PSD_TOL,
    as_points,
    check_symmetric,
    gaussian_logpdf,
    psd_factor,
    restore,
    sym_eigh,
)
from .errors import CollapseError, NonFiniteError, OutOfSupportError

# Unshifted exp() underflows below roughly this log value.
LOG_UNDERFLOW = -700.0


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
    """N(mean, cov). Rank-deficient covariances are allowed."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim == 0:
            cov = cov.reshape(1, 1)
        if mean.ndim != 1:
            raise ValueError("mean must be a vector")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"cov shape {cov.shape} does not match mean dimension {mean.size}")
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean has non-finite entries")
        check_symmetric(cov, "cov")
        w = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        if w[0] < -PSD_TOL:
            raise ValueError(f"cov is not positive semidefinite (min eigenvalue {w[0]:.3e})")
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(cov))

    @classmethod
    def univariate(cls, mean, var):
        return cls(np.array([mean]), np.array([[var]]))

    @property
    def dim(self):
        return self.mean.size

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(0.5 * (self.cov + self.cov.T))

    def is_positive_definite(self, tol=PSD_TOL):
        return bool(self.eigenvalues[0] > tol)

    def logpdf(self, x):
        pts, vec = as_points(x, self.dim)
        return restore(gaussian_logpdf(pts, self.mean, self.cov), vec)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def __repr__(self):
        return f"GaussianMeasure(mean={self.mean.tolist()}, cov={self.cov.tolist()})"


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Weighted sum of Gaussians of equal dimension, weights in (0, 1] summing to 1."""

    weights: np.ndarray
    gaussians: tuple

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        gaussians = tuple(self.gaussians)
        if not gaussians:
            raise ValueError("a mixture needs at least one component")
        if weights.shape != (len(gaussians),):
            raise ValueError("one weight per component is required")
        if np.any(weights <= 0.0) or np.any(weights > 1.0):
            raise ValueError("mixture weights must lie in (0, 1]")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {weights.sum():.15g}, not 1")
        dims = {g.dim for g in gaussians}
        if len(dims) != 1:
            raise ValueError(f"components have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "weights", _frozen(weights))
        object.__setattr__(self, "gaussians", gaussians)

    @classmethod
    def from_components(cls, components):
        """Build from an iterable of ``(weight, GaussianMeasure)`` pairs."""
        components = list(components)
        return cls([w for w, _ in components], [g for _, g in components])

    @classmethod
    def single(cls, g):
        return cls([1.0], [g])

    @property
    def components(self):
        return list(zip(self.weights.tolist(), self.gaussians))

    @property
    def dim(self):
        return self.gaussians[0].dim

    @property
    def n_components(self):
        return len(self.gaussians)

    def component_logpdfs(self, x, cov_shift=0.0):
        """``log pi_k + log N(x; mu_k, Sigma_k + cov_shift I)`` as an (n, K) array."""
        pts, _ = as_points(x, self.dim)
        eye = np.eye(self.dim)
        cols = [
            np.log(w) + gaussian_logpdf(pts, g.mean, g.cov + cov_shift * eye)
            for w, g in zip(self.weights, self.gaussians)
        ]
        return np.stack(cols, axis=1)

    def logpdf(self, x):
        pts, vec = as_points(x, self.dim)
        return restore(logsumexp(self.component_logpdfs(pts), axis=1), vec)

    def pdf(self, x):
        return np.exp(self.logpdf(x))


def as_mixture(measure):
    if isinstance(measure, GaussianMixture):
        return measure
    if isinstance(measure, GaussianMeasure):
        return GaussianMixture.single(measure)
    raise TypeError(f"expected a Gaussian or Gaussian mixture, got {type(measure).__name__}")


@dataclass(frozen=True, eq=False)
class ParticleCloud:
    """Weighted empirical measure; weights default to uniform 1/N."""

    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("a cloud needs at least one point, shaped (N, m)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("cloud points must be finite")
        n = pts.shape[0]
        if self.weights is None:
            weights = np.full(n, 1.0 / n)
        else:
            weights = np.asarray(self.weights, dtype=float)
            if weights.shape != (n,):
                raise ValueError("one weight per point is required")
            if np.any(weights < 0.0):
                raise ValueError("weights must be nonnegative")
            if abs(weights.sum() - 1.0) > 1e-12:
                raise ValueError(f"weights sum to {weights.sum():.15g}, not 1")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def mean(self):
        return self.weights @ self.points

    def covariance(self):
        """Weighted (biased) covariance."""
        diff = self.points - self.mean()
        return (diff * self.weights[:, None]).T @ diff

    def with_points(self, points):
        return ParticleCloud(points, self.weights)


@dataclass(frozen=True, eq=False)
class DiffusionCoefficient:
    """Constant symmetric positive-definite diffusion tensor."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if mat.ndim == 0:
            mat = mat.reshape(1, 1)
        check_symmetric(mat, "diffusion coefficient")
        w = np.linalg.eigvalsh(0.5 * (mat + mat.T))
        if w[0] <= 0.0:
            raise ValueError(f"diffusion coefficient must be positive definite (min eig {w[0]:.3e})")
        object.__setattr__(self, "matrix", _frozen(mat))

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim))

    @classmethod
    def isotropic(cls, dim, scale):
        return cls(scale * np.eye(dim))

    @property
    def dim(self):
        return self.matrix.shape[0]


def _diffusion_matrix(d, dim):
    if d is None:
        return np.eye(dim)
    if isinstance(d, DiffusionCoefficient):
        mat = d.matrix
    else:
        mat = DiffusionCoefficient(d).matrix
    if mat.shape != (dim, dim):
        raise ValueError(f"diffusion coefficient has dimension {mat.shape[0]}, expected {dim}")
    return mat


@dataclass(frozen=True)
class HeatKernelSpec:
    """Heat kernel W_t(x, y; D) for constant D: the density of N(y, 2 t D) at x."""

    time: float
    coefficient: DiffusionCoefficient = field(default=None)

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("heat kernel time must be nonnegative")

    def covariance(self, dim=None):
        dim = self.coefficient.dim if self.coefficient is not None else dim
        return 2.0 * self.time * _diffusion_matrix(self.coefficient, dim)

    def density(self, x, y):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.time == 0:
            raise ValueError("the zero-time heat kernel is a Dirac delta, not a density")
        cov = self.covariance(x.size)
        return float(np.exp(gaussian_logpdf(x[None, :], y, cov))[0])


def entropy_gaussian(g):
    """Differential entropy ``(1/2) log det cov``, additive constant dropped."""
    w = g.eigenvalues
    if w[0] <= PSD_TOL:
        raise CollapseError(f"entropy undefined: covariance is singular (min eigenvalue {w[0]:.3e})")
    return 0.5 * float(np.sum(np.log(w)))


def heat_convolve_gaussian(g, s, d=None):
    """``W_s(.; D) * g``: adds ``2 s D`` to every covariance (mixtures component-wise)."""
    if s < 0:
        raise ValueError("convolution time must be nonnegative")
    if isinstance(g, GaussianMixture):
        return GaussianMixture(g.weights, [heat_convolve_gaussian(c, s, d) for c in g.gaussians])
    mat = _diffusion_matrix(d, g.dim)
    return GaussianMeasure(g.mean, g.cov + 2.0 * s * mat)


def pushforward_affine(a, b, g):
    """Law of ``A X + b`` for ``X ~ g``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    cov = a @ g.cov @ a.T
    return GaussianMeasure(a @ g.mean + b, 0.5 * (cov + cov.T))


def pushforward_particles(f, cloud):
    """Map every particle through ``f``; weights are carried over unchanged."""
    mapped = np.asarray(f(cloud.points), dtype=float)
    if mapped.ndim == 1:
        mapped = mapped[:, None]
    if mapped.shape[0] != cloud.n:
        raise ValueError("map must return one point per particle")
    bad = ~np.all(np.isfinite(mapped), axis=1)
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise NonFiniteError(f"map produced a non-finite value at particle {idx}")
    return ParticleCloud(mapped, cloud.weights)


def sample(measure, n, seed):
    """Draw ``n`` points; deterministic for a given seed.

    Components are picked by weight, then each draw is ``mu + L z`` with
    ``L L^T = Sigma``.
    """
    if n < 1:
        raise ValueError("sample size must be at least 1")
    gmm = as_mixture(measure)
    rng = np.random.default_rng(seed)
    labels = rng.choice(gmm.n_components, size=n, p=gmm.weights)
    z = rng.standard_normal((n, gmm.dim))
    pts = np.empty((n, gmm.dim))
    for k, g in enumerate(gmm.gaussians):
        mask = labels == k
        factor = psd_factor(g.cov)
        pts[mask] = g.mean + z[mask] @ factor.T
    return ParticleCloud(pts)


def _responsibilities_from_logs(logs):
    top = np.max(logs, axis=1)
    if np.any(top < LOG_UNDERFLOW):
        raise OutOfSupportError("evaluated far outside support: all component densities underflow")
    resp = np.exp(logs - top[:, None])
    return resp / resp.sum(axis=1, keepdims=True)


def mixture_score(gmm, x, cov_shift=0.0):
    """Score of ``sum_k pi_k N(mu_k, Sigma_k + cov_shift I)`` at each row of ``x``."""
    pts, vec = as_points(x, gmm.dim)
    resp = _responsibilities_from_logs(gmm.component_logpdfs(pts, cov_shift))
    eye = np.eye(gmm.dim)
    out = np.zeros_like(pts)
    for k, g in enumerate(gmm.gaussians):
        prec_diff = np.linalg.solve(g.cov + cov_shift * eye, (pts - g.mean).T).T
        out -= resp[:, k : k + 1] * prec_diff
    return restore(out, vec)


def gmm_score(gmm, x):
    """``grad log p(x)`` for a Gaussian or mixture; rows of ``x`` are evaluated independently."""
    gmm = as_mixture(gmm)
    for g in gmm.gaussians:
        if not g.is_positive_definite():
            raise CollapseError("score needs strictly positive-definite component covariances")
    return mixture_score(gmm, x)


def min_eigenvalue(measure):
    gmm = as_mixture(measure)
    return min(float(sym_eigh(g.cov)[0][0]) for g in gmm.gaussians)
