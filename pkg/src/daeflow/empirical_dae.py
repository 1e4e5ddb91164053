"""DAE maps for empirical measures.

For a weighted cloud the optimal DAE with corruption variance ``t`` is one
Gaussian-kernel mean-shift step with bandwidth ``t``:

    Phi_t(x) = sum_i w_i(x) x_i / sum_i w_i(x),  w_i(x) = weight_i exp(-|x - x_i|^2 / 2t).

Kernel sums go through :func:`daeflow._gauss_sum.kernel_sums`, which shifts
exponents by their maximum and raises :class:`OutOfSupportError` instead of
returning 0/0 when a query sits too far from the data.
"""

import numpy as np

from ._gauss_sum import kernel_sums
from ._linalg import as_points, restore
from .maps import TransportMap
from .measures import ParticleCloud, _diffusion_matrix


def _check_time(t):
    if not t > 0:
        raise ValueError("bandwidth time t must be positive")


def _whitener(dim, t, d):
    """Return ``L`` with ``L L^T = (2 t D)^-1`` (isotropic D = I/2 gives I / sqrt t)."""
    if d is None:
        return np.eye(dim) / np.sqrt(t)
    mat = _diffusion_matrix(d, dim)
    prec = np.linalg.inv(2.0 * t * mat)
    return np.linalg.cholesky(0.5 * (prec + prec.T))


def _kernel_mean(cloud, t, x, d=None, method="auto"):
    pts, vec = as_points(x, cloud.dim)
    white = _whitener(cloud.dim, t, d)
    log_s0, mean, _ = kernel_sums(cloud.points @ white, cloud.weights, cloud.points, pts @ white, method)
    return pts, vec, log_s0, mean


def mean_shift_dae(cloud: ParticleCloud, t: float, x, method="auto"):
    """Kernel-weighted mean of the cloud around ``x`` (a vector or an ``(n, m)`` batch)."""
    _check_time(t)
    _, vec, _, mean = _kernel_mean(cloud, t, x, method=method)
    return restore(mean, vec)


def empirical_score(cloud: ParticleCloud, t: float, x, method="auto"):
    """``grad log[W_{t/2} * p_hat](x) = (mean_shift_dae(x) - x) / t``."""
    _check_time(t)
    pts, vec, _, mean = _kernel_mean(cloud, t, x, method=method)
    return restore((mean - pts) / t, vec)


def anisotropic_mean_shift(cloud: ParticleCloud, t: float, d, x, method="auto"):
    """``x + t grad log sum_i weight_i N(x - x_i; 0, 2tD)``.

    The gradient is ``(2tD)^-1 (m_D(x) - x)`` with ``m_D`` the kernel mean
    under the anisotropic kernel, so the map is ``x + D^-1 (m_D(x) - x) / 2``.
    """
    _check_time(t)
    mat = _diffusion_matrix(d, cloud.dim)
    pts, vec, _, mean = _kernel_mean(cloud, t, x, d=mat, method=method)
    step = 0.5 * np.linalg.solve(mat, (mean - pts).T).T
    return restore(pts + step, vec)


def kde_logpdf(cloud: ParticleCloud, t: float, x, method="auto"):
    """Log density of ``W_{t/2} * p_hat``, i.e. a Gaussian KDE with covariance ``t I``."""
    _check_time(t)
    pts, vec, log_s0, _ = _kernel_mean(cloud, t, x, method=method)
    out = log_s0 - 0.5 * cloud.dim * np.log(2.0 * np.pi * t)
    return out[0] if vec else out


class MeanShiftMap(TransportMap):
    """The empirical DAE ``Phi_t`` of a fixed cloud, optionally with a diffusion tensor."""

    kind = "mean_shift"

    def __init__(self, cloud, t, d=None, method="auto"):
        _check_time(t)
        super().__init__(cloud.dim)
        self.cloud = cloud
        self.t = float(t)
        self.d = None if d is None else _diffusion_matrix(d, cloud.dim)
        self.method = method

    def _apply(self, pts):
        if self.d is None:
            return mean_shift_dae(self.cloud, self.t, pts, self.method)
        return anisotropic_mean_shift(self.cloud, self.t, self.d, pts, self.method)
