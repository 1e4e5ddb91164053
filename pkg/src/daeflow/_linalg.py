"""Small dense linear-algebra helpers shared by the measure and map modules."""

import numpy as np

SYM_TOL = 1e-10
PSD_TOL = 1e-10


def as_points(x, dim=None):
    """Return ``(points, was_vector)`` with points shaped ``(n, m)``."""
    arr = np.asarray(x, dtype=float)
    was_vector = arr.ndim == 1
    if was_vector:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"expected a vector or an (n, m) array, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"expected dimension {dim}, got {arr.shape[1]}")
    return arr, was_vector


def restore(points, was_vector):
    return points[0] if was_vector else points


def check_symmetric(mat, name="matrix", tol=SYM_TOL):
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} has non-finite entries")
    dev = np.max(np.abs(mat - mat.T)) if mat.size else 0.0
    if dev > tol:
        raise ValueError(f"{name} is not symmetric (max |M - M^T| = {dev:.3e})")


def sym_eigh(mat):
    """Eigendecomposition of the symmetrized matrix, eigenvalues ascending."""
    sym = 0.5 * (mat + mat.T)
    return np.linalg.eigh(sym)


def sym_function(mat, fn):
    """Apply a scalar function to a symmetric matrix through its spectrum."""
    w, u = sym_eigh(mat)
    return (u * fn(w)) @ u.T


def psd_factor(cov):
    """Return ``L`` with ``L @ L.T == cov`` for a PSD (possibly singular) matrix.

    Cholesky is used when it succeeds; rank-deficient matrices fall back to
    ``U sqrt(max(w, 0))``.
    """
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, u = sym_eigh(cov)
        if w[0] < -PSD_TOL:
            raise ValueError(f"covariance is not PSD (min eigenvalue {w[0]:.3e})")
        return u * np.sqrt(np.clip(w, 0.0, None))


def gaussian_logpdf(points, mean, cov):
    """Log density of N(mean, cov) at each row of ``points`` (cov must be PD)."""
    m = mean.shape[0]
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("covariance is not positive definite") from exc
    diff = points - mean
    z = np.linalg.solve(chol, diff.T)
    maha = np.sum(z * z, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (maha + logdet + m * np.log(2.0 * np.pi))
