"""Numerical ridgelet transform, its dual, and discretization into ridge networks.

    R f(a, b)  = int f(x) psi(a . x - b) dx
    R^+ T(x)   = (1/K) int int T(a, b) eta(a . x - b) da db

``K`` is the admissibility constant of the pair ``(psi, eta)``,
``K = (2 pi)^(m-1) int psi_hat(z) conj(eta_hat(z)) / |z|^m dz``, computed
from numerically evaluated spectra.

The a-axis is a midpoint lattice ``+-(k + 1/2) da`` per coordinate, so
``a = 0`` is never sampled and the cells tile the a-space without a gap
around the origin. Input dimension is 1 or 2.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson
from scipy.special import erf, eval_hermitenorm

from .errors import InadmissibleError, QuadratureError
from .networks import ShallowNet, TwoLayerNet, activation

A_MIN = 0.1
ALIAS_LIMIT = 0.5
TRUNCATION_TOL = 0.01
SUPPORT_TOL = 1e-3


@dataclass(frozen=True)
class RidgeletPair:
    """``psi = (-1)^(n/2) He_n(u) exp(-u^2/2)`` (the n-th derivative of the Gaussian, signed
    so that ``K > 0``) paired with the Gaussian activation ``eta``.

    ``order = 2`` is the Mexican hat ``(1 - u^2) exp(-u^2/2)``. ``scale`` multiplies psi.
    """

    order: int = 2
    scale: float = 1.0
    activation: str = "gaussian"

    def __post_init__(self):
        if self.order < 0 or self.order % 2:
            raise ValueError("ridgelet order must be a nonnegative even integer")
        activation(self.activation)

    @classmethod
    def default(cls, dim):
        # order 2 for the line; order 4 in the plane, where psi_hat must vanish faster at 0
        return cls(order=2 if dim == 1 else 4)

    def psi(self, u):
        u2 = u * u
        # explicit polynomials for the common orders; they are hot loops
        if self.order == 2:
            poly = 1.0 - u2
        elif self.order == 4:
            poly = u2 * u2 - 6.0 * u2 + 3.0
        else:
            sign = -1.0 if (self.order // 2) % 2 else 1.0
            poly = sign * eval_hermitenorm(self.order, u)
        return self.scale * poly * np.exp(-0.5 * u2)

    def eta(self, u):
        return activation(self.activation)[0](u)


@dataclass(frozen=True)
class FunctionPair:
    """Arbitrary ``(psi, eta)`` callables, e.g. for admissibility experiments."""

    psi: object
    eta: object
    activation: str = "gaussian"


# spectra ---------------------------------------------------------------------

_SPEC_HALF_WIDTH = 14.0
_SPEC_STEP = 0.01
_FREQ_MAX = 16.0
_FREQ_STEP = 2e-3


def _spectrum(fn, freqs):
    """``int fn(u) exp(-i w u) du`` by the trapezoid rule (spectrally accurate for smooth decaying fn)."""
    u = np.arange(-_SPEC_HALF_WIDTH, _SPEC_HALF_WIDTH + 0.5 * _SPEC_STEP, _SPEC_STEP)
    vals = fn(u) * _SPEC_STEP
    vals[0] *= 0.5
    vals[-1] *= 0.5
    out = np.empty(freqs.size, dtype=complex)
    for lo in range(0, freqs.size, 512):
        w = freqs[lo : lo + 512]
        out[lo : lo + 512] = np.exp(-1j * np.outer(w, u)) @ vals
    return out


@lru_cache(maxsize=32)
def admissibility_constant(pair, dim=1):
    """``K = (2 pi)^(m-1) int psi_hat conj(eta_hat) / |z|^m dz`` by quadrature.

    Raises :class:`InadmissibleError` when the integral vanishes or diverges
    at ``z = 0`` (a small-frequency exponent of ``-1`` or worse).
    """
    if dim not in (1, 2):
        raise ValueError("ridgelet transforms are implemented for dimension 1 or 2")
    zp = np.arange(_FREQ_STEP, _FREQ_MAX + 0.5 * _FREQ_STEP, _FREQ_STEP)
    total = 0.0
    scale = 0.0
    for z in (zp, -zp):
        integrand = _spectrum(pair.psi, z) * np.conj(_spectrum(pair.eta, z)) / zp**dim
        magnitude = np.abs(integrand)
        scale += simpson(magnitude, x=zp)
        # local power law |z|^p next to z = 0, used for the excluded sliver (0, z_first]
        if magnitude[0] > 0 and magnitude[4] > 0:
            exponent = np.log(magnitude[4] / magnitude[0]) / np.log(zp[4] / zp[0])
            if exponent <= -0.9 and magnitude[0] > 1e-8 * magnitude.max():
                raise InadmissibleError(
                    f"inadmissible pair: admissibility integral diverges at zero frequency (local exponent {exponent:.2f})"
                )
            total = total + integrand[0] * zp[0] / (exponent + 1.0)
        total = total + simpson(integrand, x=zp)
    if not np.isfinite(scale) or scale == 0.0:
        raise InadmissibleError("inadmissible pair: the admissibility integral vanishes (psi or eta is zero)")
    k = (2.0 * np.pi) ** (dim - 1) * complex(total)
    if abs(k.imag) > 1e-8 * scale:
        raise InadmissibleError("inadmissible pair: complex admissibility constant")
    k = float(k.real)
    if abs(k) <= 1e-10 * scale:
        raise InadmissibleError("inadmissible pair: admissibility constant vanishes")
    return k


# grids -----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RidgeletGrid:
    """Midpoint a-lattice (per coordinate) times a uniform b-axis.

    ``a_axis`` holds the per-coordinate samples; the directions are their
    Cartesian power in dimension ``dim``. Cell measure is ``da^dim * db``.
    """

    a_axis: np.ndarray
    b_axis: np.ndarray
    dim: int = 1
    a_min: float = A_MIN

    def __post_init__(self):
        a = np.asarray(self.a_axis, dtype=float)
        b = np.asarray(self.b_axis, dtype=float)
        if self.dim not in (1, 2):
            raise ValueError("ridgelet grids are implemented for dimension 1 or 2")
        for name, ax in (("a", a), ("b", b)):
            if ax.ndim != 1 or ax.size < 2 or np.any(np.diff(ax) <= 0):
                raise ValueError(f"{name}-axis must be strictly increasing with at least two samples")
            if np.ptp(np.diff(ax)) > 1e-9 * np.diff(ax)[0]:
                raise ValueError(f"{name}-axis must be uniform")
        object.__setattr__(self, "a_axis", a)
        object.__setattr__(self, "b_axis", b)
        norms = np.linalg.norm(self.directions, axis=1)
        if norms.min() < self.a_min - 1e-12:
            raise ValueError(f"a-samples must satisfy |a| >= a_min = {self.a_min} (smallest is {norms.min():.3g})")

    @classmethod
    def midpoint(cls, a_max, da, db, b_max, dim=1, a_min=A_MIN):
        n = int(round(a_max / da))
        half = (np.arange(n) + 0.5) * da
        nb = int(np.ceil(b_max / db))
        return cls(np.concatenate([-half[::-1], half]), np.arange(-nb, nb + 1) * db, dim, a_min)

    @classmethod
    def for_support(cls, a_max, da, db, half_width, dim=1, a_min=A_MIN, margin=6.0):
        """b-axis wide enough for every ridge ``a . x`` with ``|x_k| <= half_width``."""
        return cls.midpoint(a_max, da, db, np.sqrt(dim) * a_max * half_width + margin, dim, a_min)

    @property
    def da(self):
        return float(self.a_axis[1] - self.a_axis[0])

    @property
    def db(self):
        return float(self.b_axis[1] - self.b_axis[0])

    @property
    def cell(self):
        return self.da**self.dim * self.db

    @property
    def directions(self):
        if self.dim == 1:
            return self.a_axis[:, None]
        g = np.meshgrid(*([self.a_axis] * self.dim), indexing="ij")
        return np.stack(g, axis=-1).reshape(-1, self.dim)

    @property
    def shape(self):
        return (self.a_axis.size**self.dim, self.b_axis.size)

    @property
    def size(self):
        n_a, n_b = self.shape
        return n_a * n_b

    def boundary_mask(self):
        """Cells on the outer a-boundary (largest |a_k| in any coordinate) or the first/last b column."""
        dirs = self.directions
        outer_a = np.any(np.isclose(np.abs(dirs), np.abs(self.a_axis).max()), axis=1)
        mask = np.zeros(self.shape, dtype=bool)
        mask[outer_a, :] = True
        mask[:, 0] = True
        mask[:, -1] = True
        return mask


@dataclass(frozen=True, eq=False)
class RidgeletCoefficients:
    """Transform values over a grid, shape ``(n_directions, n_b)``."""

    grid: RidgeletGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {vals.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def c(self):
        return self.values

    @property
    def mu(self):
        """Normalized magnitudes ``|R f| / sum |R f|``, the discrete ridge measure."""
        mag = np.abs(self.values)
        total = mag.sum()
        return mag / total if total > 0 else mag

    def boundary_ratio(self):
        top = np.abs(self.values).max()
        if top == 0:
            return 0.0
        return float(np.abs(self.values[self.grid.boundary_mask()]).max() / top)


# sample grids ----------------------------------------------------------------


def _x_points(x_axes, dim):
    if dim == 1:
        axes = [np.asarray(x_axes, dtype=float).ravel()]
    else:
        axes = [np.asarray(ax, dtype=float) for ax in x_axes]
    steps = []
    for ax in axes:
        d = np.diff(ax)
        if ax.size < 3 or np.any(d <= 0) or np.ptp(d) > 1e-9 * d[0]:
            raise ValueError("x-grid axes must be uniform and increasing")
        steps.append(d[0])
    weights = []
    for ax, h in zip(axes, steps):
        w = np.full(ax.size, h)
        w[0] = w[-1] = 0.5 * h
        weights.append(w)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(mesh, axis=-1).reshape(-1, dim)
    wts = weights[0] if dim == 1 else np.outer(weights[0], weights[1]).ravel()
    return pts, wts, max(steps)


def ridgelet_transform(values, x_axes, pair, grid: RidgeletGrid):
    """Trapezoidal ``R f(a, b)`` for ``f`` sampled on a uniform x-grid.

    ``values`` has shape ``(n_x,)`` for dimension 1 or ``(n_x1, n_x2)`` for
    dimension 2. The integrand must vanish on the x-grid boundary (window the
    target first) and the grid must resolve ``psi`` at the largest ``|a|``.
    """
    pts, wts, dx = _x_points(x_axes, grid.dim)
    f = np.asarray(values, dtype=float).reshape(-1)
    if f.size != pts.shape[0]:
        raise ValueError("sampled values do not match the x-grid")
    a_top = np.linalg.norm(grid.directions, axis=1).max()
    if a_top * dx > ALIAS_LIMIT:
        raise QuadratureError(f"x-grid aliases psi: max|a| * dx = {a_top * dx:.3g} > {ALIAS_LIMIT}")
    top = np.abs(f).max()
    if top > 0:
        edge = _edge_values(f, x_axes, grid.dim)
        if edge > SUPPORT_TOL * top:
            raise QuadratureError(f"target is not compactly supported on the x-grid (edge/max = {edge / top:.2e})")
    fw = f * wts
    out = np.empty(grid.shape)
    b = grid.b_axis
    for i, a in enumerate(grid.directions):
        proj = pts @ a
        out[i] = pair.psi(proj[None, :] - b[:, None]) @ fw
    return RidgeletCoefficients(grid, out)


def _edge_values(f, x_axes, dim):
    if dim == 1:
        return max(abs(f[0]), abs(f[-1]))
    n1 = np.asarray(x_axes[0]).size
    g = f.reshape(n1, -1)
    return max(np.abs(g[0]).max(), np.abs(g[-1]).max(), np.abs(g[:, 0]).max(), np.abs(g[:, -1]).max())


def dual_ridgelet(coeffs: RidgeletCoefficients, pair, x, k=None, truncation_tol=TRUNCATION_TOL):
    """``(1/K) sum_cells T(a, b) eta(a . x - b) da^m db`` at the rows of ``x``.

    Refuses coefficient arrays whose outer boundary still carries more than
    ``truncation_tol`` of the peak magnitude.
    """
    grid = coeffs.grid
    ratio = coeffs.boundary_ratio()
    if ratio > truncation_tol:
        raise QuadratureError(
            f"coefficients are truncated: boundary/peak magnitude {ratio:.3%} exceeds {truncation_tol:.0%}"
        )
    k = admissibility_constant(pair, grid.dim) if k is None else k
    pts = np.asarray(x, dtype=float).reshape(-1, grid.dim)
    out = np.zeros(pts.shape[0])
    b = grid.b_axis
    vals = np.real(coeffs.values)
    for i, a in enumerate(grid.directions):
        out += pair.eta((pts @ a)[:, None] - b[None, :]) @ vals[i]
    return out * (grid.cell / k)


def discretize_to_network(coeffs: RidgeletCoefficients, J: int, pair, k=None):
    """Keep the ``J`` cells with the largest ``|T| * cell``; ``c_j = T * cell / K``.

    Ties are broken by lexicographic ``(a, b)`` order.
    """
    grid = coeffs.grid
    if J < 1 or J > grid.size:
        raise ValueError(f"J must lie in [1, {grid.size}]")
    vals = np.real(coeffs.values).ravel()
    mass = np.abs(vals) * grid.cell
    if not np.any(mass > 0):
        raise ValueError("cannot discretize: all ridgelet coefficients are zero")
    k = admissibility_constant(pair, grid.dim) if k is None else k
    dirs = np.repeat(grid.directions, grid.shape[1], axis=0)
    bs = np.tile(grid.b_axis, grid.shape[0])
    keys = [bs] + [dirs[:, j] for j in range(grid.dim - 1, -1, -1)] + [-mass]
    order = np.lexsort(keys)[:J]
    c = vals[order] * grid.cell / k
    return ShallowNet(dirs[order], bs[order], c[:, None], pair.activation)


def relative_l2(approx, target):
    """``|approx - target| / |target|`` with the convention 0/0 = 0."""
    approx = np.asarray(approx, dtype=float)
    target = np.asarray(target, dtype=float)
    num = np.linalg.norm(approx - target)
    den = np.linalg.norm(target)
    if den == 0:
        return float(num) if num > 0 else 0.0
    return float(num / den)


# windows and the stacked representation -------------------------------------


@dataclass(frozen=True)
class SmoothWindow:
    """``w(x) = [erf((x + r)/s) - erf((x - r)/s)] / 2`` per coordinate (product in 2-D)."""

    half_width: float = 2.5
    edge: float = 0.3

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        w = 0.5 * (erf((x + self.half_width) / self.edge) - erf((x - self.half_width) / self.edge))
        return w if w.ndim < 2 else np.prod(w, axis=-1)

    def plateau(self, level=0.99):
        """Largest ``r`` with ``w >= level`` on ``[-r, r]`` (1-D)."""
        from scipy.optimize import brentq

        return brentq(lambda r: self(np.array(r)) - level, 0.0, self.half_width)


@dataclass(frozen=True, eq=False)
class StackedRidgeNetwork:
    """Two ridge layers glued by the factorized weights ``W1 = a1 c0^T``."""

    layer0: ShallowNet
    layer1: ShallowNet
    network: TwoLayerNet

    def __call__(self, x):
        return self.network(x)


def windowed_samples(fn, window, x_axis):
    """``fn(x) * w(x)`` on a 1-D axis, for a map ``R -> R`` given pointwise."""
    x = np.asarray(x_axis, dtype=float)
    return np.asarray(fn(x[:, None]), dtype=float).reshape(-1) * window(x)


def stacked_network_from_maps(phi0, phi1, x_axis, grid0, grid1, J0, J1, window, eval_points, pair=None, k=None):
    """Ridge layers for ``w Phi0`` and ``w Phi1`` composed as one two-layer network.

    Layer 0 is ``sum_j c0_j eta(a0_j x - b0_j)``; layer 1 reads that output,
    so its pre-activations are ``sum_j (a1_i c0_j) eta(...) - b1_i``. Maps act
    on the line. ``eval_points`` is where the composition is claimed: the
    layer-0 image of those points must stay inside the window plateau of
    ``Phi1`` (range coverage).
    """
    pair = RidgeletPair.default(1) if pair is None else pair
    if grid0.dim != 1 or grid1.dim != 1:
        raise ValueError("stacked representations are implemented for maps on the line")
    k = admissibility_constant(pair, 1) if k is None else k
    r0 = ridgelet_transform(windowed_samples(phi0, window, x_axis), x_axis, pair, grid0)
    r1 = ridgelet_transform(windowed_samples(phi1, window, x_axis), x_axis, pair, grid1)
    net0 = discretize_to_network(r0, J0, pair, k)
    net1 = discretize_to_network(r1, J1, pair, k)

    inner = net0(np.asarray(eval_points, dtype=float).reshape(-1, 1))
    reach = window.plateau()
    if np.abs(inner).max() > reach:
        raise QuadratureError(
            f"range coverage fails: layer-0 output reaches {np.abs(inner).max():.3f}, "
            f"beyond the layer-1 window plateau {reach:.3f}"
        )
    w1 = net1.a @ net0.c.T
    b1 = net1.b - (net1.a @ net0.d)
    two = TwoLayerNet(net0, w1, b1, net1.c, net1.d, pair.activation)
    return StackedRidgeNetwork(net0, net1, two)
