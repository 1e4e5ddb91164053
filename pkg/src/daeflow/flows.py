"""Flows built from DAEs.

* ``compose_dae_*``: the composition ``Gamma^t_tau``, ``L`` ordinary DAE steps
  of time ``tau``, each taken against the current (updated) measure.
* ``integrate_cdae_*``: the continuous DAE ``dx/dt = grad log p_t(x)``.
* Diagnostics for the semigroup property, the backward heat equation and
  the variance / entropy curves.
"""

from dataclasses import dataclass, field

import numpy as np

from .analytic_dae import (
    _check_before_collapse,
    cdae_velocity_gmm,
    collapse_time,
    continuous_dae_gaussian,
    continuous_dae_gaussian_pushforward,
    ordinary_dae_gaussian,
    ordinary_dae_gaussian_pushforward,
)
from .empirical_dae import empirical_score, mean_shift_dae
from .errors import CollapseError, QuadratureError
from .maps import AffineMap, ComposedMap
from .measures import (
    GaussianMeasure,
    GaussianMixture,
    ParticleCloud,
    as_mixture,
    entropy_gaussian,
    heat_convolve_gaussian,
    pushforward_affine,
)

# integration refuses end times within this margin of the collapse time
COLLAPSE_GUARD = 1e-6


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    """Snapshots of a flow. ``states`` holds clouds or Gaussians, one per time."""

    times: np.ndarray
    states: list
    mode: str
    maps: list = field(default_factory=list)
    tracers: list = field(default_factory=list)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 1 or times[0] != 0.0:
            raise ValueError("trajectory times must be a nonempty sequence starting at 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        if len(self.states) != times.size:
            raise ValueError("one snapshot per time is required")
        dims = {s.dim for s in self.states}
        if len(dims) != 1:
            raise ValueError("snapshot dimension changes along the trajectory")
        object.__setattr__(self, "times", times)

    @property
    def final(self):
        return self.states[-1]

    def composed_map(self):
        """The step maps chained in order (``maps[0]`` first)."""
        if not self.maps:
            raise ValueError("this trajectory did not record its step maps")
        return ComposedMap(self.maps)

    def points(self, k):
        """Point array of snapshot ``k`` (or of the tracers, when recorded)."""
        s = self.states[k]
        return s.points if isinstance(s, ParticleCloud) else s.mean[None, :]


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Density samples on a uniform 1-D grid."""

    axis: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if axis.ndim != 1 or axis.size < 3:
            raise ValueError("a density grid needs at least three nodes")
        steps = np.diff(axis)
        if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps[0]:
            raise ValueError("density grid spacing must be uniform and positive")
        if values.shape[-1] != axis.size or np.any(values < 0):
            raise ValueError("density values must be nonnegative and match the axis")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "values", values)

    @property
    def spacing(self):
        return float(self.axis[1] - self.axis[0])

    def mass(self):
        return np.trapezoid(self.values, self.axis, axis=-1)


def _steps(tau, L):
    if not tau > 0:
        raise ValueError("composition step tau must be positive")
    if int(L) != L or L < 1:
        raise ValueError("number of composition steps L must be a positive integer")
    return int(L)


def compose_dae_particles(cloud0: ParticleCloud, tau: float, L: int, tracers=None, method="auto"):
    """Particle composition: each step maps the cloud by mean shift against itself.

    ``tracers`` (optional ``(q, m)`` points) ride along: they are mapped by the
    same step maps but do not join the cloud.
    """
    L = _steps(tau, L)
    clouds = [cloud0]
    tracks = [] if tracers is None else [np.asarray(tracers, dtype=float).reshape(-1, cloud0.dim)]
    cur = cloud0
    for _ in range(L):
        if tracks:
            tracks.append(mean_shift_dae(cur, tau, tracks[-1], method))
        cur = cur.with_points(mean_shift_dae(cur, tau, cur.points, method))
        clouds.append(cur)
    return FlowTrajectory(tau * np.arange(L + 1), clouds, f"composed(tau={tau:g})", tracers=tracks)


def compose_dae_gaussian(g0: GaussianMeasure, tau: float, L: int):
    """Closed-form composition; records the affine step maps in ``maps``."""
    L = _steps(tau, L)
    states = [g0]
    maps = []
    g = g0
    for _ in range(L):
        step = ordinary_dae_gaussian(g, tau)
        g = pushforward_affine(step.matrix, step.offset, g)
        maps.append(step)
        states.append(g)
    return FlowTrajectory(tau * np.arange(L + 1), states, f"composed(tau={tau:g})", maps=maps)


def composed_std_recurrence(sigma0, tau, L):
    """``sigma_l = sigma_{l-1} / (1 + tau / sigma_{l-1}^2)`` for l = 0..L (length L + 1)."""
    out = np.empty(L + 1)
    s = float(sigma0)
    out[0] = s
    for k in range(1, L + 1):
        # sigma^3 / (sigma^2 + tau) avoids 0/0 once sigma underflows
        s = s * s * s / (s * s + tau) if s > 0 else 0.0
        out[k] = s
    return out


def composition_limit_error(g0: GaussianMeasure, t: float, tau: float, test_points):
    """``max |Gamma^t_tau(x) - phi_t(x)|`` over ``test_points`` (``t / tau`` must be an integer)."""
    L = int(round(t / tau))
    if abs(L * tau - t) > 1e-9 * max(1.0, t):
        raise ValueError("t must be an integer multiple of tau")
    gamma = compose_dae_gaussian(g0, tau, L).composed_map()
    phi = continuous_dae_gaussian(g0, t)
    pts = np.asarray(test_points, dtype=float).reshape(-1, g0.dim)
    return float(np.max(np.abs(gamma(pts) - phi(pts))))


def _rk4_points(velocity, x, t_end, dt, record_every=1, save_times=None):
    """Fixed-step RK4 from t = 0; steps are shortened to land on every save time and on ``t_end``."""
    if save_times is None:
        stops = [t_end]
    else:
        stops = sorted({float(t) for t in save_times if 0.0 < t < t_end} | {t_end})
    times = [0.0]
    snaps = [x.copy()]
    t = 0.0
    k = 0
    for stop in stops:
        n_steps = max(1, int(np.ceil((stop - t) / dt - 1e-9)))
        for j in range(n_steps):
            h = min(dt, stop - t)
            k1 = velocity(t, x)
            k2 = velocity(t + 0.5 * h, x + 0.5 * h * k1)
            k3 = velocity(t + 0.5 * h, x + 0.5 * h * k2)
            k4 = velocity(t + h, x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t = stop if j == n_steps - 1 else t + h
            k += 1
            if save_times is None and (k % record_every == 0 or t == t_end):
                times.append(t)
                snaps.append(x.copy())
        if save_times is not None:
            times.append(t)
            snaps.append(x.copy())
    return times, snaps


def integrate_cdae_gmm(gmm0, x0, t_end: float, dt: float, record_every: int = 1, save_times=None):
    """Classical RK4 on the exact continuous-DAE velocity of a Gaussian mixture.

    ``x0`` may be one point or a batch; every snapshot is a :class:`ParticleCloud`
    of the orbit positions. The last step is shortened to land on ``t_end``.
    With ``save_times`` only those times (and ``t_end``) are recorded, each
    hit exactly; otherwise every ``record_every``-th step is.
    """
    gmm0 = as_mixture(gmm0)
    if not dt > 0:
        raise ValueError("time step must be positive")
    if t_end < 0:
        raise ValueError("end time must be nonnegative")
    tc = collapse_time(gmm0)
    if t_end >= tc - COLLAPSE_GUARD:
        raise CollapseError(f"covariance collapse at t = lambda_min/2 = {tc:.12g}; refusing to integrate to {t_end:.12g}")
    pts = np.asarray(x0, dtype=float).reshape(-1, gmm0.dim)

    def velocity(t, x):
        return cdae_velocity_gmm(gmm0, t, x)

    if t_end == 0:
        times, snaps = [0.0], [pts]
    else:
        times, snaps = _rk4_points(velocity, pts, t_end, dt, record_every, save_times)
    return FlowTrajectory(times, [ParticleCloud(s) for s in snaps], f"continuous(dt={dt:g})")


def integrate_cdae_particles(cloud0: ParticleCloud, t_end: float, dt: float, bandwidth_h: float, method="auto"):
    """Interacting-particle explicit Euler with a fixed-bandwidth KDE score.

    The velocity is the score of ``sum_i w_i N(x; x_i, h I)`` evaluated on the
    cloud at the start of each step (``h`` is a variance).
    """
    if not bandwidth_h > 0:
        raise ValueError("bandwidth h must be positive")
    if not dt > 0:
        raise ValueError("time step must be positive")
    n_steps = int(np.ceil(t_end / dt - 1e-9))
    times = [0.0]
    clouds = [cloud0]
    cur = cloud0
    t = 0.0
    for k in range(n_steps):
        h = min(dt, t_end - t)
        v = empirical_score(cur, bandwidth_h, cur.points, method)
        cur = cur.with_points(cur.points + h * v)
        t = t_end if k == n_steps - 1 else t + h
        times.append(t)
        clouds.append(cur)
    return FlowTrajectory(times, clouds, f"continuous_particles(dt={dt:g}, h={bandwidth_h:g})")


def semigroup_defect(g0: GaussianMeasure, t: float, s: float, test_points):
    """``max |phi_{t->s}(phi_{0->t}(x)) - phi_{0->s}(x)|`` with analytic maps."""
    if t > s:
        raise ValueError("semigroup check needs t <= s")
    _check_before_collapse(g0, s)
    pts = np.asarray(test_points, dtype=float).reshape(-1, g0.dim)
    first = continuous_dae_gaussian(g0, t)
    second = continuous_dae_gaussian(continuous_dae_gaussian_pushforward(g0, t), s - t)
    direct = continuous_dae_gaussian(g0, s)
    return float(np.max(np.abs(second(first(pts)) - direct(pts))))


# heat-equation diagnostics ---------------------------------------------------

MIN_POINTS_PER_STD = 8
MASS_TOL = 0.02


def _density_path(g0, times, direction):
    if direction == "backward":
        return [continuous_dae_gaussian_pushforward(g0, t) for t in times]
    if direction == "forward":
        return [heat_convolve_gaussian(g0, t) for t in times]
    raise ValueError(f"direction must be 'backward' or 'forward', got {direction!r}")


def heat_equation_terms(g0: GaussianMeasure, t_grid, x_grid, direction="backward"):
    """Return ``(dt_p, laplacian_p)`` on interior nodes of a 1-D space-time grid.

    ``direction='backward'`` follows the continuous-DAE pushforward, which
    should satisfy ``dt p = -lap p``; ``'forward'`` follows the heat
    semigroup (``dt p = +lap p``). A ``t_grid`` with a single time gives a
    zero time derivative.
    """
    if g0.dim != 1:
        raise ValueError("heat-equation diagnostics are implemented for univariate Gaussians")
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    if t_grid.size == 2:
        raise ValueError("a time grid needs one node (static) or at least three nodes")
    laws = _density_path(g0, t_grid, direction)
    dens = DensityGrid(x_grid, np.array([g.pdf(x_grid[:, None]) for g in laws]))
    dx = dens.spacing
    min_std = min(float(np.sqrt(g.cov[0, 0])) for g in laws)
    if min_std / dx < MIN_POINTS_PER_STD:
        raise QuadratureError(f"grid too coarse: {min_std / dx:.2f} points per std (< {MIN_POINTS_PER_STD})")
    mass = dens.mass()
    if np.any(np.abs(mass - 1.0) > MASS_TOL):
        raise QuadratureError(f"grid too coarse or too narrow: trapezoidal mass {mass.min():.4f}..{mass.max():.4f}")
    p = dens.values
    lap = (p[:, 2:] - 2.0 * p[:, 1:-1] + p[:, :-2]) / (dx * dx)
    if t_grid.size == 1:
        return np.zeros_like(lap), lap
    dt_p = (p[2:, 1:-1] - p[:-2, 1:-1]) / (t_grid[2:] - t_grid[:-2])[:, None]
    return dt_p, lap[1:-1]


def backward_heat_residual(g0: GaussianMeasure, t_grid, x_grid):
    """``max |dt p + lap p| / max |lap p|`` along the continuous-DAE pushforward."""
    dt_p, lap = heat_equation_terms(g0, t_grid, x_grid, "backward")
    return float(np.max(np.abs(dt_p + lap)) / np.max(np.abs(lap)))


def forward_heat_residual(g0: GaussianMeasure, t_grid, x_grid):
    """Sign control: ``max |dt p - lap p| / max |lap p|`` along heat convolution."""
    dt_p, lap = heat_equation_terms(g0, t_grid, x_grid, "forward")
    return float(np.max(np.abs(dt_p - lap)) / np.max(np.abs(lap)))


def final_value_recover(g_terminal, T: float, t: float):
    """``p_t = W_{T - t} * p_T``: heat-convolve the terminal law for time ``T - t``."""
    if t < 0:
        raise ValueError("recovery time must be nonnegative")
    if t > T:
        raise ValueError(f"recovery time t = {t} exceeds the terminal time T = {T}")
    return heat_convolve_gaussian(g_terminal, T - t)


# experiment kernels ----------------------------------------------------------


def _composed_steps(t, tau):
    return int(np.floor(t / tau + 1e-9))


def variance_decay_curves(var0: float, tau_list, t_grid):
    """Variance of ``N(0, var0)`` under each flow, as ordered columns keyed by name."""
    if not var0 > 0:
        raise ValueError("initial variance must be positive")
    t_grid = np.asarray(t_grid, dtype=float)
    cols = {
        "t": t_grid,
        "continuous": np.maximum(var0 - 2.0 * t_grid, 0.0),
        "ordinary": var0 / (1.0 + t_grid / var0) ** 2,
    }
    for tau in tau_list:
        steps = np.array([_composed_steps(t, tau) for t in t_grid])
        std = composed_std_recurrence(np.sqrt(var0), tau, int(steps.max()) if steps.size else 0)
        cols[f"composed_tau={tau:g}"] = std[steps] ** 2
    return cols


def _mixture_entropy(gmm):
    # sum_k pi_k H_k - sum_k pi_k log pi_k, exact in the well-separated limit
    w = gmm.weights
    return float(sum(wk * entropy_gaussian(g) for wk, g in zip(w, gmm.gaussians)) - np.sum(w * np.log(w)))


def entropy_along_flow(measure, t_grid):
    """Entropy (constant dropped) of the continuous and ordinary pushforwards at each ``t``.

    Mixtures use the per-component sum plus the mixing-weight term.
    """
    gmm = as_mixture(measure)
    t_grid = np.asarray(t_grid, dtype=float)
    cont = []
    ordi = []
    for t in t_grid:
        _check_before_collapse(gmm, t)
        cont.append(_mixture_entropy(GaussianMixture(gmm.weights, [continuous_dae_gaussian_pushforward(g, t) for g in gmm.gaussians])))
        ordi.append(_mixture_entropy(GaussianMixture(gmm.weights, [ordinary_dae_gaussian_pushforward(g, t) for g in gmm.gaussians])))
    return {"t": t_grid, "entropy_continuous": np.array(cont), "entropy_ordinary": np.array(ordi)}


def analytic_orbit_map(g0: GaussianMeasure, t: float, mode: str, tau: float = None):
    """Affine map sending time-0 points to time ``t`` for a Gaussian under ``mode``."""
    if t == 0:
        return AffineMap.identity(g0.dim)
    if mode == "continuous":
        return continuous_dae_gaussian(g0, t)
    if mode == "ordinary":
        return ordinary_dae_gaussian(g0, t)
    if mode == "composed":
        L = _composed_steps(t, tau)
        if L == 0:
            return AffineMap.identity(g0.dim)
        out = AffineMap.identity(g0.dim)
        for m in compose_dae_gaussian(g0, tau, L).maps:
            out = out.compose_affine(m)
        return out
    raise ValueError(f"unknown flow mode {mode!r}")
