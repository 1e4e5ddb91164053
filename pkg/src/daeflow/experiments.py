"""Computations behind each CLI command.

Each function takes a validated :class:`ExperimentConfig` and returns plain
arrays / dicts; writing files is left to :mod:`daeflow.cli`.
"""

import numpy as np

from .analytic_dae import ordinary_dae_gaussian, ordinary_dae_gaussian_pushforward, ordinary_dae_gmm
from .datasets import swiss_roll
from .flows import (
    analytic_orbit_map,
    compose_dae_particles,
    entropy_along_flow,
    integrate_cdae_gmm,
    variance_decay_curves,
)
from .maps import AffineMap, FunctionMap
from .measures import GaussianMeasure, sample
from .networks import NetworkMap
from .ridgelet import (
    RidgeletGrid,
    RidgeletPair,
    SmoothWindow,
    admissibility_constant,
    dual_ridgelet,
    relative_l2,
    ridgelet_transform,
    stacked_network_from_maps,
    windowed_samples,
)
from .stacking import LayerParams, composition_baseline, displacement_cosine, stack_daes, train_shallow_dae


def time_grid(t_max, dt):
    """``0, dt, 2 dt, ...`` up to ``t_max``, with ``t_max`` itself appended when it is off-grid."""
    n = int(np.floor(t_max / dt + 1e-9))
    t = np.round(np.arange(n + 1) * dt, 12)
    if t_max - t[-1] > 1e-12:
        t = np.append(t, t_max)
    return t


# orbit -----------------------------------------------------------------------


def orbit_starts(measure, grid_lo, grid_hi, grid_n, n_samples, seed):
    """Regular grid (``grid_n`` nodes per axis) followed by seeded samples of ``measure``."""
    dim = measure.dim
    parts = []
    if grid_n > 0:
        axis = np.linspace(grid_lo, grid_hi, grid_n)
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        parts.append(np.stack([m.ravel() for m in mesh], axis=1))
    if n_samples > 0:
        parts.append(sample(measure, n_samples, seed).points)
    if not parts:
        return np.empty((0, dim))
    return np.concatenate(parts, axis=0)


def orbit_times(mode, t_max, tau):
    if t_max == 0:
        return np.array([0.0])
    if mode == "composed":
        L = int(np.floor(t_max / tau + 1e-9))
        return tau * np.arange(L + 1)
    return time_grid(t_max, tau)


def orbit_table(cfg):
    """Return ``(times, positions, meta)`` with ``positions[k]`` the points at ``times[k]``."""
    measure = cfg["measure"]
    mode = cfg["mode"]
    tau = cfg["tau"]
    starts = orbit_starts(measure, cfg["grid_lo"], cfg["grid_hi"], cfg["grid_n"], cfg["n_samples"], cfg["seed"])
    times = orbit_times(mode, cfg["t_max"], tau)
    single = isinstance(measure, GaussianMeasure)
    if single or cfg["t_max"] == 0:
        g = measure
        if single:
            positions = [analytic_orbit_map(g, t, mode, tau)(starts) for t in times]
        else:
            positions = [starts.copy()]
    elif mode == "continuous":
        traj = integrate_cdae_gmm(measure, starts, float(times[-1]), cfg["dt"], save_times=times)
        positions = [s.points for s in traj.states]
    elif mode == "ordinary":
        positions = [starts.copy() if t == 0 else ordinary_dae_gmm(measure, t)(starts) for t in times]
    else:
        cloud = sample(measure, cfg["n_particles"], cfg["seed"] + 1)
        L = len(times) - 1
        if L == 0:
            positions = [starts.copy()]
        else:
            positions = compose_dae_particles(cloud, tau, L, tracers=starts).tracers
    n_grid = cfg["grid_n"] ** measure.dim if cfg["grid_n"] > 0 else 0
    meta = {"n_grid": n_grid, "n_samples": cfg["n_samples"], "mode": mode, "tau": tau}
    return times, positions, meta


# variance decay ----------------------------------------------------------------


def _variance(points):
    return float(np.var(points[:, 0]))


def variance_decay_table(cfg):
    """Ordered columns of the variance curves, plus trained-network columns with ``train``."""
    t = time_grid(cfg["t_max"], cfg["dt"])
    cols = variance_decay_curves(cfg["var0"], cfg["taus"], t)
    if cfg["train"]:
        cloud = sample(GaussianMeasure.univariate(0.0, cfg["var0"]), cfg["train_n"], cfg["seed"])
        cols.update(trained_variance_columns(cloud, t, cfg))
    return cols


def _fit(cloud, t_noise, cfg, seed):
    return train_shallow_dae(cloud, t_noise, cfg["train_J"], cfg["train_epochs"], cfg["train_lr"], seed)


def trained_variance_columns(cloud, t, cfg):
    """Variances of trained DAE pushforwards of a training cloud.

    ``trained_ordinary``: one DAE trained with noise time ``t`` per grid time.
    ``trained_composed_tau=...``: ``floor(t / tau)`` DAEs with noise ``tau``,
    each trained on the previous output, held piecewise constant in ``t``.
    """
    tau = cfg["tau"]
    base = _variance(cloud.points)
    ordinary = np.empty(t.size)
    for i, ti in enumerate(t):
        if ti == 0:
            ordinary[i] = base
        else:
            net = _fit(cloud, ti, cfg, cfg["seed"] + 1 + i).net
            ordinary[i] = _variance(net(cloud.points))
    steps = np.floor(t / tau + 1e-9).astype(int)
    per_step = [base]
    cur = cloud
    for k in range(int(steps.max())):
        net = _fit(cur, tau, cfg, cfg["seed"] + 10_000 + k).net
        cur = cur.with_points(net(cur.points))
        per_step.append(_variance(cur.points))
    return {"trained_ordinary": ordinary, f"trained_composed_tau={tau:g}": np.array(per_step)[steps]}


# entropy --------------------------------------------------------------------------


def entropy_table(cfg):
    return entropy_along_flow(cfg["measure"], time_grid(cfg["t_max"], cfg["dt"]))


# ridgelet ----------------------------------------------------------------------------

# reference grids; see the README for the measured errors
BUMP_REFERENCE = (8.0, 0.2, 0.8)
BUMP_LADDER = ((6.0, 0.8, 1.6), (12.0, 0.4, 0.8), (24.0, 0.2, 0.4))
BUMP_HALF_WIDTH = 6.0
STACK_GRID = (10.0, 0.2, 0.8)
STACK_HALF_WIDTH = 3.5
STACK_TAU = 0.1


def _bump(x):
    return np.exp(-0.5 * x * x)


def _zero(x):
    return np.zeros_like(x)


def bump_reconstruction_error(target, a_max, da, db, pair=None, k=None):
    """Relative L2 error of ``R^+ R f`` for a fixed 1-D target on ``[-4.8, 4.8]``."""
    pair = pair or RidgeletPair.default(1)
    grid = RidgeletGrid.for_support(a_max, da, db, BUMP_HALF_WIDTH)
    x = np.arange(-BUMP_HALF_WIDTH, BUMP_HALF_WIDTH + 1e-9, min(0.05, 0.45 / a_max))
    coeffs = ridgelet_transform(target(x), x, pair, grid)
    x_eval = np.linspace(-4.8, 4.8, 193)
    rec = dual_ridgelet(coeffs, pair, x_eval, k=k)
    return relative_l2(rec, target(x_eval)), coeffs.boundary_ratio()


def stacked_error(phi0, phi1, J, pair=None, k=None):
    """Relative L2 error of the two-layer ridge network against ``phi1 o phi0`` on ``[-2, 2]``."""
    window = SmoothWindow(2.5, 0.3)
    x = np.arange(-STACK_HALF_WIDTH, STACK_HALF_WIDTH + 1e-9, 0.04)
    grid = RidgeletGrid.for_support(*STACK_GRID, STACK_HALF_WIDTH)
    x_eval = np.linspace(-2.0, 2.0, 161)
    pts = x_eval[:, None]
    if not (np.any(windowed_samples(phi0, window, x)) or np.any(windowed_samples(phi1, window, x))):
        # both layers have no atoms: the network is the empty sum, identically zero
        return relative_l2(np.zeros(x_eval.size), phi1(phi0(pts))[:, 0])
    net = stacked_network_from_maps(phi0, phi1, x, grid, grid, J, J, window, x_eval, pair, k)
    return relative_l2(net(pts)[:, 0], phi1(phi0(pts))[:, 0])


def ridgelet_report(cfg):
    pair = RidgeletPair.default(1)
    k = admissibility_constant(pair, 1)
    if cfg["target"] == "bump":
        target = _bump
        g0 = GaussianMeasure.univariate(0.0, 1.0)
        phi0 = ordinary_dae_gaussian(g0, STACK_TAU)
        phi1 = ordinary_dae_gaussian(ordinary_dae_gaussian_pushforward(g0, STACK_TAU), STACK_TAU)
    else:
        target = _zero
        phi0 = phi1 = AffineMap(np.zeros((1, 1)), np.zeros(1))
    single, boundary = bump_reconstruction_error(target, *BUMP_REFERENCE, pair, k)
    ladder = [bump_reconstruction_error(target, *rung, pair, k)[0] for rung in BUMP_LADDER]
    stacked = stacked_error(phi0, phi1, cfg["J"], pair, k)
    return {
        "target": cfg["target"],
        "K": k,
        "single_layer_error": single,
        "single_layer_boundary_ratio": boundary,
        "stacked_error": stacked,
        "stacked_J": cfg["J"],
        "ladder": [{"a_max": r[0], "da": r[1], "db": r[2], "error": e} for r, e in zip(BUMP_LADDER, ladder)],
        "refinement_monotone": bool(all(ladder[i + 1] <= ladder[i] for i in range(len(ladder) - 1))),
    }


# swiss roll -----------------------------------------------------------------------


def swissroll_run(cfg):
    """Stacked DAE vs ground-space composition on a Swiss roll.

    Returns ``(arrays, summary)`` where ``arrays`` maps an output name to
    ``(n, 2)`` points row-aligned with the input cloud.
    """
    cloud = swiss_roll(cfg["n"], cfg["noise"], cfg["seed"])
    s = cfg["seed"]
    p0 = LayerParams(cfg["J0"], cfg["t0"], cfg["epochs"], cfg["lr"], s + 1)
    p1 = LayerParams(cfg["J1"], cfg["t1"], cfg["epochs"], cfg["lr"], s + 2)
    stack = stack_daes(cloud, 2, [p0, p1])
    # the baseline composes two ground-space DAEs with the first layer's noise time
    q0 = LayerParams(cfg["J0"], cfg["t0"], cfg["epochs"], cfg["lr"], s + 3)
    q1 = LayerParams(cfg["J0"], cfg["t0"], cfg["epochs"], cfg["lr"], s + 4)
    composed, base_fits = composition_baseline(cloud, [q0, q1], 2)
    x = cloud.points
    layer0 = stack.layers[0]
    first = NetworkMap(base_fits[0].net)
    decoded = FunctionMap(lambda pts: stack.decode(stack.encode(pts)), 2)
    arrays = {
        "X": x,
        "k0h0": layer0.full(x),
        "decoded": decoded(x),
        "phi0": first(x),
        "phi1phi0": composed(x),
    }
    fits = {"stack_layer0": stack.trained[0], "stack_layer1": stack.trained[1], "composed_step0": base_fits[0], "composed_step1": base_fits[1]}
    summary = {
        "displacement_cosine": displacement_cosine(decoded, composed, x),
        "n": cfg["n"],
        "seed": s,
        "losses": {name: {"initial": f.initial_loss, "final": f.final_loss, "stderr": f.eval_stderr} for name, f in fits.items()},
    }
    return arrays, summary, fits
