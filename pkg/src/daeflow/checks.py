"""Named invariant checks run by ``daeflow verify``.

Each check returns ``(passed, detail)``; tolerances are module-level
constants so a corrupted tolerance makes the named check fail.
"""

import contextlib
import io
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import analytic_dae, empirical_dae, flows, measures, ridgelet, stacking
from .config import build_config
from .datasets import swiss_roll
from .experiments import bump_reconstruction_error
from .measures import GaussianMeasure, GaussianMixture, ParticleCloud
from ._gauss_sum import kernel_sums

HEAT_SEMIGROUP_TOL = 1e-12
SCORE_FD_RTOL = 1e-6
INITIAL_VELOCITY_RTOL = 1e-3
SEMIGROUP_TOL = 1e-10
MIXTURE_COV_RTOL = 0.03
CONVEX_COMBINATION_TOL = 1e-12
LARGE_T_TOL = 1e-4
MEAN_SHIFT_GAUSSIAN_TOL = 0.05
SCORE_IDENTITY_TOL = 1e-12
FGT_TOL = 1e-10
LIMIT_RATIO_RANGE = (1.6, 2.4)
SMALL_TAU_RTOL = 0.02
RK4_RATIO_RANGE = (8.0, 32.0)
RECONSTRUCTION_TOL = 0.05
FULL_GRID_TOL = 1e-12
CONJUGACY_LINEAR_TOL = 1e-8
CONJUGACY_CONTINUOUS_TOL = 1e-10
LOSS_HALVING = 0.5


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


REGISTRY = {}


def check(name):
    def register(fn):
        if name in REGISTRY:
            raise ValueError(f"check {name!r} is already registered")
        REGISTRY[name] = fn
        return fn

    return register


def _diag21():
    return GaussianMeasure(np.zeros(2), np.diag([2.0, 1.0]))


def _normalized(w):
    return w / w.sum()


def _grid2(n=10, half=2.0):
    ax = np.linspace(-half, half, n)
    return np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)


# measures ------------------------------------------------------------------------


@check("measures.heat_semigroup")
def _heat_semigroup(seed):
    g = GaussianMeasure(np.array([0.5, -1.0]), np.array([[2.0, 0.3], [0.3, 1.0]]))
    two = measures.heat_convolve_gaussian(measures.heat_convolve_gaussian(g, 0.2), 0.35)
    one = measures.heat_convolve_gaussian(g, 0.55)
    dev = float(np.max(np.abs(two.cov - one.cov)))
    return dev <= HEAT_SEMIGROUP_TOL, f"max cov deviation {dev:.2e}"


@check("measures.heat_entropy_increasing")
def _heat_entropy(seed):
    g = _diag21()
    h = [measures.entropy_gaussian(measures.heat_convolve_gaussian(g, s)) for s in np.linspace(0.01, 2.0, 50)]
    ok = bool(np.all(np.diff(h) > 0))
    return ok, f"min increment {np.min(np.diff(h)):.3e}"


@check("measures.gmm_score_fd")
def _score_fd(seed):
    gmm = GaussianMixture.from_components(
        [(0.3, GaussianMeasure(np.array([-1.0, 0.0]), np.eye(2))), (0.7, GaussianMeasure(np.array([1.5, 0.5]), np.diag([0.5, 2.0])))]
    )
    x = np.random.default_rng(seed).uniform(-2, 2, (20, 2))
    h = 1e-5
    fd = np.stack([(gmm.logpdf(x + h * e) - gmm.logpdf(x - h * e)) / (2 * h) for e in np.eye(2)], axis=1)
    score = measures.gmm_score(gmm, x)
    rel = float(np.max(np.abs(score - fd) / np.maximum(np.abs(fd), 1.0)))
    return rel <= SCORE_FD_RTOL, f"max relative deviation {rel:.2e}"


@check("measures.pushforward_weight")
def _pushforward_weight(seed):
    rng = np.random.default_rng(seed)
    cloud = ParticleCloud(rng.standard_normal((500, 2)), _normalized(rng.uniform(0.1, 1.0, 500)))
    out = measures.pushforward_particles(lambda p: np.tanh(p) * 3.0, cloud)
    return bool(np.array_equal(out.weights, cloud.weights)), "weights carried bitwise"


# analytic DAE ----------------------------------------------------------------------


@check("analytic_dae.initial_velocity")
def _initial_velocity(seed):
    gmm = GaussianMixture.from_components(
        [(0.5, GaussianMeasure(np.array([-1.0, 0.0]), np.eye(2))), (0.5, GaussianMeasure(np.array([1.0, 1.0]), np.diag([0.5, 1.5])))]
    )
    x = np.random.default_rng(seed).uniform(-2, 2, (20, 2))
    t = 1e-6
    score = measures.gmm_score(gmm, x)
    worst = 0.0
    for d in (np.eye(2), np.diag([0.3, 2.0])):
        vel = _smoothed_score(gmm, t, d, x)
        worst = max(worst, float(np.max(np.linalg.norm(vel - score, axis=1) / np.linalg.norm(score, axis=1))))
    return worst < INITIAL_VELOCITY_RTOL, f"max relative deviation {worst:.2e}"


def _smoothed_score(gmm, t, d, x):
    """``(Phi_t(x; D) - x) / t = grad log[W_t(.; D) * p0](x)``, closed form for mixtures."""
    smoothed = measures.heat_convolve_gaussian(gmm, t, d)
    return measures.gmm_score(smoothed, x)


@check("analytic_dae.semigroup")
def _semigroup(seed):
    defect = flows.semigroup_defect(_diag21(), 0.2, 0.4, _grid2())
    return defect < SEMIGROUP_TOL, f"defect {defect:.2e}"


@check("analytic_dae.mixture_pushforward_cov")
def _mixture_cov(seed):
    gmm = GaussianMixture.from_components([(0.5, GaussianMeasure.univariate(-4.0, 1.0)), (0.5, GaussianMeasure.univariate(4.0, 1.0))])
    cloud = measures.sample(gmm, 100_000, seed)
    t = 0.3
    x = cloud.points
    worst = 0.0
    for k, g in enumerate(gmm.gaussians):
        mask = (x[:, 0] > 0) == (g.mean[0] > 0)
        y = analytic_dae.continuous_dae_cluster_map(gmm, k, t)(x[mask])
        var = float(np.var(y[:, 0]))
        worst = max(worst, abs(var / (1.0 - 2.0 * t) - 1.0))
    return worst <= MIXTURE_COV_RTOL, f"max relative covariance error {worst:.3%}"


@check("analytic_dae.ordinary_gmm_convex")
def _convex(seed):
    gmm = GaussianMixture.from_components(
        [(0.4, GaussianMeasure(np.array([-1.0, 0.0]), np.eye(2))), (0.6, GaussianMeasure(np.array([1.0, 1.0]), np.diag([0.5, 1.5])))]
    )
    t = 0.2
    x = np.random.default_rng(seed).uniform(-3, 3, (50, 2))
    resp = analytic_dae.responsibility_matrix(gmm, t, x, "ordinary")
    manual = sum(resp[:, k : k + 1] * analytic_dae.ordinary_dae_gaussian(g, t)(x) for k, g in enumerate(gmm.gaussians))
    dev = float(np.max(np.abs(analytic_dae.ordinary_dae_gmm(gmm, t)(x) - manual)))
    return dev <= CONVEX_COMBINATION_TOL, f"max deviation {dev:.2e}"


# empirical DAE ------------------------------------------------------------------------


@check("empirical_dae.convex_hull")
def _hull(seed):
    rng = np.random.default_rng(seed)
    cloud = ParticleCloud(rng.standard_normal((300, 2)) * [2.0, 0.5])
    x = rng.uniform(-4, 4, (200, 2))
    y = empirical_dae.mean_shift_dae(cloud, 0.3, x)
    lo, hi = cloud.points.min(axis=0), cloud.points.max(axis=0)
    return bool(np.all(y >= lo) and np.all(y <= hi)), "outputs within componentwise bounds"


@check("empirical_dae.large_t_mean")
def _large_t(seed):
    rng = np.random.default_rng(seed)
    cloud = ParticleCloud(rng.standard_normal((400, 2)), _normalized(rng.uniform(0.5, 1.5, 400)))
    y = empirical_dae.mean_shift_dae(cloud, 1e6, rng.uniform(-1, 1, (10, 2)))
    dev = float(np.max(np.abs(y - cloud.mean())))
    return dev < LARGE_T_TOL, f"max deviation from weighted mean {dev:.2e}"


@check("empirical_dae.gaussian_agreement")
def _gaussian_agreement(seed):
    cloud = measures.sample(GaussianMeasure.univariate(0.0, 1.0), 100_000, seed)
    x = np.linspace(-2, 2, 81)[:, None]
    y = empirical_dae.mean_shift_dae(cloud, 0.3, x)
    mad = float(np.mean(np.abs(y - x / 1.3)))
    return mad < MEAN_SHIFT_GAUSSIAN_TOL, f"mean absolute deviation {mad:.4f}"


@check("empirical_dae.score_identity")
def _score_identity(seed):
    rng = np.random.default_rng(seed)
    cloud = ParticleCloud(rng.standard_normal((300, 2)))
    x = rng.uniform(-2, 2, (50, 2))
    t = 0.2
    lhs = empirical_dae.mean_shift_dae(cloud, t, x)
    rhs = x + t * empirical_dae.empirical_score(cloud, t, x)
    dev = float(np.max(np.abs(lhs - rhs)))
    return dev <= SCORE_IDENTITY_TOL, f"max deviation {dev:.2e}"


@check("empirical_dae.fgt_matches_direct")
def _fgt(seed):
    rng = np.random.default_rng(seed)
    src = rng.standard_normal((20_000, 1)) * 3.0
    w = rng.uniform(0.5, 1.0, src.shape[0])
    tgt = np.linspace(-8, 8, 2000)[:, None]
    a = kernel_sums(src, w, src, tgt, "direct")
    b = kernel_sums(src, w, src, tgt, "fgt")
    dev = max(float(np.max(np.abs(a[0] - b[0]))), float(np.max(np.abs(a[1] - b[1]))))
    return dev <= FGT_TOL, f"max deviation {dev:.2e}"


# flows ---------------------------------------------------------------------------------


@check("flows.first_order_limit")
def _first_order(seed):
    g0 = GaussianMeasure.univariate(0.0, 1.0)
    pts = np.linspace(-2, 2, 41)[:, None]
    errs = [flows.composition_limit_error(g0, 0.3, tau, pts) for tau in (0.1, 0.05, 0.025)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    lo, hi = LIMIT_RATIO_RANGE
    return all(lo <= r <= hi for r in ratios), "ratios " + ", ".join(f"{r:.3f}" for r in ratios)


@check("flows.small_tau_limit")
def _small_tau(seed):
    tau = 1e-3
    t = tau * np.arange(0, 501)
    std = flows.composed_std_recurrence(1.0, tau, 500)
    dev = float(np.max(np.abs(std**2 - np.maximum(1.0 - 2.0 * t, 0.0))))
    return dev <= SMALL_TAU_RTOL * 1.0, f"max deviation {dev:.4f} (relative to initial variance)"


@check("flows.monotone_variance")
def _monotone(seed):
    g0 = _diag21()
    ts = np.linspace(0.05, 0.45, 9)
    ok = True
    for mode in ("continuous", "ordinary", "composed"):
        prev = np.diag(g0.cov)
        for t in ts:
            amap = flows.analytic_orbit_map(g0, t, mode, tau=0.05)
            var = np.diag(amap.matrix @ g0.cov @ amap.matrix.T)
            ok &= bool(np.all(var <= prev + 1e-15))
            prev = var
    return ok, "continuous, ordinary, composed(0.05)"


@check("flows.rk4_order")
def _rk4(seed):
    g0 = _diag21()
    x0 = _grid2(5)
    exact = analytic_dae.continuous_dae_gaussian(g0, 0.4)(x0)
    gmm = GaussianMixture.single(g0)
    errs = [float(np.max(np.abs(flows.integrate_cdae_gmm(gmm, x0, 0.4, dt).final.points - exact))) for dt in (1e-2, 5e-3)]
    ratio = errs[0] / errs[1]
    lo, hi = RK4_RATIO_RANGE
    return lo <= ratio <= hi, f"error ratio {ratio:.2f}"


# ridgelet -------------------------------------------------------------------------------


def _bump(x):
    return np.exp(-0.5 * x * x)


@check("ridgelet.refinement_monotone")
def _refinement(seed):
    from .experiments import BUMP_LADDER

    errs = [bump_reconstruction_error(_bump, *rung)[0] for rung in BUMP_LADDER]
    ok = all(errs[i + 1] < errs[i] for i in range(len(errs) - 1)) and errs[-1] <= RECONSTRUCTION_TOL
    return ok, "errors " + ", ".join(f"{e:.4f}" for e in errs)


@check("ridgelet.full_grid_equals_dual")
def _full_grid(seed):
    pair = ridgelet.RidgeletPair()
    grid = ridgelet.RidgeletGrid.for_support(4.0, 0.4, 0.8, 6.0)
    x = np.arange(-6, 6 + 1e-9, 0.05)
    coeffs = ridgelet.ridgelet_transform(_bump(x), x, pair, grid)
    x_eval = np.linspace(-4, 4, 81)
    k = ridgelet.admissibility_constant(pair, 1)
    net = ridgelet.discretize_to_network(coeffs, grid.size, pair, k)
    dual = ridgelet.dual_ridgelet(coeffs, pair, x_eval, k=k, truncation_tol=1.0)
    dev = float(np.max(np.abs(net(x_eval[:, None])[:, 0] - dual)))
    return dev <= FULL_GRID_TOL, f"max deviation {dev:.2e}"


@check("ridgelet.factorized_weights")
def _factorized(seed):
    g0 = GaussianMeasure.univariate(0.0, 1.0)
    phi0 = analytic_dae.ordinary_dae_gaussian(g0, 0.1)
    phi1 = analytic_dae.ordinary_dae_gaussian(analytic_dae.ordinary_dae_gaussian_pushforward(g0, 0.1), 0.1)
    x = np.arange(-3.5, 3.5 + 1e-9, 0.04)
    grid = ridgelet.RidgeletGrid.for_support(10.0, 0.2, 0.8, 3.5)
    net = ridgelet.stacked_network_from_maps(phi0, phi1, x, grid, grid, 64, 64, ridgelet.SmoothWindow(), np.linspace(-2, 2, 41))
    w1 = net.network.w1
    exact = np.array_equal(w1, net.layer1.a @ net.layer0.c.T)
    rank = int(np.linalg.matrix_rank(w1))
    return exact and rank <= 1, f"W1 == a1 c0^T bitwise: {exact}, rank {rank}"


# stacking -------------------------------------------------------------------------------


def _gaussian_cloud(seed, n=4096):
    return measures.sample(GaussianMeasure.univariate(0.0, 1.0), n, seed)


@check("stacking.conjugacy_linear")
def _conj_linear(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(m, 7))
        G, _ = np.linalg.qr(rng.standard_normal((n, m)))
        a = rng.standard_normal((m, m))
        g0 = GaussianMeasure(rng.standard_normal(m), a @ a.T + 0.5 * np.eye(m))
        worst = max(worst, stacking.conjugacy_defect_linear(g0, G, 0.1, rng.standard_normal((25, m))))
    return worst < CONJUGACY_LINEAR_TOL, f"max defect {worst:.2e} over 20 instances"


@check("stacking.conjugacy_continuous")
def _conj_cont(seed):
    g0 = _diag21()
    worst = 0.0
    for q in (np.array([[0.0, -1.0], [1.0, 0.0]]), np.diag([1.0, -1.0])):
        worst = max(worst, stacking.conjugacy_defect_continuous(g0, q, 0.3, _grid2()))
    return worst < CONJUGACY_CONTINUOUS_TOL, f"max defect {worst:.2e}"


@check("stacking.decode_single_layer_exact")
def _decode_exact(seed):
    cloud = _gaussian_cloud(seed, 512)
    stack = stacking.stack_daes(cloud, 1, stacking.LayerParams(J=8, t_noise=0.3, epochs=50, seed=seed))
    x = cloud.points
    same = np.array_equal(stacking.decode_stack(stack)(x), stack.trained[0].net(x))
    split = np.array_equal(stack.layers[0].decode(stack.layers[0].encode(x)), stack.trained[0].net(x))
    return same and split, "decode == full network, decoder(encoder) == network"


def _training_progress(fit):
    rises = stacking.loss_rises(fit.eval_curve, tol=fit.eval_stderr)
    halved = fit.final_loss < LOSS_HALVING * fit.initial_loss
    return rises.size == 0 and halved, f"loss {fit.initial_loss:.4f} -> {fit.final_loss:.4f}, rises beyond stderr: {rises.size}"


@check("stacking.training_gaussian")
def _train_gaussian(seed):
    p = stacking.LayerParams(seed=seed + 1)
    fit = stacking.train_shallow_dae(_gaussian_cloud(seed), p.t_noise, p.J, p.epochs, p.lr, p.seed)
    return _training_progress(fit)


@check("stacking.training_swissroll")
def _train_swissroll(seed):
    cfg = build_config("swissroll", {})
    cloud = swiss_roll(cfg["n"], cfg["noise"], seed)
    p0 = stacking.LayerParams(cfg["J0"], cfg["t0"], cfg["epochs"], cfg["lr"], seed + 1)
    p1 = stacking.LayerParams(cfg["J1"], cfg["t1"], cfg["epochs"], cfg["lr"], seed + 2)
    stack = stacking.stack_daes(cloud, 2, [p0, p1])
    results = [_training_progress(f) for f in stack.trained]
    return all(r[0] for r in results), "; ".join(r[1] for r in results)


# cli ---------------------------------------------------------------------------------------


@check("cli.deterministic_output")
def _deterministic(seed):
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        blobs = []
        for k in range(2):
            out = os.path.join(tmp, f"orbit{k}.csv")
            components = "0.5:-2:1 ; 0.5:2:0.5"
            cfg = os.path.join(tmp, "orbit.cfg")
            with open(cfg, "w", encoding="utf-8") as fh:
                fh.write(f"dist = gmm\ncomponents = {components}\nn_samples = 50\nmode = composed\nn_particles = 500\n")
            with contextlib.redirect_stdout(io.StringIO()):
                code = main(["orbit", "--config", cfg, "--seed", str(seed), "--out", out])
            if code != 0:
                return False, f"orbit exited with {code}"
            with open(out, "rb") as fh:
                blobs.append(fh.read())
    return blobs[0] == blobs[1], f"{len(blobs[0])} bytes, identical: {blobs[0] == blobs[1]}"


def run_checks(names=None, seed=0):
    """Run the named checks (all by default) and return their results in registry order."""
    results = []
    for name, fn in REGISTRY.items():
        if names is not None and name not in names:
            continue
        start = time.perf_counter()
        try:
            passed, detail = fn(seed)
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - start))
    return results
