"""Trainable shallow DAEs, stacking, decoding, and linear conjugacy checks.

A shallow DAE is ``g(x) = C^T tanh(A x - b) + d``; its encoder is
``h(x) = tanh(A x - b)`` and its decoder ``k(z) = C^T z + d``. It is fitted
by full-batch gradient descent on ``sum_i w_i |g(x_i + e_i) - x_i|^2`` with
``e_i ~ N(0, t I)`` drawn afresh every epoch.

A stack trains layer ``l`` on the features ``Z^l = h^{l-1}(Z^{l-1})``;
decoding reattaches ``k^0 o ... o k^L`` after ``h^L o ... o h^0``.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .analytic_dae import anisotropic_dae_gaussian, continuous_dae_gaussian
from .errors import TrainingDivergedError
from .maps import ComposedMap, FunctionMap
from .measures import GaussianMeasure, ParticleCloud
from .networks import NetworkMap, ShallowNet

ORTHONORMAL_TOL = 1e-12
INIT_SCALE = 1.0


@dataclass(frozen=True)
class LayerParams:
    J: int = 32
    t_noise: float = 0.3
    epochs: int = 2000
    lr: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.J < 1:
            raise ValueError("J must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not self.t_noise > 0 or not self.lr > 0:
            raise ValueError("noise time and learning rate must be positive")


@dataclass(frozen=True, eq=False)
class EncoderDecoderPair:
    """Encoder ``h`` and decoder ``k`` of one layer.

    ``kind='network'`` splits a :class:`ShallowNet`; ``kind='linear'`` uses an
    encoder matrix ``G`` with orthonormal columns and decoder ``G^T``.
    """

    kind: str
    net: ShallowNet = None
    matrix: np.ndarray = None

    def __post_init__(self):
        if self.kind == "network":
            if self.net is None:
                raise ValueError("network pairs need a ShallowNet")
        elif self.kind == "linear":
            g = np.atleast_2d(np.asarray(self.matrix, dtype=float))
            _check_orthonormal(g)
            object.__setattr__(self, "matrix", g)
        else:
            raise ValueError(f"unknown encoder/decoder kind {self.kind!r}")

    @property
    def in_dim(self):
        return self.net.in_dim if self.kind == "network" else self.matrix.shape[1]

    @property
    def feature_dim(self):
        return self.net.n_units if self.kind == "network" else self.matrix.shape[0]

    def encode(self, x):
        if self.kind == "network":
            return self.net.encode(x)
        return np.asarray(x, dtype=float) @ self.matrix.T

    def decode(self, z):
        if self.kind == "network":
            return self.net.decode(z)
        return np.asarray(z, dtype=float) @ self.matrix

    def full(self, x):
        return self.decode(self.encode(x))


def _check_orthonormal(g):
    dev = np.max(np.abs(g.T @ g - np.eye(g.shape[1])))
    if dev > ORTHONORMAL_TOL:
        raise ValueError(f"encoder matrix columns are not orthonormal (max |G^T G - I| = {dev:.3e})")


@dataclass(frozen=True, eq=False)
class TrainedDAE:
    pair: EncoderDecoderPair
    net: ShallowNet
    params: LayerParams
    loss_curve: np.ndarray
    eval_curve: np.ndarray
    eval_stderr: float = 0.0

    @property
    def initial_loss(self):
        return float(self.eval_curve[0])

    @property
    def final_loss(self):
        return float(self.eval_curve[-1])


def _forward(x, a, b, c, d):
    h = np.tanh(x @ a.T - b)
    return h, h @ c + d


def init_network(in_dim, J, rng, out_mean):
    a = rng.standard_normal((J, in_dim)) * (INIT_SCALE / np.sqrt(in_dim))
    b = rng.standard_normal(J) * INIT_SCALE
    return a, b, np.zeros((J, in_dim)), np.array(out_mean, dtype=float)


def train_shallow_dae(cloud: ParticleCloud, t_noise: float, J: int, epochs: int, lr: float, seed: int):
    """Fit a one-hidden-layer tanh DAE by full-batch gradient descent.

    Output weights start at zero and the output bias at the weighted data
    mean, so the initial loss is the data variance plus nothing learned.
    ``loss_curve`` holds the loss on each epoch's own corruption (before the
    update); ``eval_curve`` the loss on one fixed seeded corruption, at
    initialization and after every epoch.
    """
    params = LayerParams(J, t_noise, epochs, lr, seed)
    x = cloud.points
    w = cloud.weights
    rng = np.random.default_rng(seed)
    a, b, c, d = init_network(cloud.dim, J, rng, w @ x)
    scale = np.sqrt(t_noise)
    x_eval = x + scale * rng.standard_normal(x.shape)

    def eval_terms():
        # overflow here is reported as divergence by the finiteness checks
        with np.errstate(over="ignore", invalid="ignore"):
            _, y = _forward(x_eval, a, b, c, d)
            return np.sum((y - x) ** 2, axis=1)

    def eval_loss():
        return float(w @ eval_terms())

    losses = np.empty(epochs)
    evals = np.empty(epochs + 1)
    evals[0] = eval_loss()
    for ep in range(epochs):
        xt = x + scale * rng.standard_normal(x.shape)
        h, y = _forward(xt, a, b, c, d)
        r = y - x
        loss = float(w @ np.sum(r * r, axis=1))
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"training diverged: non-finite loss at epoch {ep}")
        losses[ep] = loss
        # manual backpropagation of the weighted squared error
        dy = 2.0 * w[:, None] * r
        grad_c = h.T @ dy
        grad_d = dy.sum(axis=0)
        dpre = (dy @ c.T) * (1.0 - h * h)
        grad_a = dpre.T @ xt
        grad_b = -dpre.sum(axis=0)
        a = a - lr * grad_a
        b = b - lr * grad_b
        c = c - lr * grad_c
        d = d - lr * grad_d
        evals[ep + 1] = eval_loss()
        if not np.isfinite(evals[ep + 1]):
            raise TrainingDivergedError(f"training diverged: non-finite loss at epoch {ep}")
    net = ShallowNet(a, b, c, "tanh", d)
    terms = eval_terms()
    # standard error of the weighted mean of per-sample losses
    stderr = float(np.sqrt(w @ (terms - w @ terms) ** 2 * np.sum(w * w)))
    return TrainedDAE(EncoderDecoderPair("network", net), net, params, losses, evals, stderr)


def loss_rises(curve, tol=0.0, start=10):
    """Epochs after ``start`` at which ``curve`` rises by more than ``tol``.

    With a fixed learning rate and fresh corruption each epoch, descent
    jitters once it reaches the noise floor, so callers pass the Monte-Carlo
    standard error of the loss estimate as ``tol``.
    """
    tail = np.asarray(curve)[start:]
    return np.flatnonzero(np.diff(tail) > tol) + start + 1


@dataclass(frozen=True, eq=False)
class StackedDAE:
    layers: list
    params: list = field(default_factory=list)
    clouds: list = field(default_factory=list)
    trained: list = field(default_factory=list)

    def __post_init__(self):
        for k in range(1, len(self.layers)):
            if self.layers[k].in_dim != self.layers[k - 1].feature_dim:
                raise ValueError(f"layer {k} expects dimension {self.layers[k].in_dim}, previous layer emits {self.layers[k - 1].feature_dim}")

    @property
    def depth(self):
        return len(self.layers)

    def encode(self, x):
        z = np.asarray(x, dtype=float)
        for layer in self.layers:
            z = layer.encode(z)
        return z

    def decode(self, z):
        for layer in reversed(self.layers):
            z = layer.decode(z)
        return z

    @classmethod
    def untrained(cls, dims, decoder_bias=None):
        """Zero-weight network layers ``dims[l] -> dims[l+1]``; decoding gives a constant map."""
        layers = []
        for k in range(len(dims) - 1):
            m, j = dims[k], dims[k + 1]
            d = np.zeros(m) if (k > 0 or decoder_bias is None) else np.asarray(decoder_bias, dtype=float)
            net = ShallowNet(np.zeros((j, m)), np.zeros(j), np.zeros((j, m)), "tanh", d)
            layers.append(EncoderDecoderPair("network", net))
        return cls(layers)

    def to_dict(self):
        return {
            "layers": [layer.net.to_dict() for layer in self.layers],
            "params": [asdict(p) for p in self.params],
            "loss_curves": [t.eval_curve.tolist() for t in self.trained],
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, doc):
        layers = [EncoderDecoderPair("network", ShallowNet.from_dict(n)) for n in doc["layers"]]
        params = [LayerParams(**p) for p in doc.get("params", [])]
        return cls(layers, params)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _layer_params(per_layer_params, L):
    if isinstance(per_layer_params, LayerParams):
        return [per_layer_params] * L
    plist = list(per_layer_params)
    if len(plist) != L:
        raise ValueError(f"expected {L} layer parameter sets, got {len(plist)}")
    return plist


def stack_daes(cloud0: ParticleCloud, L: int, per_layer_params):
    """Train layer ``l`` on ``Z^l`` and propagate ``Z^{l+1} = h^l(Z^l)``."""
    if L < 1:
        raise ValueError("a stack needs at least one layer")
    plist = _layer_params(per_layer_params, L)
    clouds = [cloud0]
    trained = []
    cur = cloud0
    for p in plist:
        fit = train_shallow_dae(cur, p.t_noise, p.J, p.epochs, p.lr, p.seed)
        trained.append(fit)
        cur = ParticleCloud(fit.pair.encode(cur.points), cur.weights)
        clouds.append(cur)
    return StackedDAE([t.pair for t in trained], plist, clouds, trained)


def decode_stack(stack: StackedDAE):
    """``(k^0 o ... o k^L) o (h^L o ... o h^0)`` as a ground-space map."""
    dim = stack.layers[0].in_dim
    return FunctionMap(lambda pts: stack.decode(stack.encode(pts)), dim)


def composition_baseline(cloud0: ParticleCloud, per_layer_params, L: int):
    """Train ``L`` full DAEs on the ground space, each on the previous output cloud.

    Returns ``(composed_map, trained_list)``.
    """
    if L < 1:
        raise ValueError("a composition needs at least one layer")
    plist = _layer_params(per_layer_params, L)
    cur = cloud0
    maps = []
    trained = []
    for p in plist:
        fit = train_shallow_dae(cur, p.t_noise, p.J, p.epochs, p.lr, p.seed)
        trained.append(fit)
        step = NetworkMap(fit.net)
        maps.append(step)
        cur = ParticleCloud(step(cur.points), cur.weights)
    return ComposedMap(maps), trained


def displacement_cosine(map_a, map_b, points):
    """Cosine similarity of the displacement fields ``f(x) - x`` over ``points``."""
    pts = np.asarray(points, dtype=float)
    u = (map_a(pts) - pts).ravel()
    v = (map_b(pts) - pts).ravel()
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(u @ v / (nu * nv))


# exact conjugacy checks --------------------------------------------------------


def embed_gaussian(g0: GaussianMeasure, G):
    """Law of ``G X`` for ``X ~ g0`` (degenerate when ``G`` has more rows than columns)."""
    cov = G @ g0.cov @ G.T
    return GaussianMeasure(G @ g0.mean, 0.5 * (cov + cov.T))


def conjugacy_defect_linear(g0: GaussianMeasure, G, tau: float, test_points):
    """``max |G^T Phi^1(G x) - Phi^0(x)|`` for anisotropic DAEs with ``D = I`` on both spaces."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    _check_orthonormal(G)
    if G.shape[1] != g0.dim:
        raise ValueError("embedding must have one column per ground-space dimension")
    upper = anisotropic_dae_gaussian(embed_gaussian(g0, G), tau, np.eye(G.shape[0]))
    lower = anisotropic_dae_gaussian(g0, tau, np.eye(g0.dim))
    x = np.asarray(test_points, dtype=float).reshape(-1, g0.dim)
    w = x @ G.T
    return float(np.max(np.abs(upper(w) @ G - lower(x))))


def conjugacy_defect_continuous(g0: GaussianMeasure, Q, t: float, test_points):
    """``max |Q^T phi^1_t(Q x) - phi^0_t(x)|`` for the rotated Gaussian ``N(Q mu, Q S Q^T)``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape != (g0.dim, g0.dim):
        raise ValueError("conjugation must be a square matrix of the ground dimension")
    _check_orthonormal(Q)
    upper = continuous_dae_gaussian(embed_gaussian(g0, Q), t)
    lower = continuous_dae_gaussian(g0, t)
    x = np.asarray(test_points, dtype=float).reshape(-1, g0.dim)
    return float(np.max(np.abs(upper(x @ Q.T) @ Q - lower(x))))
