"""Shallow ridge networks ``g(x) = sum_j c_j eta(a_j . x - b_j) + d``.

The hidden activation vector is the encoder and the output linear map
``z -> c^T z + d`` is the decoder, so ``net(x) == net.decode(net.encode(x))``
holds exactly.
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import as_points, restore
from .maps import TransportMap


def _gaussian(u):
    return np.exp(-0.5 * u * u)


def _gaussian_grad(u):
    return -u * np.exp(-0.5 * u * u)


def _tanh_grad(u):
    h = np.tanh(u)
    return 1.0 - h * h


ACTIVATIONS = {
    "gaussian": (_gaussian, _gaussian_grad),
    "tanh": (np.tanh, _tanh_grad),
}


def activation(name):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None


@dataclass(frozen=True, eq=False)
class ShallowNet:
    """``J`` ridge units: ``a`` is ``(J, m)``, ``b`` is ``(J,)``, ``c`` is ``(J, out)``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    activation: str = "gaussian"
    d: np.ndarray = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        c = np.asarray(self.c, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        j = a.shape[0]
        if j < 1:
            raise ValueError("a network needs at least one hidden unit")
        if b.shape != (j,) or c.shape[0] != j:
            raise ValueError(f"inconsistent unit counts: a {a.shape}, b {b.shape}, c {c.shape}")
        d = np.zeros(c.shape[1]) if self.d is None else np.atleast_1d(np.asarray(self.d, dtype=float))
        if d.shape != (c.shape[1],):
            raise ValueError("output offset must match the output dimension")
        activation(self.activation)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @property
    def n_units(self):
        return self.a.shape[0]

    @property
    def in_dim(self):
        return self.a.shape[1]

    @property
    def out_dim(self):
        return self.c.shape[1]

    def preactivation(self, pts):
        return pts @ self.a.T - self.b

    def encode(self, x):
        """Hidden activations ``[eta(a_j . x - b_j)]_j``."""
        pts, vec = as_points(x, self.in_dim)
        fn, _ = activation(self.activation)
        return restore(fn(self.preactivation(pts)), vec)

    def decode(self, z):
        z = np.asarray(z, dtype=float)
        return z @ self.c + self.d

    def __call__(self, x):
        return self.decode(self.encode(x))

    def to_dict(self):
        return {
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "c": self.c.tolist(),
            "d": self.d.tolist(),
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(np.array(doc["a"]), np.array(doc["b"]), np.array(doc["c"]), doc["activation"], np.array(doc["d"]))


class NetworkMap(TransportMap):
    """A square :class:`ShallowNet` viewed as a map ``M -> M``."""

    kind = "network"

    def __init__(self, net):
        if net.in_dim != net.out_dim:
            raise ValueError("a transport map needs equal input and output dimensions")
        super().__init__(net.in_dim)
        self.net = net

    def _apply(self, pts):
        return self.net(pts)


@dataclass(frozen=True, eq=False)
class TwoLayerNet:
    """``sum_i c1_i eta(sum_j W1_ij eta(a0_j . x - b0_j) - b1_i) + d1``.

    ``w1`` is stored explicitly; when built from two ridge layers it equals
    the factorized product ``a1_i . c0_j``. ``b1`` already absorbs the
    layer-0 output offset.
    """

    layer0: ShallowNet
    w1: np.ndarray
    b1: np.ndarray
    c1: np.ndarray
    d1: np.ndarray
    activation: str = "gaussian"

    def hidden0(self, x):
        return self.layer0.encode(x)

    def __call__(self, x):
        pts, vec = as_points(x, self.layer0.in_dim)
        fn, _ = activation(self.activation)
        z0 = self.layer0.encode(pts)
        z1 = fn(z0 @ self.w1.T - self.b1)
        return restore(z1 @ self.c1 + self.d1, vec)
