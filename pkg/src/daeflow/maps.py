"""Evaluable transport maps M -> M.

Every map accepts a single point ``(m,)`` or a batch ``(n, m)`` and returns
the same shape. Affine maps carry an analytic Jacobian; every other kind
falls back to central differences with step :data:`FD_STEP`.
"""

import numpy as np

from ._linalg import as_points, restore

FD_STEP = 1e-5


class TransportMap:
    kind = "generic"

    def __init__(self, dim):
        self.dim = int(dim)

    def _apply(self, pts):
        raise NotImplementedError

    def __call__(self, x):
        pts, vec = as_points(x, self.dim)
        return restore(self._apply(pts), vec)

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        eye = np.eye(self.dim) * FD_STEP
        plus = self._apply(x[None, :] + eye)
        minus = self._apply(x[None, :] - eye)
        return ((plus - minus) / (2.0 * FD_STEP)).T

    def then(self, other):
        """``other o self``."""
        return ComposedMap([self, other])


class AffineMap(TransportMap):
    """``x -> A x + b``."""

    kind = "affine"

    def __init__(self, matrix, offset):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        offset = np.atleast_1d(np.asarray(offset, dtype=float))
        if matrix.shape != (offset.size, offset.size):
            raise ValueError("affine map must be square and match its offset")
        super().__init__(offset.size)
        self.matrix = matrix
        self.offset = offset

    def _apply(self, pts):
        return pts @ self.matrix.T + self.offset

    def jacobian(self, x=None):
        return self.matrix.copy()

    def compose_affine(self, other):
        """Affine form of ``other o self``."""
        return AffineMap(other.matrix @ self.matrix, other.matrix @ self.offset + other.offset)

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim), np.zeros(dim))


class ComposedMap(TransportMap):
    """Apply ``maps[0]`` first, then ``maps[1]``, and so on."""

    kind = "composed"

    def __init__(self, maps):
        maps = list(maps)
        if not maps:
            raise ValueError("a composition needs at least one map")
        flat = []
        for m in maps:
            flat.extend(m.maps if isinstance(m, ComposedMap) else [m])
        super().__init__(flat[0].dim)
        self.maps = flat

    def _apply(self, pts):
        for m in self.maps:
            pts = m(pts)
        return pts

    def __len__(self):
        return len(self.maps)


class FunctionMap(TransportMap):
    """Wrap a vectorized callable ``(n, m) -> (n, m)``."""

    kind = "function"

    def __init__(self, fn, dim):
        super().__init__(dim)
        self.fn = fn

    def _apply(self, pts):
        return np.asarray(self.fn(pts), dtype=float).reshape(pts.shape[0], -1)
