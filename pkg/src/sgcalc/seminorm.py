"""SG orders, Gevrey indices, phase-space sample grids and seminorm sweeps."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import TruncationCap

DERIVATIVE_CAP = 6


@dataclass(frozen=True)
class SGOrder:
    """Order pair (m1, m2): m1 counts powers of <xi>, m2 powers of <x>."""

    m1: float
    m2: float

    def __post_init__(self):
        if not (np.isfinite(self.m1) and np.isfinite(self.m2)):
            raise ValueError("SG orders must be finite")

    def __add__(self, other):
        return SGOrder(self.m1 + other.m1, self.m2 + other.m2)

    def shifted(self, j):
        return SGOrder(self.m1 - j, self.m2 - j)

    def as_list(self):
        return [_plain(self.m1), _plain(self.m2)]


@dataclass(frozen=True)
class GevreyIndices:
    mu: float = 1.0
    nu: float = 1.0
    theta: float | None = None

    def __post_init__(self):
        if self.mu < 1 or self.nu < 1:
            raise ValueError("Gevrey indices must satisfy mu >= 1 and nu >= 1")
        if self.theta is None:
            object.__setattr__(self, "theta", self.mu + self.nu - 1)
        elif self.theta < self.mu + self.nu - 1 - 1e-12:
            raise ValueError("theta must be >= mu + nu - 1")

    def as_dict(self):
        return {"mu": _plain(self.mu), "nu": _plain(self.nu), "theta": _plain(self.theta)}


def _plain(v):
    v = float(v)
    return int(v) if v.is_integer() else v


@dataclass
class PhaseGrid:
    """Sample points in R^n_x x R^n_xi, stored as arrays of shape (npts, n)."""

    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.xi = np.atleast_2d(np.asarray(self.xi, dtype=float))
        if self.x.shape != self.xi.shape:
            raise ValueError("x and xi samples must have the same shape")
        if self.x.shape[0] == 0:
            raise ValueError("grid is empty")

    @property
    def n(self):
        return self.x.shape[1]

    def __len__(self):
        return self.x.shape[0]

    def columns(self):
        return list(self.x.T), list(self.xi.T)

    def evaluate(self, e):
        xs, xis = self.columns()
        return ex.evaluate(e, xs, xis)


def sphere_directions(dim, count=16, seed=0):
    """Unit vectors in R^dim covering the sphere.

    For dim == 2 these are ``count`` equally spaced angles (the diagonals are
    included whenever count is a multiple of 8).  Otherwise the coordinate
    axes and all sign-diagonals come first, padded with seeded random
    directions up to ``count``.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        t = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(t), np.sin(t)])
    dirs = [s * v for v in np.eye(dim) for s in (1.0, -1.0)]
    for signs in itertools.product((1.0, -1.0), repeat=dim):
        dirs.append(np.array(signs) / np.sqrt(dim))
    rng = np.random.default_rng(seed)
    while len(dirs) < count:
        v = rng.standard_normal(dim)
        dirs.append(v / np.linalg.norm(v))
    return np.array(dirs)


def radial_grid(n, r_min, r_max, n_radii=12, count=16, seed=0):
    """Log-radial x directional grid on ``r_min <= |(x, xi)| <= r_max``."""
    if r_min <= 0 or r_max < r_min:
        raise ValueError("need 0 < r_min <= r_max")
    radii = np.geomspace(r_min, r_max, n_radii)
    dirs = sphere_directions(2 * n, count, seed)
    pts = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 2 * n)
    return PhaseGrid(pts[:, :n], pts[:, n:])


def box_grid(n, half_width, points_per_axis=9):
    """Tensor grid on the cube [-w, w]^{2n}."""
    axis = np.linspace(-half_width, half_width, points_per_axis)
    mesh = np.array(list(itertools.product(axis, repeat=2 * n)))
    return PhaseGrid(mesh[:, :n], mesh[:, n:])


def multi_indices(n, total):
    """All multi-indices in N^n with |alpha| <= total, ordered by degree."""
    out = []
    for k in range(total + 1):
        for combo in itertools.combinations_with_replacement(range(n), k):
            a = [0] * n
            for i in combo:
                a[i] += 1
            out.append(tuple(a))
    return out


def sg_seminorm_estimate(e, order, grid, max_total=0, indices=None, cap=DERIVATIVE_CAP):
    """Grid suprema of ``|d_x^beta d_xi^alpha e| <xi>^{|alpha|-m1} <x>^{|beta|-m2}``.

    Parameters
    ----------
    e : Expr
    order : SGOrder
    grid : PhaseGrid
    max_total : int
        Use every (alpha, beta) with |alpha| + |beta| <= max_total.
    indices : iterable of (alpha, beta), optional
        Explicit list of multi-index pairs; overrides ``max_total``.

    Returns
    -------
    dict mapping (alpha, beta) to the supremum over the grid.
    """
    n = grid.n
    if indices is None:
        indices = [(a, b) for a in multi_indices(n, max_total) for b in multi_indices(n, max_total - sum(a))]
    indices = [(tuple(a), tuple(b)) for a, b in indices]
    for a, b in indices:
        if sum(a) + sum(b) > cap:
            raise TruncationCap(f"|alpha|+|beta| = {sum(a) + sum(b)} exceeds the cap {cap}")
    xs, xis = grid.columns()
    bx = np.sqrt(1 + np.sum(grid.x ** 2, axis=1))
    bxi = np.sqrt(1 + np.sum(grid.xi ** 2, axis=1))
    out = {}
    for a, b in indices:
        d = ex.derivative(e, a, b)
        vals = np.abs(ex.evaluate(d, xs, xis)) * np.broadcast_to(1.0, bx.shape)
        weight = bxi ** (sum(a) - order.m1) * bx ** (sum(b) - order.m2)
        out[(a, b)] = float(np.max(vals * weight))
    return out
