"""Uniform Dirichlet grids, the discrete Laplacian, and its dual-norm geometry.

Fields live on the interior nodes of a 1D interval or a 2D box and are stored
as flat float arrays. Two inner products are used throughout:

* the cell-weighted L2 product  <u, v>_2 = h^d * sum_i u_i v_i,
* the dual product  <f, g>_{-1} = <(-Lap)^{-1} f, g>_2,

where ``-Lap`` is the standard second-difference Laplacian with homogeneous
Dirichlet boundary conditions. The operator is assembled densely and
eigendecomposed once per grid (desk-scale sizes only, see ``DEFAULT_NODE_CAP``),
which makes fractional smoothing (-Lap)^{-gamma} and the heat-kernel mollifier
exact spectral multipliers. The mollifier multiplier exp(-mu/n^2) lies in
(0, 1], so smoothing is a strict contraction of the dual norm and converges to
the identity as the level n grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh

DEFAULT_NODE_CAP = 4096


def _as_axis_tuple(value, dim, name, cast):
    if np.ndim(value) == 0:
        return tuple(cast(value) for _ in range(dim))
    items = tuple(cast(v) for v in value)
    if len(items) != dim:
        raise ValueError(f"{name} must have {dim} entries, got {len(items)}")
    return items


@dataclass(frozen=True)
class SpatialGrid:
    """Interior nodes of a uniform interval (dim=1) or box (dim=2)."""

    dim: int
    n_per_axis: tuple[int, ...]
    length_per_axis: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.n_per_axis) != self.dim or len(self.length_per_axis) != self.dim:
            raise ValueError("axis tuples must match dim")
        if any(n < 1 for n in self.n_per_axis):
            raise ValueError("need at least one interior node per axis")
        if any(ell <= 0 for ell in self.length_per_axis):
            raise ValueError("axis lengths must be positive")

    @property
    def h(self) -> tuple[float, ...]:
        """Mesh width per axis, length / (n + 1)."""
        return tuple(ell / (n + 1) for ell, n in zip(self.length_per_axis, self.n_per_axis))

    @property
    def weight(self) -> float:
        """Quadrature weight of one interior cell, prod of mesh widths."""
        out = 1.0
        for hh in self.h:
            out *= hh
        return out

    @property
    def n_total(self) -> int:
        out = 1
        for n in self.n_per_axis:
            out *= n
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n_per_axis


def make_grid(dim: int, n, length=1.0) -> SpatialGrid:
    """Build a grid from scalar or per-axis node counts and lengths."""
    return SpatialGrid(
        dim=int(dim),
        n_per_axis=_as_axis_tuple(n, dim, "n", int),
        length_per_axis=_as_axis_tuple(length, dim, "length", float),
    )


class DirichletLaplacian:
    """Dense -Lap on interior nodes with cached eigenpairs and factorization.

    ``matrix`` is the symmetric positive definite matrix of -Lap, so
    ``matrix @ u`` discretizes -Lap(u). ``eigenvalues`` are ascending and
    strictly positive; ``eigenvectors`` columns are orthonormal in the plain
    Euclidean sense (divide by sqrt(grid.weight) for the L2-orthonormal
    modes). Instances are immutable after construction apart from the private
    factorization cache used by the time steppers.
    """

    def __init__(self, grid: SpatialGrid, matrix: np.ndarray,
                 eigenvalues: np.ndarray, eigenvectors: np.ndarray):
        self.grid = grid
        self.matrix = matrix
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors
        self._cho = cho_factor(matrix)
        self._step_cache: dict = {}

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self):
        return f"DirichletLaplacian(grid={self.grid}, n={self.n})"


def _second_difference(n: int, h: float) -> np.ndarray:
    a = np.zeros((n, n))
    np.fill_diagonal(a, 2.0)
    idx = np.arange(n - 1)
    a[idx, idx + 1] = -1.0
    a[idx + 1, idx] = -1.0
    return a / (h * h)


def build_laplacian(grid: SpatialGrid, node_cap: int = DEFAULT_NODE_CAP) -> DirichletLaplacian:
    """Assemble -Lap on the grid and eigendecompose it densely.

    Raises ValueError when the grid exceeds ``node_cap`` interior nodes; the
    dense eigensolve is intentional and capped to keep construction cheap.
    """
    if grid.n_total > node_cap:
        raise ValueError(
            f"grid has {grid.n_total} interior nodes, above the dense cap {node_cap}"
        )
    h = grid.h
    if grid.dim == 1:
        mat = _second_difference(grid.n_per_axis[0], h[0])
    else:
        ax = _second_difference(grid.n_per_axis[0], h[0])
        ay = _second_difference(grid.n_per_axis[1], h[1])
        mat = np.kron(ax, np.eye(grid.n_per_axis[1])) + np.kron(np.eye(grid.n_per_axis[0]), ay)
    vals, vecs = eigh(mat)
    if vals[0] <= 0:
        raise ValueError(f"discrete Laplacian lost positivity: min eigenvalue {vals[0]}")
    return DirichletLaplacian(grid, mat, vals, vecs)


def _check_field(f, n, name="field"):
    f = np.asarray(f, dtype=float)
    if f.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {f.shape}")
    return f


def apply_laplacian(L: DirichletLaplacian, u) -> np.ndarray:
    """Apply Lap (negative definite): returns -(matrix @ u)."""
    u = _check_field(u, L.n, "u")
    return -(L.matrix @ u)


def solve_laplacian(L: DirichletLaplacian, f) -> np.ndarray:
    """Solve -Lap u = f by the cached Cholesky factorization."""
    f = _check_field(f, L.n, "f")
    return cho_solve(L._cho, f)


def inner_l2(u, v, grid: SpatialGrid) -> float:
    u = _check_field(u, grid.n_total, "u")
    v = _check_field(v, grid.n_total, "v")
    return grid.weight * float(u @ v)


def norm_l2(u, grid: SpatialGrid) -> float:
    return float(np.sqrt(max(inner_l2(u, u, grid), 0.0)))


def inner_hminus1(f, g, L: DirichletLaplacian) -> float:
    """Dual inner product <(-Lap)^{-1} f, g>_2."""
    return inner_l2(solve_laplacian(L, f), g, L.grid)


def norm_hminus1(f, L: DirichletLaplacian) -> float:
    return float(np.sqrt(max(inner_hminus1(f, f, L), 0.0)))


def hminus1_norm_sq_rows(L: DirichletLaplacian, rows: np.ndarray) -> np.ndarray:
    """Squared dual norms of many fields at once; rows has shape (m, n)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != L.n:
        raise ValueError(f"rows must have {L.n} columns, got {rows.shape[1]}")
    coeff = rows @ L.eigenvectors
    return L.grid.weight * np.sum(coeff * coeff / L.eigenvalues, axis=1)


def spectral_apply(L: DirichletLaplacian, multipliers: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Apply the diagonal spectral operator sum_j w_j <f, phi_j>_2 phi_j.

    Accepts a single field (n,) or a stack of columns (n, m).
    """
    f = np.asarray(f, dtype=float)
    coeff = L.eigenvectors.T @ f
    if f.ndim == 1:
        return L.eigenvectors @ (multipliers * coeff)
    return L.eigenvectors @ (multipliers[:, None] * coeff)


def smooth_gamma(f, gamma: float, L: DirichletLaplacian) -> np.ndarray:
    """Fractional smoothing (-Lap)^{-gamma}; gamma = 0 is the identity."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    f = np.asarray(f, dtype=float)
    if gamma == 0:
        return f.copy()
    return spectral_apply(L, L.eigenvalues ** (-gamma), f)


def mollify(f, level: int, L: DirichletLaplacian) -> np.ndarray:
    """Heat-kernel mollifier with multiplier exp(-mu_j / level^2).

    The multiplier lies in (0, 1], so the dual norm never grows, and it
    increases to 1 as ``level`` grows, so the defect |mollify(f) - f| in the
    dual norm decreases to zero.
    """
    level = int(level)
    if level < 1:
        raise ValueError(f"mollifier level must be >= 1, got {level}")
    return spectral_apply(L, np.exp(-L.eigenvalues / level**2), f)


def eigenmode(L: DirichletLaplacian, index: int) -> np.ndarray:
    """The index-th eigenvector (0-based, ascending eigenvalues), L2-normalized."""
    if not 0 <= index < L.n:
        raise ValueError(f"eigenmode index {index} out of range [0, {L.n})")
    return L.eigenvectors[:, index] / np.sqrt(L.grid.weight)
