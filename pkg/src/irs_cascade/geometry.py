"""UPA steering vectors and the unitary angular-domain transforms.

All vectorization in the package is column-stacking with the first array
axis fastest (Fortran order), so ``vec`` and ``mat`` below are the only
place the convention lives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HALF_WAVELENGTH = 0.5


@dataclass(frozen=True)
class UpaDims:
    rows: int
    cols: int

    def __post_init__(self):
        if int(self.rows) != self.rows or int(self.cols) != self.cols:
            raise ValueError(f"array dimensions must be integers, got {self.rows}x{self.cols}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"array dimensions must be positive, got {self.rows}x{self.cols}")

    @property
    def total(self) -> int:
        return self.rows * self.cols

    @classmethod
    def square(cls, total: int) -> "UpaDims":
        """Square array with ``total`` elements; ``total`` must be a perfect square."""
        side = math.isqrt(total)
        if side * side != total:
            raise ValueError(f"{total} antennas do not form a square array")
        return cls(side, side)

    def __str__(self):
        return f"{self.rows}x{self.cols}"


class DirectionPair(NamedTuple):
    """Dimensionless spatial frequencies along the two array axes."""
    u: float
    v: float


class AngularGrid(NamedTuple):
    u_points: np.ndarray
    v_points: np.ndarray


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def mat(x: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.asarray(x).reshape((rows, cols), order="F")


def angle_to_direction(elevation: float, azimuth: float,
                       spacing_ratio: float = HALF_WAVELENGTH) -> DirectionPair:
    if spacing_ratio < 0.5:
        raise ValueError(f"element spacing must be at least half a wavelength, got d/lambda={spacing_ratio}")
    return DirectionPair(spacing_ratio * math.cos(elevation),
                         spacing_ratio * math.sin(elevation) * math.cos(azimuth))


def _axis_response(n: int, freq) -> np.ndarray:
    # columns are exp(-j 2 pi k f) for k = 0..n-1, one column per frequency
    k = np.arange(n)[:, None]
    return np.exp(-2j * np.pi * k * np.atleast_1d(np.asarray(freq, dtype=float))[None, :])


def steering_vector(dims: UpaDims, direction) -> np.ndarray:
    """Vectorized UPA response at spatial frequencies ``direction = (u, v)``.

    Entry ``m1 + rows*m2`` equals ``exp(-j2pi(m1*u + m2*v)) / sqrt(total)``.
    """
    u, v = direction
    a_u = _axis_response(dims.rows, u)[:, 0]
    a_v = _axis_response(dims.cols, v)[:, 0]
    return np.kron(a_v, a_u) / math.sqrt(dims.total)


def steering_matrix(dims: UpaDims, directions) -> np.ndarray:
    """Stack steering vectors for a sequence of directions as columns."""
    d = np.asarray(directions, dtype=float).reshape(-1, 2)
    a_u = _axis_response(dims.rows, d[:, 0])
    a_v = _axis_response(dims.cols, d[:, 1])
    # column k is kron(a_v[:, k], a_u[:, k])
    out = (a_v[:, None, :] * a_u[None, :, :]).reshape(dims.total, -1)
    return out / math.sqrt(dims.total)


def grid_points(n: int) -> np.ndarray:
    """Virtual directions (2p - n - 1) / (2n), p = 1..n."""
    p = np.arange(1, n + 1)
    return (2 * p - n - 1) / (2 * n)


def virtual_grid(dims: UpaDims) -> AngularGrid:
    return AngularGrid(grid_points(dims.rows), grid_points(dims.cols))


def dft_factor(n: int) -> np.ndarray:
    """n-point shifted DFT factor, unit-norm columns."""
    return _axis_response(n, grid_points(n)) / math.sqrt(n)


def build_transform(dims: UpaDims) -> np.ndarray:
    """Unitary angular transform with the u index running fastest over columns.

    Built column by column from steering vectors; equals
    ``kron(dft_factor(cols), dft_factor(rows))``.
    """
    grid = virtual_grid(dims)
    uu, vv = np.meshgrid(grid.u_points, grid.v_points, indexing="xy")
    directions = np.column_stack([uu.ravel(), vv.ravel()])
    return steering_matrix(dims, directions)


def snap_to_grid(dims: UpaDims, direction) -> DirectionPair:
    """Nearest virtual grid direction, accounting for 1-periodicity of u and v."""
    grid = virtual_grid(dims)

    def nearest(points, x):
        d = (points - x + 0.5) % 1.0 - 0.5
        return float(points[np.argmin(np.abs(d))])

    return DirectionPair(nearest(grid.u_points, direction[0]), nearest(grid.v_points, direction[1]))
