"""Random draws of the IRS->BS and user->IRS channels and their cascade."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (UpaDims, angle_to_direction, build_transform, mat, snap_to_grid,
                       steering_matrix, steering_vector, vec)

KINDS = ("rayleigh", "rician", "sparse", "geometric")


@dataclass(frozen=True)
class ChannelModel:
    """Channel family plus its parameters.

    ``support_size`` applies to ``sparse``; ``n_paths_g``/``n_paths_G`` to
    ``geometric``; ``k_factor_db`` to ``rician``.
    """
    kind: str = "rayleigh"
    k_factor_db: float = 10.0
    support_size: int = 1
    n_paths_g: int = 3
    n_paths_G: int = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "rician" and math.isnan(self.k_factor_db):
            raise ValueError("Rician K-factor must not be NaN")
        if self.support_size < 1 or self.n_paths_g < 1 or self.n_paths_G < 1:
            raise ValueError("support size and path counts must be >= 1")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One channel draw.

    ``G`` and ``g`` are ``None`` for cascade-only realizations, where the
    angular-domain cascade is planted directly.
    """
    H: np.ndarray
    H_v: np.ndarray
    bs_dims: UpaDims
    irs_dims: UpaDims
    G: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None
    support: Optional[np.ndarray] = field(default=None)

    @property
    def h_v(self) -> np.ndarray:
        return vec(self.H_v)

    @property
    def cascade_only(self) -> bool:
        return self.G is None


def crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    """i.i.d. CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def cascade(G, g, bs_dims: UpaDims, irs_dims: UpaDims, A_r=None) -> ChannelRealization:
    """Build a realization from (G, g): H = G diag(g), H_v = A_r^H H."""
    if A_r is None:
        A_r = build_transform(bs_dims)
    H = G * g[None, :]
    return ChannelRealization(H=H, H_v=A_r.conj().T @ H, bs_dims=bs_dims,
                              irs_dims=irs_dims, G=G, g=g)


def gen_rayleigh(rng, bs_dims: UpaDims, irs_dims: UpaDims) -> ChannelRealization:
    M, N = bs_dims.total, irs_dims.total
    return cascade(crandn(rng, M, N), crandn(rng, N), bs_dims, irs_dims)


def _random_direction(rng):
    elevation = rng.uniform(0.0, math.pi)
    azimuth = rng.uniform(-math.pi, math.pi)
    return angle_to_direction(elevation, azimuth)


def gen_rician(rng, bs_dims: UpaDims, irs_dims: UpaDims, k_db: float) -> ChannelRealization:
    """LOS + Rayleigh mixture with K-factor ``k_db``; unit average power per entry.

    ``k_db = -inf`` is pure Rayleigh and ``k_db = +inf`` pure LOS.
    """
    if math.isnan(k_db):
        raise ValueError("K-factor must not be NaN")
    M, N = bs_dims.total, irs_dims.total
    K = 10.0 ** (k_db / 10.0)
    if math.isinf(K):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los, w_nlos = math.sqrt(K / (K + 1.0)), math.sqrt(1.0 / (K + 1.0))

    a_user = steering_vector(irs_dims, _random_direction(rng))
    a_bs = steering_vector(bs_dims, _random_direction(rng))
    a_irs = steering_vector(irs_dims, _random_direction(rng))
    g_los = math.sqrt(N) * a_user
    G_los = math.sqrt(M * N) * np.outer(a_bs, a_irs.conj())

    G = w_los * G_los + w_nlos * crandn(rng, M, N)
    g = w_los * g_los + w_nlos * crandn(rng, N)
    return cascade(G, g, bs_dims, irs_dims)


def gen_on_grid_sparse(rng, bs_dims: UpaDims, irs_dims: UpaDims, n_nonzero: int) -> ChannelRealization:
    """Cascade with exactly ``n_nonzero`` angular coefficients, CN(0, MN/n_nonzero) each."""
    M, N = bs_dims.total, irs_dims.total
    if not 1 <= n_nonzero <= M * N:
        raise ValueError(f"support size must lie in [1, {M * N}], got {n_nonzero}")
    support = np.sort(rng.choice(M * N, size=n_nonzero, replace=False))
    h_v = np.zeros(M * N, dtype=complex)
    h_v[support] = math.sqrt(M * N / n_nonzero) * crandn(rng, n_nonzero)
    H_v = mat(h_v, M, N)
    A_r = build_transform(bs_dims)
    return ChannelRealization(H=A_r @ H_v, H_v=H_v, bs_dims=bs_dims, irs_dims=irs_dims,
                              support=support)


def gen_geometric(rng, bs_dims: UpaDims, irs_dims: UpaDims, n_paths_g: int, n_paths_G: int,
                  on_grid: bool = False) -> ChannelRealization:
    """Finite-path model: g = sum alpha_k a_I, G = sum gamma_k a_R a_I'^H.

    With ``on_grid`` every direction is snapped to the nearest virtual grid
    point of its array.
    """
    if n_paths_g < 1 or n_paths_G < 1:
        raise ValueError("path counts must be >= 1")
    M, N = bs_dims.total, irs_dims.total

    def directions(dims, n):
        d = [_random_direction(rng) for _ in range(n)]
        if on_grid:
            d = [snap_to_grid(dims, x) for x in d]
        return d

    alpha = math.sqrt(N / n_paths_g) * crandn(rng, n_paths_g)
    g = steering_matrix(irs_dims, directions(irs_dims, n_paths_g)) @ alpha

    gamma = math.sqrt(M * N / n_paths_G) * crandn(rng, n_paths_G)
    a_r = steering_matrix(bs_dims, directions(bs_dims, n_paths_G))
    a_i = steering_matrix(irs_dims, directions(irs_dims, n_paths_G))
    G = (a_r * gamma[None, :]) @ a_i.conj().T
    return cascade(G, g, bs_dims, irs_dims)


def generate(model: ChannelModel, rng, bs_dims: UpaDims, irs_dims: UpaDims) -> ChannelRealization:
    if model.kind == "rayleigh":
        return gen_rayleigh(rng, bs_dims, irs_dims)
    if model.kind == "rician":
        return gen_rician(rng, bs_dims, irs_dims, model.k_factor_db)
    if model.kind == "sparse":
        return gen_on_grid_sparse(rng, bs_dims, irs_dims, model.support_size)
    return gen_geometric(rng, bs_dims, irs_dims, model.n_paths_g, model.n_paths_G)
