"""Pilot phase of the hybrid receiver and the stacked measurement operator.

Row block ``t`` of the operator is ``kron(s(t) phi_t^T, W_t^H A_r)``, so that
``Psi @ vec(H_v)`` stacks ``W_t^H H phi_t s(t)`` over the channel uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .channel import ChannelRealization, crandn
from .geometry import build_transform
from .quantizer import INFINITE, QuantizerSpec, quantize


@dataclass(frozen=True, eq=False)
class ReflectionPattern:
    """IRS reflection vectors, shape ``(n_uses, N)``.

    A single row is held fixed over the whole coherence block; otherwise
    row ``t`` is applied at channel use ``t``.
    """
    phi: np.ndarray

    def __post_init__(self):
        if self.phi.ndim != 2:
            raise ValueError("phi must be 2-D (n_uses, N)")

    @property
    def n_elements(self) -> int:
        return self.phi.shape[1]

    @property
    def fixed(self) -> bool:
        return self.phi.shape[0] == 1

    def at(self, T: int) -> np.ndarray:
        """Reflection vectors for each of ``T`` channel uses, shape (T, N)."""
        if self.fixed:
            return np.broadcast_to(self.phi, (T, self.n_elements))
        if self.phi.shape[0] != T:
            raise ValueError(f"pattern has {self.phi.shape[0]} uses, block has {T}")
        return self.phi


@dataclass(frozen=True, eq=False)
class PilotPlan:
    symbols: np.ndarray      # (T,)
    combiners: np.ndarray    # (T, M, L)

    @property
    def T(self) -> int:
        return self.combiners.shape[0]

    @property
    def M(self) -> int:
        return self.combiners.shape[1]

    @property
    def L(self) -> int:
        return self.combiners.shape[2]


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    support: np.ndarray
    size: int

    def __post_init__(self):
        s = self.support
        if s.ndim != 1:
            raise ValueError("support must be 1-D")
        if s.size and (s.min() < 0 or s.max() >= self.size):
            raise ValueError(f"support index out of range [0, {self.size})")
        if np.unique(s).size != s.size:
            raise ValueError("support indices must be distinct")

    @classmethod
    def identity(cls, size: int) -> "SparsityPattern":
        return cls(np.arange(size), size)

    @classmethod
    def from_indices(cls, indices, size: int) -> "SparsityPattern":
        return cls(np.asarray(indices, dtype=np.intp).reshape(-1), size)

    @property
    def n_active(self) -> int:
        return self.support.size

    @property
    def is_identity(self) -> bool:
        return self.n_active == self.size and bool(np.all(self.support == np.arange(self.size)))

    def select(self, x: np.ndarray) -> np.ndarray:
        """P^T x."""
        return x[self.support]

    def embed(self, x: np.ndarray) -> np.ndarray:
        """(P^T)^+ x: zero-padded placement of ``x`` on the support."""
        out = np.zeros(self.size, dtype=np.result_type(x, complex))
        out[self.support] = x
        return out


@dataclass(frozen=True, eq=False)
class MeasurementBlock:
    Psi: np.ndarray
    Xi: np.ndarray
    y: np.ndarray
    noise_var: float
    pattern: SparsityPattern
    quantizer: QuantizerSpec = INFINITE

    @property
    def n_obs(self) -> int:
        return self.y.size


def default_pilots(M: int, N: int, L: int) -> int:
    return -(-M * N // L)


def gen_reflection(rng: np.random.Generator, N: int, n_uses: int = 1) -> ReflectionPattern:
    """Unit-modulus reflection coefficients with phases i.i.d. uniform on [0, 2pi)."""
    theta = rng.uniform(0.0, 2.0 * math.pi, size=(n_uses, N))
    return ReflectionPattern(np.exp(1j * theta))


def gen_pilot_plan(rng: np.random.Generator, M: int, L: int, T: Optional[int] = None,
                   N: Optional[int] = None) -> PilotPlan:
    """Random phase-only combiners with entries exp(j psi)/sqrt(M); unit pilots.

    ``T`` defaults to ceil(MN/L), which needs ``N``.
    """
    if L > M:
        raise ValueError(f"RF chains ({L}) cannot exceed antennas ({M})")
    if T is None:
        if N is None:
            raise ValueError("give T or N")
        T = default_pilots(M, N, L)
    psi = rng.uniform(0.0, 2.0 * math.pi, size=(T, M, L))
    return PilotPlan(np.ones(T, dtype=complex), np.exp(1j * psi) / math.sqrt(M))


def build_operator(plan: PilotPlan, refl: ReflectionPattern, A_r: np.ndarray) -> np.ndarray:
    """Stacked TL x MN operator."""
    T, M, L = plan.combiners.shape
    phi = refl.at(T) * plan.symbols[:, None]                                   # (T, N)
    B = np.einsum("tml,mk->tlk", plan.combiners.conj(), A_r)                 # W_t^H A_r
    N = phi.shape[1]
    return (phi[:, None, :, None] * B[:, :, None, :]).reshape(T * L, N * M)


def chain_scales(plan: PilotPlan, refl: ReflectionPattern, sigma_n2: float,
                 sigma_h2: float = 1.0) -> np.ndarray:
    """Per-real-dimension RMS at each ADC input, shape (T, L), from model statistics."""
    T = plan.T
    w2 = np.sum(np.abs(plan.combiners) ** 2, axis=1)                          # (T, L)
    phi2 = np.sum(np.abs(refl.at(T)) ** 2, axis=1) * np.abs(plan.symbols) ** 2  # (T,)
    var = sigma_h2 * phi2[:, None] * w2 + sigma_n2 * w2
    return np.sqrt(var / 2.0)


def simulate_observation(ch: ChannelRealization, refl: ReflectionPattern, plan: PilotPlan,
                         spec: QuantizerSpec, sigma_n2: float, rng: np.random.Generator,
                         A_r: Optional[np.ndarray] = None, sigma_h2: float = 1.0) -> MeasurementBlock:
    """Noisy, quantized pilot observations and the matching operator (full pattern)."""
    M, N = ch.H.shape
    if plan.M != M:
        raise ValueError(f"combiners have {plan.M} rows, channel has {M} BS antennas")
    if refl.n_elements != N:
        raise ValueError(f"reflection has {refl.n_elements} elements, channel has {N}")
    if A_r is None:
        A_r = build_transform(ch.bs_dims)
    T, L = plan.T, plan.L
    phi = refl.at(T)

    r = (ch.H @ phi.T).T * plan.symbols[:, None]                             # (T, M)
    r = r + math.sqrt(sigma_n2) * crandn(rng, T, M)
    x = np.einsum("tml,tm->tl", plan.combiners.conj(), r)
    y = quantize(x, spec, chain_scales(plan, refl, sigma_n2, sigma_h2)) if not spec.infinite else x

    Psi = build_operator(plan, refl, A_r)
    return MeasurementBlock(Psi=Psi, Xi=Psi, y=y.reshape(-1), noise_var=sigma_n2,
                            pattern=SparsityPattern.identity(M * N), quantizer=spec)


def restrict(block: MeasurementBlock, pattern: SparsityPattern) -> MeasurementBlock:
    """Restrict the operator to the columns on ``pattern``'s support."""
    if pattern.size != block.Psi.shape[1]:
        raise ValueError(f"pattern size {pattern.size} != operator width {block.Psi.shape[1]}")
    return replace(block, Xi=block.Psi[:, pattern.support], pattern=pattern)
