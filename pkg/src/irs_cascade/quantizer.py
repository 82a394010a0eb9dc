"""Low-resolution ADC model: Lloyd-Max codebooks and Bussgang gain.

Each real dimension of a complex sample is quantized independently after
scaling by its RMS (an idealized AGC).  ``bits=None`` denotes an
infinite-resolution converter.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.special import ndtr

_SQRT_2PI = np.sqrt(2.0 * np.pi)
MAX_ITER = 200_000
TOL = 1e-10
LEVEL_TOL = 1e-9


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class QuantizerSpec:
    bits: Optional[int]
    levels: np.ndarray
    thresholds: np.ndarray
    eta: float

    @property
    def infinite(self) -> bool:
        return self.bits is None

    @property
    def gain(self) -> float:
        """Bussgang gain 1 - eta."""
        return 1.0 - self.eta

    def __repr__(self):
        return f"QuantizerSpec(bits={'inf' if self.infinite else self.bits}, eta={self.eta:.6g})"


INFINITE = QuantizerSpec(None, np.empty(0), np.empty(0), 0.0)


def _pdf(x):
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def _cell_moments(edges):
    """Probability, first and second partial moments of N(0,1) on each cell."""
    a, b = edges[:-1], edges[1:]
    pa, pb = _pdf(a), _pdf(b)
    p0 = ndtr(b) - ndtr(a)
    p1 = pa - pb
    # x*pdf(x) -> 0 at +-inf; pdf is already 0 there
    apa = np.where(np.isfinite(a), a, 0.0) * pa
    bpb = np.where(np.isfinite(b), b, 0.0) * pb
    p2 = p0 + apa - bpb
    return p0, p1, p2


def _distortion(levels, thresholds):
    edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
    p0, p1, p2 = _cell_moments(edges)
    return float(np.sum(p2 - 2.0 * levels * p1 + levels ** 2 * p0))


@lru_cache(maxsize=None)
def _lloyd_max(bits: int):
    n = 2 ** bits
    # Gaussian quantiles as the starting codebook
    from scipy.special import ndtri
    levels = ndtri((np.arange(n) + 0.5) / n)
    eta_prev = np.inf
    for _ in range(MAX_ITER):
        thresholds = 0.5 * (levels[1:] + levels[:-1])
        edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
        p0, p1, _ = _cell_moments(edges)
        new = p1 / p0
        # enforce exact symmetry about zero
        new = 0.5 * (new - new[::-1])
        step = np.abs(new - levels).max()
        levels = new
        thresholds = 0.5 * (levels[1:] + levels[:-1])
        eta = _distortion(levels, thresholds)
        # eta is flat near the optimum, so also wait for the codebook to settle
        if abs(eta_prev - eta) < TOL and step < LEVEL_TOL:
            return levels, thresholds, eta
        eta_prev = eta
    raise ConvergenceError(f"Lloyd-Max iteration for {bits} bits did not converge in {MAX_ITER} steps")


def lloyd_max(bits: Optional[int]) -> QuantizerSpec:
    """MMSE scalar quantizer for a unit-variance real Gaussian.

    ``bits=None`` returns the infinite-resolution (identity) spec.
    """
    if bits is None:
        return INFINITE
    if not 1 <= bits <= 8:
        raise ValueError(f"bits must be in 1..8, got {bits}")
    levels, thresholds, eta = _lloyd_max(int(bits))
    levels = levels.copy()
    thresholds = thresholds.copy()
    levels.flags.writeable = False
    thresholds.flags.writeable = False
    return QuantizerSpec(int(bits), levels, thresholds, eta)


def _quantize_real(x, spec, scale):
    # side="right": values on a threshold go to the higher cell
    idx = np.searchsorted(spec.thresholds, x / scale, side="right")
    return scale * spec.levels[idx]


def quantize(x, spec: QuantizerSpec, per_dim_scale) -> np.ndarray:
    """Quantize real and imaginary parts independently.

    ``per_dim_scale`` is the RMS of each real dimension; scalar or an array
    broadcastable against ``x`` (one value per RF chain, for instance).
    """
    x = np.asarray(x)
    if spec.infinite:
        return x.copy()
    scale = np.asarray(per_dim_scale, dtype=float)
    if np.any(scale <= 0):
        raise ValueError("per_dim_scale must be positive")
    return _quantize_real(x.real, spec, scale) + 1j * _quantize_real(x.imag, spec, scale)


def bussgang_gain(spec: QuantizerSpec, rng: np.random.Generator, n_samples: int = 10 ** 6) -> float:
    """Empirical E{Q(x) x*} / E{|x|^2} for standard complex Gaussian x."""
    if n_samples < 10 ** 5:
        raise ValueError("need at least 1e5 samples")
    x = (rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)) / np.sqrt(2.0)
    q = quantize(x, spec, np.sqrt(0.5))
    return float(np.real(np.vdot(x, q)) / np.vdot(x, x).real)
