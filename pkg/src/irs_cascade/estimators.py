"""Closed-form quantization-aware estimator, OMP support detection and baselines."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .acquisition import SparsityPattern, gen_pilot_plan
from .channel import ChannelRealization, crandn
from .geometry import build_transform, mat, vec
from .quantizer import QuantizerSpec, quantize

COND_LIMIT = 1e12


class IllConditionedWarning(UserWarning):
    pass


@dataclass(frozen=True)
class EstimatorParams:
    eta: float
    sigma_h2: float
    sigma_n2: float
    N: int

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        if self.sigma_h2 <= 0 or self.sigma_n2 <= 0:
            raise ValueError("channel and noise powers must be positive")
        if self.N < 0:
            raise ValueError("N must be non-negative")

    @property
    def c(self) -> float:
        """Per-entry variance of the effective (noise + distortion) term."""
        return (1.0 - self.eta) * (self.sigma_n2 + self.eta * self.sigma_h2 * self.N)

    @property
    def gain(self) -> float:
        return 1.0 - self.eta


@dataclass(frozen=True, eq=False)
class EstimateResult:
    h_v_hat: np.ndarray
    H_hat: np.ndarray
    nmse: Optional[float] = None


def _regularized_solve(K: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve K X = rhs by LU with partial pivoting, warning on poor conditioning.

    ``K`` is overwritten.
    """
    anorm = np.linalg.norm(K, 1)
    lu, piv = linalg.lu_factor(K, overwrite_a=True, check_finite=False)
    gecon = lapack.get_lapack_funcs("gecon", (lu,))
    rcond, _ = gecon(lu, anorm)
    if rcond == 0 or 1.0 / rcond > COND_LIMIT:
        warnings.warn(f"regularized normal matrix is ill-conditioned (rcond={rcond:.3g})",
                      IllConditionedWarning, stacklevel=3)
    return linalg.lu_solve((lu, piv), rhs, check_finite=False)


def _normal_matrix(A: np.ndarray, ridge: float, gram: Optional[np.ndarray]) -> np.ndarray:
    K = A.conj().T @ A if gram is None else gram.copy()
    K[np.diag_indices_from(K)] += ridge
    return K


def proposed_digital_estimator(Xi: np.ndarray, params: EstimatorParams,
                               gram: Optional[np.ndarray] = None) -> np.ndarray:
    """Quantization-aware linear MMSE digital estimator, shape (N_v, TL).

    W = (Xi^H Xi + c / ((1-eta)^2 sigma_h2) I)^-1 Xi^H / (1-eta).
    ``gram`` may carry a precomputed Xi^H Xi.
    """
    g = params.gain
    K = _normal_matrix(Xi, params.c / (g * g * params.sigma_h2), gram)
    return _regularized_solve(K, Xi.conj().T) / g


def proposed_apply(Xi: np.ndarray, y: np.ndarray, params: EstimatorParams,
                   gram: Optional[np.ndarray] = None) -> np.ndarray:
    """``proposed_digital_estimator(Xi, params) @ y`` without forming W."""
    g = params.gain
    K = _normal_matrix(Xi, params.c / (g * g * params.sigma_h2), gram)
    return _regularized_solve(K, Xi.conj().T @ y) / g


def baseline_lmmse(Psi: np.ndarray, sigma_n2: float, sigma_h2: float = 1.0,
                   gram: Optional[np.ndarray] = None) -> np.ndarray:
    """Quantization-unaware Wiener filter (Psi^H Psi + sigma_n2/sigma_h2 I)^-1 Psi^H."""
    K = _normal_matrix(Psi, sigma_n2 / sigma_h2, gram)
    return _regularized_solve(K, Psi.conj().T)


def lmmse_apply(Psi: np.ndarray, y: np.ndarray, sigma_n2: float, sigma_h2: float = 1.0,
                gram: Optional[np.ndarray] = None) -> np.ndarray:
    K = _normal_matrix(Psi, sigma_n2 / sigma_h2, gram)
    return _regularized_solve(K, Psi.conj().T @ y)


def analytic_mse(W: np.ndarray, Xi: np.ndarray, params: EstimatorParams) -> float:
    """Expected squared error of ``W @ y`` under the linearized white-prior model."""
    g, s2 = params.gain, params.sigma_h2
    WXi = W @ Xi
    return float(s2 * g * g * np.vdot(WXi, WXi).real
                 - 2.0 * s2 * g * np.trace(WXi).real
                 + s2 * Xi.shape[1]
                 + params.c * np.vdot(W, W).real)


def mse_gradient(W: np.ndarray, Xi: np.ndarray, params: EstimatorParams) -> np.ndarray:
    """Derivative of :func:`analytic_mse` with respect to conj(W)."""
    g, s2 = params.gain, params.sigma_h2
    return g * g * s2 * (W @ Xi) @ Xi.conj().T - g * s2 * Xi.conj().T + params.c * W


def estimate(W_D: np.ndarray, y: np.ndarray, pattern: SparsityPattern, A_r: np.ndarray,
             n_irs: int, H_true: Optional[np.ndarray] = None) -> EstimateResult:
    """Apply the digital estimator and map back to the antenna domain."""
    if W_D.shape != (pattern.n_active, y.size):
        raise ValueError(f"estimator shape {W_D.shape} incompatible with support "
                         f"{pattern.n_active} and {y.size} observations")
    return reconstruct(W_D @ y, pattern, A_r, n_irs, H_true)


def reconstruct(h_s: np.ndarray, pattern: SparsityPattern, A_r: np.ndarray, n_irs: int,
                H_true: Optional[np.ndarray] = None) -> EstimateResult:
    """Embed support coefficients and return A_r mat(h_v)."""
    M = A_r.shape[0]
    if pattern.size != M * n_irs:
        raise ValueError(f"pattern size {pattern.size} != {M}*{n_irs}")
    if h_s.shape != (pattern.n_active,):
        raise ValueError(f"got {h_s.shape[0]} coefficients for a support of {pattern.n_active}")
    h_v_hat = pattern.embed(h_s)
    H_hat = A_r @ mat(h_v_hat, M, n_irs)
    return EstimateResult(h_v_hat, H_hat, None if H_true is None else nmse(H_hat, H_true))


def noise_floor_tol(c: float, n_obs: int, y: np.ndarray, factor: float = 3.0) -> float:
    """Relative residual threshold ``factor * n_obs * c / ||y||^2``."""
    yy = np.vdot(y, y).real
    return math.inf if yy == 0 else factor * n_obs * c / yy


def omp_support(Psi_eff: np.ndarray, y: np.ndarray, max_atoms: int,
                residual_tol: float = 0.0) -> SparsityPattern:
    """Greedy support detection by orthogonal matching pursuit.

    Stops after ``max_atoms`` selections or once ||r||^2 / ||y||^2 drops
    below ``residual_tol``. The returned support is sorted.
    """
    n_obs, n_atoms = Psi_eff.shape
    if max_atoms > min(n_obs, n_atoms):
        raise ValueError(f"max_atoms={max_atoms} exceeds min{Psi_eff.shape}")
    yy = np.vdot(y, y).real
    selected: list[int] = []
    if yy == 0:
        return SparsityPattern.from_indices(selected, n_atoms)
    norms = np.linalg.norm(Psi_eff, axis=0)
    norms[norms == 0] = np.inf
    PsiH = Psi_eff.conj().T
    residual = y
    # orthonormal basis of the selected columns, grown by Gram-Schmidt
    Q = np.empty((n_obs, max_atoms), dtype=complex)
    while len(selected) < max_atoms:
        if np.vdot(residual, residual).real / yy < residual_tol:
            break
        score = np.abs(PsiH @ residual) / norms
        score[selected] = -1.0
        k = int(np.argmax(score))
        q = Psi_eff[:, k].astype(complex)
        j = len(selected)
        for _ in range(2):
            q = q - Q[:, :j] @ (Q[:, :j].conj().T @ q)
        qn = np.linalg.norm(q)
        if qn <= 1e-12 * norms[k]:
            break
        Q[:, j] = q / qn
        selected.append(k)
        # least-squares refit on the selected set = projection onto span(Q)
        residual = residual - Q[:, j] * np.vdot(Q[:, j], residual)
    return SparsityPattern.from_indices(sorted(selected), n_atoms)


def baseline_onoff(ch: ChannelRealization, n_rf: int, spec: QuantizerSpec, sigma_n2: float,
                   rng: np.random.Generator, sigma_h2: float = 1.0) -> EstimateResult:
    """Element-by-element ("on-off") estimation through the hybrid front end.

    For each IRS element n only that element reflects (unit amplitude);
    ceil(M/L) channel uses with fresh random combiners observe column n of
    the cascade, which is recovered by plain least squares.
    """
    M, N = ch.H.shape
    uses = -(-M // n_rf)
    H_hat = np.empty((M, N), dtype=complex)
    for n in range(N):
        plan = gen_pilot_plan(rng, M, n_rf, uses)
        h = ch.H[:, n]
        r = h[None, :] * plan.symbols[:, None] + math.sqrt(sigma_n2) * crandn(rng, uses, M)
        x = np.einsum("tml,tm->tl", plan.combiners.conj(), r)
        w2 = np.sum(np.abs(plan.combiners) ** 2, axis=1)
        y = quantize(x, spec, np.sqrt((sigma_h2 + sigma_n2) * w2 / 2.0))
        # y[t] = s_t W_t^H h  ->  stacked (uses*L) x M system
        A = (plan.combiners.conj().transpose(0, 2, 1) * plan.symbols[:, None, None]).reshape(-1, M)
        H_hat[:, n] = np.linalg.lstsq(A, y.reshape(-1), rcond=None)[0]
    A_r = build_transform(ch.bs_dims)
    return EstimateResult(vec(A_r.conj().T @ H_hat), H_hat, nmse(H_hat, ch.H))


def nmse(H_hat: np.ndarray, H_true: np.ndarray) -> float:
    if H_hat.shape != H_true.shape:
        raise ValueError(f"shape mismatch {H_hat.shape} vs {H_true.shape}")
    ref = np.vdot(H_true, H_true).real
    if ref == 0:
        raise ValueError("true channel has zero norm")
    d = H_hat - H_true
    return float(np.vdot(d, d).real / ref)
