"""Monte-Carlo NMSE experiments.

Every trial draws from its own generator seeded by ``(seed, cell, trial)``,
so results do not depend on the order in which trials are executed.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import yaml

from . import acquisition as acq
from .channel import ChannelModel, generate
from .estimators import (EstimatorParams, baseline_onoff, lmmse_apply, noise_floor_tol,
                         omp_support, proposed_apply, reconstruct)
from .geometry import UpaDims, build_transform
from .quantizer import lloyd_max

log = logging.getLogger(__name__)

ESTIMATORS = ("proposed", "proposed_sparse", "lmmse", "onoff")
CSV_HEADER = ("sweep", "value", "estimator", "bits", "trials", "nmse", "nmse_db", "wall_ms")


def parse_dims(value) -> UpaDims:
    if isinstance(value, UpaDims):
        return value
    if isinstance(value, (tuple, list)):
        return UpaDims(int(value[0]), int(value[1]))
    rows, _, cols = str(value).lower().partition("x")
    return UpaDims(int(rows), int(cols))


def parse_bits(value) -> Optional[int]:
    if value is None or str(value).strip().lower() in ("inf", "infinite", "none"):
        return None
    return int(value)


def format_bits(bits: Optional[int]) -> str:
    return "inf" if bits is None else str(bits)


@dataclass(frozen=True)
class SystemConfig:
    bs_dims: UpaDims = UpaDims(4, 4)
    irs_dims: UpaDims = UpaDims(4, 4)
    L: int = 4
    T: Optional[int] = None
    bits: Optional[int] = 2
    snr_db: float = 10.0
    channel: ChannelModel = ChannelModel()
    trials: int = 500
    seed: int = 0
    estimators: tuple = ("proposed", "lmmse", "onoff")
    # "per_use" redraws the IRS phases every channel use; "fixed" holds one vector
    reflection: str = "per_use"
    sigma_h2: float = 1.0
    omp_max_atoms: Optional[int] = None
    omp_residual_factor: float = 1.0

    def __post_init__(self):
        if self.L < 1 or self.L > self.M:
            raise ValueError(f"need 1 <= L <= M, got L={self.L}, M={self.M}")
        if self.T is not None and self.T < 1:
            raise ValueError("T must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ValueError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")
        if self.reflection not in ("per_use", "fixed"):
            raise ValueError(f"reflection must be 'per_use' or 'fixed', got {self.reflection!r}")

    @property
    def M(self) -> int:
        return self.bs_dims.total

    @property
    def N(self) -> int:
        return self.irs_dims.total

    @property
    def pilots(self) -> int:
        return self.T if self.T is not None else acq.default_pilots(self.M, self.N, self.L)

    @property
    def sigma_n2(self) -> float:
        # unit pilot power
        return 10.0 ** (-self.snr_db / 10.0)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, data: dict) -> "SystemConfig":
        """Build from flat key/value pairs; channel parameters sit at top level."""
        data = dict(data)
        kw = {}
        channel_kw = {}
        if "k_factor_db" in data:
            channel_kw["k_factor_db"] = float(data.pop("k_factor_db"))
        for key in ("support_size", "n_paths_g", "n_paths_G"):
            if key in data:
                channel_kw[key] = int(data.pop(key))
        if "channel" in data:
            channel_kw["kind"] = str(data.pop("channel")).lower()
        if channel_kw:
            kw["channel"] = ChannelModel(**channel_kw)
        for key, value in data.items():
            if key in ("bs_dims", "irs_dims"):
                kw[key] = parse_dims(value)
            elif key == "bits":
                kw[key] = parse_bits(value)
            elif key == "estimators":
                kw[key] = tuple(value) if isinstance(value, (list, tuple)) else split_list(value)
            elif key in ("L", "trials", "seed", "omp_max_atoms"):
                kw[key] = None if value is None else int(value)
            elif key == "T":
                kw[key] = None if value in (None, "auto") else int(value)
            elif key in ("snr_db", "sigma_h2", "omp_residual_factor"):
                kw[key] = float(value)
            elif key == "reflection":
                kw[key] = str(value)
            else:
                raise ValueError(f"unknown config key {key!r}")
        return cls(**kw)


def load_config(path) -> SystemConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a flat key/value mapping")
    return SystemConfig.from_mapping(data)


def split_list(text) -> tuple:
    return tuple(s.strip() for s in str(text).split(",") if s.strip())


def trial_rng(seed: int, cell: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, cell, trial]))


def run_trial(cfg: SystemConfig, rng: np.random.Generator) -> dict:
    """One channel draw, one pilot phase, every configured estimator.

    Returns ``{estimator: (nmse, seconds)}``; seconds covers the estimator's
    own computation only (support detection included for proposed_sparse).
    """
    bs, irs = cfg.bs_dims, cfg.irs_dims
    M, N, L, T = cfg.M, cfg.N, cfg.L, cfg.pilots
    spec = lloyd_max(cfg.bits)
    sigma_n2 = cfg.sigma_n2
    A_r = build_transform(bs)

    ch = generate(cfg.channel, rng, bs, irs)
    refl = acq.gen_reflection(rng, N, n_uses=T if cfg.reflection == "per_use" else 1)
    plan = acq.gen_pilot_plan(rng, M, L, T)
    block = acq.simulate_observation(ch, refl, plan, spec, sigma_n2, rng, A_r=A_r,
                                     sigma_h2=cfg.sigma_h2)
    params = EstimatorParams(spec.eta, cfg.sigma_h2, sigma_n2, N)

    out = {}
    gram = None
    for name in cfg.estimators:
        t0 = time.perf_counter()
        if name in ("proposed", "lmmse") and gram is None:
            # shared by both dense estimators; charged to whichever runs first
            gram = block.Psi.conj().T @ block.Psi
        if name == "proposed":
            h = proposed_apply(block.Xi, block.y, params, gram)
            res = reconstruct(h, block.pattern, A_r, N, ch.H)
        elif name == "proposed_sparse":
            max_atoms = cfg.omp_max_atoms
            if max_atoms is None:
                # sparsity level known a priori when the channel is planted sparse
                max_atoms = (cfg.channel.support_size if cfg.channel.kind == "sparse"
                             else min(block.Psi.shape))
            tol = noise_floor_tol(params.c, block.n_obs, block.y, cfg.omp_residual_factor)
            pattern = omp_support(params.gain * block.Psi, block.y, max_atoms, tol)
            sub = acq.restrict(block, pattern)
            h = proposed_apply(sub.Xi, block.y, params)
            res = reconstruct(h, pattern, A_r, N, ch.H)
        elif name == "lmmse":
            h = lmmse_apply(block.Psi, block.y, sigma_n2, cfg.sigma_h2, gram)
            res = reconstruct(h, block.pattern, A_r, N, ch.H)
        else:
            res = baseline_onoff(ch, L, spec, sigma_n2, rng, cfg.sigma_h2)
        out[name] = (res.nmse, time.perf_counter() - t0)
    return out


@dataclass(frozen=True)
class SweepRow:
    sweep: str
    value: float
    estimator: str
    bits: Optional[int]
    trials: int
    nmse: float
    nmse_db: float
    wall_ms: float


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def get(self, value, estimator: str, bits="any") -> SweepRow:
        for r in self.rows:
            if r.value == value and r.estimator == estimator and (bits == "any" or r.bits == bits):
                return r
        raise KeyError((value, estimator, bits))

    def nmse(self, value, estimator: str, bits="any") -> float:
        return self.get(value, estimator, bits).nmse

    def __len__(self):
        return len(self.rows)


def run_cell(cfg: SystemConfig, cell: int) -> dict:
    """Average ``cfg.trials`` trials; returns {estimator: (nmse_mean, wall_ms_mean)}."""
    n = cfg.trials
    err = {e: np.empty(n) for e in cfg.estimators}
    wall = {e: np.empty(n) for e in cfg.estimators}
    for t in range(n):
        rec = run_trial(cfg, trial_rng(cfg.seed, cell, t))
        for e, (v, sec) in rec.items():
            err[e][t] = v
            wall[e][t] = sec
    # np.sum uses pairwise summation over the trial-indexed array
    return {e: (float(np.sum(err[e]) / n), float(np.sum(wall[e]) / n * 1e3)) for e in cfg.estimators}


def _collect(result: SweepResult, sweep: str, value, cfg: SystemConfig, cell_out: dict):
    for e in cfg.estimators:
        m, ms = cell_out[e]
        result.rows.append(SweepRow(sweep, value, e, cfg.bits, cfg.trials, m,
                                    10.0 * math.log10(m), ms))


def sweep_snr(cfg: SystemConfig, snr_list: Sequence[float],
              bits_list: Optional[Sequence[Optional[int]]] = None) -> SweepResult:
    bits_list = [cfg.bits] if bits_list is None else list(bits_list)
    result = SweepResult()
    cell = 0
    for bits in bits_list:
        for snr in snr_list:
            c = cfg.replace(snr_db=float(snr), bits=bits)
            log.info("sweep-snr bits=%s snr=%s", format_bits(bits), snr)
            _collect(result, "snr", float(snr), c, run_cell(c, cell))
            cell += 1
    return result


def antenna_config(cfg: SystemConfig, M: int) -> SystemConfig:
    """Square BS array with ``M`` antennas and pilots reset to ceil(MN/L)."""
    return cfg.replace(bs_dims=UpaDims.square(M), T=None)


def sweep_antennas(cfg: SystemConfig, m_list: Sequence[int]) -> SweepResult:
    result = SweepResult()
    for cell, M in enumerate(m_list):
        c = antenna_config(cfg, int(M))
        log.info("sweep-antennas M=%d T=%d", c.M, c.pilots)
        _collect(result, "antennas", float(M), c, run_cell(c, cell))
    return result


def sparsity_config(cfg: SystemConfig, fraction: float) -> SystemConfig:
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"sparsity must lie in (0, 1], got {fraction}")
    MN = cfg.M * cfg.N
    n_v = min(MN, max(1, round(fraction * MN)))
    return cfg.replace(channel=dataclasses.replace(cfg.channel, kind="sparse", support_size=n_v))


def sweep_sparsity(cfg: SystemConfig, sparsity_list: Sequence[float]) -> SweepResult:
    result = SweepResult()
    for cell, frac in enumerate(sparsity_list):
        c = sparsity_config(cfg, float(frac))
        log.info("sweep-sparsity fraction=%s N_v=%d", frac, c.channel.support_size)
        _collect(result, "sparsity", float(frac), c, run_cell(c, cell))
    return result


def _fmt(x: float) -> str:
    return repr(float(x))


def format_csv(result: SweepResult, timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in result.rows:
        w.writerow([r.sweep, _fmt(r.value), r.estimator, format_bits(r.bits), r.trials,
                    _fmt(r.nmse), _fmt(r.nmse_db), _fmt(r.wall_ms) if timing else "0.0"])
    return buf.getvalue()


def emit_csv(result: SweepResult, path, timing: bool = True) -> None:
    """Write ``result`` as UTF-8 CSV with LF endings.

    Wall-clock times are inherently run-dependent; ``timing=False`` writes
    them as 0.0 so that the file is a pure function of (config, seed).
    """
    Path(path).write_bytes(format_csv(result, timing).encode("utf-8"))


def read_csv(path) -> SweepResult:
    result = SweepResult()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for d in reader:
            result.rows.append(SweepRow(d["sweep"], float(d["value"]), d["estimator"],
                                        parse_bits(d["bits"]), int(d["trials"]), float(d["nmse"]),
                                        float(d["nmse_db"]), float(d["wall_ms"])))
    return result
