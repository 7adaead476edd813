"""Deterministic, trial-parallel Monte-Carlo driver.

Trial ``t`` owns the seed stream ``(root_seed, 0, t)``: user ``k``'s channel
comes from child ``(0, k)`` and its RVQ codebook for ``B`` bits from child
``(1, B, k)``. Every scheme, SNR and user count therefore sees the same
channels (common random numbers), and a trial's draws never depend on which
worker runs it. Trials are processed in fixed blocks of ``BLOCK_TRIALS``
consecutive indices and the per-trial results are reduced in trial order,
so the output is bit-identical for any worker count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import precoders as pc
from ..channel import gen_channel
from ..errors import ConfigError
from ..evaluate import RateRecord, bound_high, bound_low, sum_rate
from ..numerics import SeedStream
from ..quantize import distortion_closed, distortion_empirical, gen_rvq, quantize
from ..statistics import gap_vs_empirical
from .config import ExperimentConfig

log = logging.getLogger(__name__)

__all__ = [
    "BLOCK_TRIALS",
    "SETTLE_TOL",
    "TrialBatch",
    "GapRecord",
    "ConvergenceRecord",
    "draw_trials",
    "precode",
    "resolve_gamma",
    "run_experiment",
    "run_gap",
    "run_convergence",
    "run",
]

BLOCK_TRIALS = 50
NOISE_VAR = 1.0
# precoder change below which a convergence trace counts a trial as settled
SETTLE_TOL = 1e-3

_GAMMA_CACHE: dict = {}


@dataclass(frozen=True)
class GapRecord:
    M: int
    N: int
    K: int
    B: int
    trials: int
    gap: float
    seed: int


@dataclass(frozen=True)
class ConvergenceRecord:
    """Mean sum rate of one scheme after ``iteration`` passes (0 is the initial precoder)."""

    scheme: str
    snr_db: float
    B: int
    M: int
    N: int
    K: int
    trials: int
    iteration: int
    sum_rate_mean: float
    sum_rate_stderr: float
    mean_change: float
    frac_settled: float
    seed: int


@dataclass
class TrialBatch:
    """True channels ``H`` and per-``B`` quantized subspaces of a block of trials, ``(T, K, M, N)``."""

    H: np.ndarray
    Hsub: np.ndarray
    Hq: dict


def draw_trials(M: int, N: int, K: int, B_list, start: int, stop: int, root_seed: int,
                perfect: bool = False) -> TrialBatch:
    """Draw trials ``start..stop-1``; with ``perfect`` the codewords are the true subspaces."""
    H, Hsub = [], []
    Hq = {B: [] for B in B_list}
    for t in range(start, stop):
        ts = SeedStream(root_seed, 0, (t,))
        chans = [gen_channel(M, N, ts.child(0).child(k)) for k in range(K)]
        H.append([c.H for c in chans])
        Hsub.append([c.Hsub for c in chans])
        if perfect:
            continue
        for B in B_list:
            Hq[B].append([quantize(c.Hsub, gen_rvq(M, N, B, ts.child(1).child(B).child(k))).Hq
                          for k, c in enumerate(chans)])
    H, Hsub = np.array(H), np.array(Hsub)
    Hq = {B: Hsub if perfect else np.array(v) for B, v in Hq.items()}
    return TrialBatch(H=H, Hsub=Hsub, Hq=Hq)


def precode(scheme: str, Hq: np.ndarray, gamma: float, rho: float, cfg: ExperimentConfig,
            **kwargs) -> pc.PrecoderOutput:
    """Run one scheme on quantized subspaces ``Hq``; nonrobust schemes see ``sqrt(M) Hq``."""
    M = Hq.shape[-2]
    K = Hq.shape[-3]
    mu = None if cfg.weights is None else np.asarray(cfg.weights[:K])
    iterative = dict(mu=mu, max_iter=cfg.max_iter, tol_rel=cfg.tol, **kwargs)
    if scheme == "mrt":
        return pc.mrt(Hq, rho)
    if scheme == "bd":
        return pc.bd(Hq, rho)
    if scheme == "mmse":
        return pc.mmse(math.sqrt(M) * Hq, rho, NOISE_VAR)
    if scheme == "rmmse":
        return pc.rmmse(Hq, gamma, rho, NOISE_VAR, clamp=cfg.clamp_gamma)
    if scheme == "wmmse":
        return pc.wmmse_iterate(math.sqrt(M) * Hq, 1.0, 0.0, rho, NOISE_VAR, **iterative)
    if scheme == "rwmmse":
        return pc.robust_wmmse(Hq, gamma, rho, NOISE_VAR, clamp=cfg.clamp_gamma, **iterative)
    raise ConfigError(f"unknown scheme {scheme!r}")


def resolve_gamma(cfg: ExperimentConfig, K: int, B: int) -> float:
    """Per-column distortion fed to the robust schemes for one (K, B) cell.

    The closed form uses the Grassmannian dimension ``N (M - N)``, i.e. it is
    evaluated at ``K = M / N`` users; this equals the usual expression when
    ``M = N K`` and stays meaningful in the overloaded sweep, where the
    codebook does not depend on ``K``.
    """
    M, N = cfg.M, cfg.N
    if cfg.csi_mode == "perfect":
        return 0.0
    if not isinstance(cfg.gamma_mode, str):
        return float(cfg.gamma_mode)
    if cfg.gamma_mode == "closed_form":
        return distortion_closed(M, N, max(M // N, 2), B)[1]
    key = (M, N, B, cfg.gamma_trials, cfg.root_seed)
    if key not in _GAMMA_CACHE:
        xi, _ = distortion_empirical(M, N, 1, B, cfg.gamma_trials, SeedStream(cfg.root_seed, 1, (M, N, B)))
        _GAMMA_CACHE[key] = xi / N
    return _GAMMA_CACHE[key]


def _blocks(trials: int):
    return [(s, min(s + BLOCK_TRIALS, trials)) for s in range(0, trials, BLOCK_TRIALS)]


def _map_blocks(fn, cfg: ExperimentConfig, args):
    jobs = [(cfg, *a) for a in args]
    if cfg.workers == 1 or len(jobs) == 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _rate_block(cfg: ExperimentConfig, gammas: dict, start: int, stop: int) -> dict:
    out = {}
    Kmax = max(cfg.user_counts)
    batch = draw_trials(cfg.M, cfg.N, Kmax, cfg.B, start, stop, cfg.root_seed, cfg.csi_mode == "perfect")
    for K in cfg.user_counts:
        H = batch.H[:, :K]
        for B in cfg.B:
            Hq = batch.Hq[B][:, :K]
            for snr in cfg.snr_db:
                rho = 10.0 ** (snr / 10.0)
                for scheme in cfg.schemes:
                    P = precode(scheme, Hq, gammas[K, B], rho, cfg)
                    out[scheme, snr, B, K] = sum_rate(H, P, NOISE_VAR)
    return out


def _mean_stderr(x: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return mean, se


def run_experiment(cfg: ExperimentConfig) -> list[RateRecord]:
    """Average sum rates over ``cfg.trials`` draws for every (K, B, SNR, scheme) cell.

    Infeasible configurations raise :class:`ConfigError` before any
    sampling. With ``cfg.bounds`` the rate approximations are appended as
    ``bound_low`` / ``bound_high`` rows (sum over users, ``trials = 0``).
    """
    cfg.validate()
    if cfg.kind != "rate":
        raise ConfigError(f"run_experiment handles rate sweeps, got kind={cfg.kind!r}")
    gammas = {(K, B): resolve_gamma(cfg, K, B) for K in cfg.user_counts for B in cfg.B}
    parts = _map_blocks(_rate_block, cfg, [(gammas, a, b) for a, b in _blocks(cfg.trials)])
    records = []
    for K in cfg.user_counts:
        for B in cfg.B:
            for snr in cfg.snr_db:
                for scheme in cfg.schemes:
                    rates = np.concatenate([p[scheme, snr, B, K] for p in parts])
                    mean, se = _mean_stderr(rates)
                    records.append(RateRecord(scheme, snr, B, cfg.M, cfg.N, K, cfg.trials, mean, se,
                                              cfg.root_seed))
                if cfg.bounds:
                    rho = 10.0 ** (snr / 10.0)
                    g = gammas[K, B]
                    for name, fn in (("bound_low", bound_low), ("bound_high", bound_high)):
                        records.append(RateRecord(name, snr, B, cfg.M, cfg.N, K, 0, K * fn(rho, K, cfg.N, g),
                                                  0.0, cfg.root_seed))
    return records


def run_gap(cfg: ExperimentConfig) -> list[GapRecord]:
    """Normalized second-order gap for every (M, B) cell of a gap study (``K = M / N``)."""
    cfg.validate()
    records = []
    for M in cfg.M_sweep or [cfg.M]:
        for B in cfg.B:
            gap = gap_vs_empirical(M, cfg.N, M // cfg.N, B, cfg.trials, SeedStream(cfg.root_seed, 2, (M, B)))
            records.append(GapRecord(M, cfg.N, M // cfg.N, B, cfg.trials, gap, cfg.root_seed))
    return records


def _convergence_block(cfg: ExperimentConfig, gammas: dict, start: int, stop: int) -> dict:
    batch = draw_trials(cfg.M, cfg.N, cfg.K, cfg.B, start, stop, cfg.root_seed, cfg.csi_mode == "perfect")
    out = {}
    for B in cfg.B:
        Hq = batch.Hq[B]
        for snr in cfg.snr_db:
            rho = 10.0 ** (snr / 10.0)
            for scheme in cfg.schemes:
                if scheme not in ("wmmse", "rwmmse"):
                    r = sum_rate(batch.H, precode(scheme, Hq, gammas[B], rho, cfg), NOISE_VAR)
                    out[scheme, snr, B] = (np.repeat(r[None], cfg.max_iter + 1, axis=0), None)
                    continue
                rates = np.zeros((cfg.max_iter + 1, stop - start))
                rates[0] = sum_rate(batch.H, pc.mrt(Hq, rho), NOISE_VAR)

                def record(it, P, rates=rates):
                    rates[it] = sum_rate(batch.H, P, NOISE_VAR, K=cfg.K)

                res = precode(scheme, Hq, gammas[B], rho, cfg, callback=record)
                changes = np.zeros((cfg.max_iter + 1, stop - start))
                for h in res.history:
                    changes[h["iteration"]] = h["change"]
                done = len(res.history)
                rates[done + 1:] = rates[done]
                out[scheme, snr, B] = (rates, changes)
    return out


def run_convergence(cfg: ExperimentConfig) -> list[ConvergenceRecord]:
    """Per-iteration mean sum rate of the iterative schemes (others repeat their constant rate).

    ``mean_change`` is the mean relative precoder change of that pass and
    ``frac_settled`` the fraction of trials whose change has dropped below
    ``SETTLE_TOL`` at or before it. Run with ``tol = 0`` to trace every pass.
    """
    cfg.validate()
    gammas = {B: resolve_gamma(cfg, cfg.K, B) for B in cfg.B}
    parts = _map_blocks(_convergence_block, cfg, [(gammas, a, b) for a, b in _blocks(cfg.trials)])
    records = []
    for B in cfg.B:
        for snr in cfg.snr_db:
            for scheme in cfg.schemes:
                rates = np.concatenate([p[scheme, snr, B][0] for p in parts], axis=1)
                if parts[0][scheme, snr, B][1] is None:
                    changes = np.zeros_like(rates)
                    settled = np.ones_like(rates, dtype=bool)
                else:
                    changes = np.concatenate([p[scheme, snr, B][1] for p in parts], axis=1)
                    below = (changes < SETTLE_TOL) & (np.arange(rates.shape[0]) > 0)[:, None]
                    settled = np.logical_or.accumulate(below, axis=0)
                for it in range(rates.shape[0]):
                    mean, se = _mean_stderr(rates[it])
                    records.append(ConvergenceRecord(scheme, snr, B, cfg.M, cfg.N, cfg.K, cfg.trials, it, mean, se,
                                                     float(changes[it].mean()), float(settled[it].mean()),
                                                     cfg.root_seed))
    return records


def run(cfg: ExperimentConfig) -> list:
    """Dispatch on ``cfg.kind``."""
    cfg.validate()
    return {"rate": run_experiment, "gap": run_gap, "convergence": run_convergence}[cfg.kind](cfg)
