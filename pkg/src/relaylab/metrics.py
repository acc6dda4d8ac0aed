"""Mutual information, its eigenvalue lower bound, and outage indicators.

The system rate is ``(1/2) sum_k log2(1 + gamma_k)`` bits per channel use
(the 1/2 pays for the two relaying phases). Jensen's inequality plus the
structure of the optimal precoder bound the rate from below by a function
of the two hops' Gram eigenvalues only, which yields a cheap outage
indicator that upper-bounds the true outage event: whenever the exact
rate is in outage, so is the bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, SystemConfig
from .numerics import ContractViolation, eig_hermitian_desc
from .transceiver import (
    RankDeficiencyError,
    build_design,
    error_cov_decomposed,
    error_cov_direct,
)

__all__ = [
    "MiReport",
    "GAMMA_CLIP",
    "mutual_info_joint",
    "mi_lower_bound",
    "outage_bound_statistic",
    "outage_threshold",
    "outage_separate",
    "channel_eigenvalues",
    "mi_from_mse_trace",
    "evaluate_realization",
]

GAMMA_CLIP = 1e-9


@dataclass(frozen=True)
class MiReport:
    """Per-realization rate and outage summary."""

    mi_exact: float        # bpcu, from the designed transceiver
    mi_lower_bound: float  # bpcu, eigenvalue bound clipped at 0
    bound_statistic: float
    m_threshold: float
    outage_exact: bool
    outage_bound: bool
    outage_separate: bool


def _clip_gamma(gamma: np.ndarray) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=np.float64)
    if np.any(gamma < -GAMMA_CLIP):
        raise ContractViolation(f"negative SINR beyond round-off: min {gamma.min():.3e}")
    return np.maximum(gamma, 0.0)


def mutual_info_joint(gamma: np.ndarray, bits: bool = True) -> float:
    """Rate of jointly-encoded streams, ``(1/2) sum_k log(1 + gamma_k)``.

    Bits per channel use by default, nats with ``bits=False``. Tiny
    negative SINRs from round-off are clipped to zero.
    """
    total = float(np.sum(np.log1p(_clip_gamma(gamma))))
    return 0.5 * total / math.log(2.0) if bits else 0.5 * total


def mi_from_mse_trace(trace_re: float, rho: float, n_s: int) -> float:
    """Jensen bound on the rate from the total MSE, in bpcu."""
    return -0.5 * n_s * math.log2(trace_re / (rho * n_s))


def mi_lower_bound(lambda_h: np.ndarray, lambda_g: np.ndarray, rho: float, n_s: int) -> float:
    """Eigenvalue-only lower bound on the rate, in bpcu.

    ``lambda_h`` holds all ``n_s`` eigenvalues of H^H H (zero-padded
    beyond its rank); ``lambda_g`` the top-M eigenvalues of G^H G. The
    receiver-output eigenvalues enter through the exact identity
    ``rho / lambda_y_k = 1 + 1/(rho lambda_h_k)``, so they are derived
    rather than passed. May return a slightly negative value as the SNR
    vanishes; reporting layers clip at zero.
    """
    lambda_h = np.asarray(lambda_h, dtype=np.float64)
    lambda_g = np.asarray(lambda_g, dtype=np.float64)
    if lambda_h.shape[0] != n_s:
        raise ContractViolation(f"lambda_h must have n_s={n_s} entries, got {lambda_h.shape[0]}")
    if lambda_g.shape[0] > n_s:
        raise ContractViolation("lambda_g cannot have more entries than n_s")
    m = lambda_g.shape[0]
    with np.errstate(divide="ignore"):
        first = np.sum(1.0 / (1.0 + rho * lambda_h))
        rho_over_lambda_y = 1.0 + 1.0 / (rho * lambda_h[:m])
        second = np.sum(1.0 / (rho * lambda_g + rho_over_lambda_y))
    return -0.5 * n_s * math.log2((first + second) / n_s)


def outage_threshold(n_s: int, m_dim: int, rate_bpcu: float) -> float:
    """Threshold the bound statistic is compared against."""
    return n_s * 2.0 ** (-2.0 * rate_bpcu / n_s) - (n_s - m_dim)


def outage_bound_statistic(
    lambda_h: np.ndarray,
    lambda_g: np.ndarray,
    rho: float,
    n_s: int,
    rate_bpcu: float,
) -> tuple[float, float]:
    """Outage-bound statistic and its threshold ``m``.

    Both inputs are the top-M Gram eigenvalues of their hop, descending.
    The bound declares outage when ``statistic >= m``; this event contains
    the exact outage event on every realization.
    """
    lambda_h = np.asarray(lambda_h, dtype=np.float64)
    lambda_g = np.asarray(lambda_g, dtype=np.float64)
    if lambda_h.shape != lambda_g.shape:
        raise ContractViolation("eigenvalue vectors must have equal length M")
    with np.errstate(divide="ignore"):
        rho_over_lambda_y = 1.0 + 1.0 / (rho * lambda_h)
        statistic = float(
            np.sum(1.0 / (1.0 + rho * lambda_h))
            + np.sum(1.0 / (rho * lambda_g + rho_over_lambda_y))
        )
    return statistic, outage_threshold(n_s, lambda_h.shape[0], rate_bpcu)


def outage_separate(gamma: np.ndarray, rate_bpcu: float, n_s: int) -> bool:
    """Outage rule for per-antenna independent codewords at rate R/n_s.

    A stream rate exactly equal to its share counts as delivered. This
    baseline models separately-encoded antennas; its diversity does not
    improve as the rate drops.
    """
    gamma = _clip_gamma(gamma)
    per_stream = 0.5 * np.log2(1.0 + gamma)
    return bool(np.min(per_stream) < rate_bpcu / n_s)


def channel_eigenvalues(config: SystemConfig, chan: ChannelRealization) -> tuple[np.ndarray, np.ndarray]:
    """Gram eigenvalues of both hops with structural zeros pinned.

    Returns ``(lambda_h, lambda_g)``: all ``n_s`` eigenvalues of H^H H
    (exact zeros beyond rank min(n_s, n_r)) and the top-M eigenvalues of
    G^H G (exact zeros beyond rank min(n_r, n_d)).
    """
    lambda_h = eig_hermitian_desc(chan.h.conj().T @ chan.h).values
    rank_h = min(config.n_s, config.n_r)
    lambda_h[rank_h:] = 0.0
    lambda_g = eig_hermitian_desc(chan.g.conj().T @ chan.g).values[: config.m_dim].copy()
    rank_g = min(config.n_r, config.n_d)
    if rank_g < config.m_dim:
        lambda_g[rank_g:] = 0.0
    return lambda_h, lambda_g


def evaluate_realization(config: SystemConfig, chan: ChannelRealization) -> MiReport:
    """Design the transceiver for one draw and report rate and outage."""
    design = build_design(config, chan)
    try:
        cov = error_cov_decomposed(config, chan, design)
    except RankDeficiencyError:
        # Dead first hop (measure zero): the direct oracle still applies.
        cov = error_cov_direct(config, chan, design.q)
    mi = mutual_info_joint(cov.gamma)
    lambda_h, lambda_g = channel_eigenvalues(config, chan)
    lower = mi_lower_bound(lambda_h, lambda_g, config.rho, config.n_s)
    statistic, m = outage_bound_statistic(
        lambda_h[: config.m_dim], lambda_g, config.rho, config.n_s, config.rate_bpcu
    )
    return MiReport(
        mi_exact=mi,
        mi_lower_bound=max(lower, 0.0),
        bound_statistic=statistic,
        m_threshold=m,
        outage_exact=mi <= config.rate_bpcu,
        outage_bound=statistic >= m,
        outage_separate=outage_separate(cov.gamma, config.rate_bpcu, config.n_s),
    )
