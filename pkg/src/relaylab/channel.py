"""System configuration and quasi-static Rayleigh channel draws.

The link is a two-hop relay chain: ``n_s`` source antennas into ``n_r``
relay antennas (matrix ``h``), then ``n_r`` into ``n_d`` destination
antennas (matrix ``g``). Entries are i.i.d. CN(0,1) and stay fixed for
one codeword (= one Monte Carlo trial). Noise covariance is pinned to
the identity at both receivers; all closed forms downstream assume it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .numerics import ContractViolation, SeedSpec, sample_complex_gaussian_batch

__all__ = [
    "SystemConfig",
    "ChannelRealization",
    "default_power_coupling",
    "sample_realization",
    "sample_realization_batch",
    "config_at_snr",
]

# Counter lanes reserved for the two hops of one trial.
_LANE_H = 0
_LANE_G = 1


def default_power_coupling(n_s: int, rho: float) -> float:
    """Default relay power budget: the total source transmit power.

    Per-antenna SNR ``rho`` times ``n_s`` source antennas. (The source
    antenna count is the reference here; the budget can be overridden
    independently on :class:`SystemConfig` for asymmetric experiments.)
    """
    if rho <= 0:
        raise ContractViolation(f"rho must be positive, got {rho}")
    return rho * n_s


@dataclass(frozen=True)
class SystemConfig:
    """Static experiment parameters.

    ``rho`` is the per-antenna source SNR on a linear scale; ``p_r`` the
    relay power budget (defaults to ``rho * n_s``); ``rate_bpcu`` the
    target rate in bits per channel use.
    """

    n_s: int
    n_r: int
    n_d: int
    rho: float = 1.0
    p_r: float | None = None
    rate_bpcu: float = 0.0

    def __post_init__(self):
        for name in ("n_s", "n_r", "n_d"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ContractViolation(f"{name} must be a positive integer, got {v!r}")
        if self.rho <= 0:
            raise ContractViolation(f"rho must be positive, got {self.rho}")
        if self.p_r is None:
            object.__setattr__(self, "p_r", default_power_coupling(self.n_s, self.rho))
        if self.p_r <= 0:
            raise ContractViolation(f"p_r must be positive, got {self.p_r}")
        if self.rate_bpcu < 0:
            raise ContractViolation(f"rate_bpcu must be nonnegative, got {self.rate_bpcu}")

    @property
    def m_dim(self) -> int:
        """Number of usable relay streams, min(n_s, n_r)."""
        return min(self.n_s, self.n_r)

    @property
    def shape_label(self) -> str:
        return f"{self.n_s}x{self.n_r}x{self.n_d}"


def config_at_snr(config: SystemConfig, snr_db: float, couple_relay_power: bool = True) -> SystemConfig:
    """Copy of ``config`` at per-antenna SNR ``snr_db`` (dB)."""
    rho = 10.0 ** (snr_db / 10.0)
    p_r = default_power_coupling(config.n_s, rho) if couple_relay_power else config.p_r
    return replace(config, rho=rho, p_r=p_r)


@dataclass(frozen=True)
class ChannelRealization:
    """One joint draw of the two hop matrices."""

    h: np.ndarray  # n_r x n_s, source -> relay
    g: np.ndarray  # n_d x n_r, relay -> destination

    def __post_init__(self):
        if self.h.ndim != 2 or self.g.ndim != 2 or self.g.shape[1] != self.h.shape[0]:
            raise ContractViolation(
                f"incompatible hop shapes h{self.h.shape}, g{self.g.shape}"
            )


def sample_realization(config: SystemConfig, seed: SeedSpec) -> ChannelRealization:
    """Draw one quasi-static realization; pure in (config, seed).

    The two hops come from disjoint counter lanes of the same stream, so
    ``h`` and ``g`` are mutually independent.
    """
    streams = np.array([seed.stream_index], dtype=np.uint64)
    h = sample_complex_gaussian_batch(config.n_r, config.n_s, seed.master_seed, streams, _LANE_H)[0]
    g = sample_complex_gaussian_batch(config.n_d, config.n_r, seed.master_seed, streams, _LANE_G)[0]
    return ChannelRealization(h=h, g=g)


def sample_realization_batch(
    config: SystemConfig, master_seed: int, stream_indices: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Stacked draws for many trials at once.

    Returns ``(h, g)`` with shapes (n, n_r, n_s) and (n, n_d, n_r); slice
    ``i`` equals ``sample_realization(config, SeedSpec(master_seed,
    stream_indices[i]))``.
    """
    streams = np.asarray(stream_indices, dtype=np.uint64)
    h = sample_complex_gaussian_batch(config.n_r, config.n_s, master_seed, streams, _LANE_H)
    g = sample_complex_gaussian_batch(config.n_d, config.n_r, master_seed, streams, _LANE_G)
    return h, g
