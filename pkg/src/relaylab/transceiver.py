"""Joint MMSE relay/destination transceiver design.

The relay matrix factors as ``Q = B L``: a Wiener receiver ``L`` for the
first hop followed by a precoder ``B`` for the second. The optimal
precoder aligns the top eigenvectors of the receiver-output covariance
``R_y`` with those of ``G^H G`` and water-fills power across the paired
eigenmodes under the relay power budget. The resulting error covariance
splits into independent first-hop and second-hop terms; an algebraically
independent direct formula is kept alongside as a cross-check and for
evaluating arbitrary (non-optimal) relay matrices.

Everything here works for any antenna configuration, including more
source antennas than relay or destination antennas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, SystemConfig
from .numerics import (
    ContractViolation,
    eig_hermitian_desc,
    solve_hermitian_psd,
)

__all__ = [
    "RankDeficiencyError",
    "TransceiverDesign",
    "ErrorCovariance",
    "relay_receiver",
    "signal_covariance",
    "ry_identity_gap",
    "waterfill_phi",
    "build_design",
    "destination_receiver",
    "destination_receiver_second_hop",
    "error_cov_decomposed",
    "error_cov_direct",
    "relay_power",
    "second_hop_mse_trace",
]

# Tolerances fixed by the module contracts.
WATERFILL_POWER_RTOL = 1e-10
WATERFILL_MAX_ITER = 200
RANK_DEFICIENCY_RTOL = 1e-14


class RankDeficiencyError(RuntimeError):
    """Top-M eigenvalues of R_y were numerically singular."""


@dataclass(frozen=True)
class TransceiverDesign:
    """All designed matrices and eigen-data for one channel realization."""

    l: np.ndarray          # n_s x n_r relay Wiener receiver
    r_y: np.ndarray        # n_s x n_s receiver-output covariance
    u_y_tilde: np.ndarray  # n_s x M, top-M eigenvectors of r_y
    lambda_y: np.ndarray   # M, descending, in (0, rho)
    v_g_tilde: np.ndarray  # n_r x M, top-M eigenvectors of G^H G
    lambda_g: np.ndarray   # M, descending, exact zeros beyond rank of G
    phi: np.ndarray        # M, nonnegative water-filling magnitudes
    nu: float              # water level; +inf when the second hop is dead
    b: np.ndarray          # n_r x n_s precoder, v_g_tilde @ diag(phi) @ u_y_tilde^H
    q: np.ndarray          # n_r x n_r relay matrix, b @ l
    w: np.ndarray          # n_s x n_d destination MMSE receiver


@dataclass(frozen=True)
class ErrorCovariance:
    """MMSE error covariance with per-stream MSE and SINR."""

    r_e: np.ndarray             # n_s x n_s Hermitian, 0 < r_e <= rho*I
    per_stream_mse: np.ndarray  # real diagonal of r_e
    gamma: np.ndarray           # per-stream SINR, rho/mse - 1


def relay_receiver(h: np.ndarray, rho: float) -> np.ndarray:
    """First-hop Wiener receiver ``rho H^H (rho H H^H + I)^-1``."""
    h = np.asarray(h, dtype=np.complex128)
    n_r = h.shape[0]
    a = rho * (h @ h.conj().T) + np.eye(n_r)
    return rho * solve_hermitian_psd(a, h).conj().T


def signal_covariance(h: np.ndarray, rho: float) -> np.ndarray:
    """Covariance of the relay receiver output, ``L (rho H H^H + I) L^H``."""
    h = np.asarray(h, dtype=np.complex128)
    n_r = h.shape[0]
    a = rho * (h @ h.conj().T) + np.eye(n_r)
    l = rho * solve_hermitian_psd(a, h).conj().T
    r_y = l @ a @ l.conj().T
    return 0.5 * (r_y + r_y.conj().T)


def _ry_complement_form(h: np.ndarray, rho: float) -> np.ndarray:
    # Equivalent resolvent expression rho*I - (H^H H + I/rho)^-1.
    n_s = h.shape[1]
    inner = h.conj().T @ h + np.eye(n_s) / rho
    return rho * np.eye(n_s) - solve_hermitian_psd(inner, np.eye(n_s))


def ry_identity_gap(h: np.ndarray, rho: float) -> float:
    """Relative Frobenius gap between the two forms of R_y (should be ~0)."""
    direct = signal_covariance(h, rho)
    alt = _ry_complement_form(h, rho)
    ref = max(float(np.linalg.norm(direct)), 1e-300)
    return float(np.linalg.norm(direct - alt)) / ref


def _waterfill_power(nu: float, lambda_g: np.ndarray, products: np.ndarray) -> float:
    # Total relay power spent at water level nu: sum_k lambda_y_k |phi_k|^2.
    active = products > 0
    if not np.any(active):
        return 0.0
    gain = np.sqrt(products[active] / nu) - 1.0
    return float(np.sum(np.maximum(gain, 0.0) / lambda_g[active]))


def waterfill_phi(lambda_y: np.ndarray, lambda_g: np.ndarray, p_r: float) -> tuple[np.ndarray, float]:
    """Water-fill relay power across paired eigenmodes.

    Returns the nonnegative diagonal magnitudes ``phi`` and the water
    level ``nu``. Modes with a dead second hop get exactly zero power;
    when every mode is dead, ``phi = 0`` and ``nu = +inf``. Otherwise the
    budget binds: ``sum_k lambda_y[k] * phi[k]**2 == p_r`` within 1e-8
    relative.

    The water level is found by bisection on ``log nu``, which is safe
    because total spent power is continuous and strictly decreasing in
    ``nu`` wherever positive.
    """
    lambda_y = np.asarray(lambda_y, dtype=np.float64)
    lambda_g = np.asarray(lambda_g, dtype=np.float64)
    if lambda_y.shape != lambda_g.shape or lambda_y.ndim != 1:
        raise ContractViolation(
            f"eigenvalue vectors must share one length, got {lambda_y.shape} and {lambda_g.shape}"
        )
    if np.any(lambda_y < 0) or np.any(lambda_g < 0):
        raise ContractViolation("eigenvalues must be nonnegative")
    for name, vec in (("lambda_y", lambda_y), ("lambda_g", lambda_g)):
        if np.any(np.diff(vec) > 1e-12 * (1.0 + vec[:-1])):
            raise ContractViolation(f"{name} must be sorted descending")
    if p_r <= 0:
        raise ContractViolation(f"relay power budget must be positive, got {p_r}")

    products = lambda_y * lambda_g
    phi = np.zeros_like(lambda_y)
    if not np.any(products > 0):
        return phi, math.inf

    nu_hi = float(products.max())
    nu_lo = nu_hi
    while _waterfill_power(nu_lo, lambda_g, products) < p_r:
        nu_lo *= 0.25
    nu = nu_lo
    for _ in range(WATERFILL_MAX_ITER):
        nu = math.sqrt(nu_lo * nu_hi)
        spent = _waterfill_power(nu, lambda_g, products)
        if abs(spent - p_r) <= WATERFILL_POWER_RTOL * p_r:
            break
        if spent >= p_r:
            nu_lo = nu
        else:
            nu_hi = nu

    active = products > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        squared = np.where(
            active,
            np.maximum(np.sqrt(products / nu) - 1.0, 0.0) / np.where(active, products, 1.0),
            0.0,
        )
    phi = np.sqrt(squared)
    return phi, nu


def _top_m_psd_eigs(matrix: np.ndarray, m: int, rank_limit: int) -> tuple[np.ndarray, np.ndarray]:
    # Top-m eigenpairs of a PSD Gram matrix; eigenvalues beyond the
    # structural rank are exactly zero by construction, so pin them there.
    eig = eig_hermitian_desc(matrix)
    values = eig.values[:m].copy()
    if rank_limit < m:
        values[rank_limit:] = 0.0
    return values, eig.vectors[:, :m]


def destination_receiver(h: np.ndarray, g: np.ndarray, q: np.ndarray, rho: float) -> np.ndarray:
    """MMSE receiver at the destination for relay matrix ``q``.

    ``rho (GQH)^H (rho GQH (GQH)^H + GQ (GQ)^H + I)^-1``; valid for any
    ``q``, not only the optimal one.
    """
    f = g @ q
    t = f @ h
    n_d = g.shape[0]
    s = rho * (t @ t.conj().T) + f @ f.conj().T + np.eye(n_d)
    s = 0.5 * (s + s.conj().T)
    return rho * solve_hermitian_psd(s, t).conj().T


def destination_receiver_second_hop(r_y: np.ndarray, b: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Equivalent receiver form ``R_y B^H G^H (G B R_y B^H G^H + I)^-1``."""
    gb = g @ b
    n_d = g.shape[0]
    s = gb @ r_y @ gb.conj().T + np.eye(n_d)
    s = 0.5 * (s + s.conj().T)
    return solve_hermitian_psd(s, gb @ r_y).conj().T


def build_design(config: SystemConfig, chan: ChannelRealization) -> TransceiverDesign:
    """Run the full design pipeline for one channel realization.

    Steps: relay Wiener receiver, receiver-output covariance and its
    top-M eigenbasis, second-hop Gram eigenbasis, water-filling, then the
    composed relay matrix and destination receiver. Handles every antenna
    configuration; a dead hop (``h = 0`` or ``g = 0``) degrades gracefully
    to ``q = 0``, ``w = 0``.
    """
    h, g = chan.h, chan.g
    rho, p_r = config.rho, config.p_r
    n_s, n_r, n_d = config.n_s, config.n_r, config.n_d
    m = config.m_dim
    if h.shape != (n_r, n_s) or g.shape != (n_d, n_r):
        raise ContractViolation(
            f"channel shapes {h.shape}/{g.shape} do not match config {config.shape_label}"
        )

    l = relay_receiver(h, rho)
    a = rho * (h @ h.conj().T) + np.eye(n_r)
    r_y = l @ a @ l.conj().T
    r_y = 0.5 * (r_y + r_y.conj().T)

    lambda_y, u_y_tilde = _top_m_psd_eigs(r_y, m, rank_limit=m)
    lambda_g, v_g_tilde = _top_m_psd_eigs(g.conj().T @ g, m, rank_limit=min(n_r, n_d))

    if lambda_y[0] <= 0.0:
        # Dead first hop: nothing to forward.
        phi = np.zeros(m)
        nu = math.inf
        b = np.zeros((n_r, n_s), dtype=np.complex128)
    else:
        phi, nu = waterfill_phi(lambda_y, lambda_g, p_r)
        b = (v_g_tilde * phi) @ u_y_tilde.conj().T
    q = b @ l
    w = destination_receiver(h, g, q, rho)
    return TransceiverDesign(
        l=l, r_y=r_y, u_y_tilde=u_y_tilde, lambda_y=lambda_y,
        v_g_tilde=v_g_tilde, lambda_g=lambda_g, phi=phi, nu=nu, b=b, q=q, w=w,
    )


def _error_cov_from_re(r_e: np.ndarray, rho: float) -> ErrorCovariance:
    r_e = 0.5 * (r_e + r_e.conj().T)
    mse = np.real(np.diag(r_e)).copy()
    gamma = rho / mse - 1.0
    return ErrorCovariance(r_e=r_e, per_stream_mse=mse, gamma=gamma)


def error_cov_decomposed(
    config: SystemConfig,
    chan: ChannelRealization,
    design: TransceiverDesign,
    relay_precoder: np.ndarray | None = None,
) -> ErrorCovariance:
    """Error covariance as a sum of first-hop and second-hop terms.

    Valid for any precoder acting through the top-M eigenbasis of R_y
    (``relay_precoder`` overrides ``design.b`` for such experiments); with
    the water-filled precoder the second term reduces to the diagonal
    form used by the rate bound.

    Raises
    ------
    RankDeficiencyError
        If the top-M eigenvalues of R_y are numerically singular, which
        has probability zero for random channels.
    """
    h = chan.h
    rho = config.rho
    n_s = config.n_s
    b = design.b if relay_precoder is None else relay_precoder
    u = design.u_y_tilde
    lambda_y = design.lambda_y
    if lambda_y[-1] <= RANK_DEFICIENCY_RTOL * max(lambda_y[0], 0.0) or lambda_y[0] <= 0.0:
        raise RankDeficiencyError(
            f"top-{lambda_y.size} eigenvalues of R_y are numerically singular: "
            f"smallest {lambda_y[-1]:.3e} vs largest {lambda_y[0]:.3e}"
        )

    first = solve_hermitian_psd(h.conj().T @ h + np.eye(n_s) / rho, np.eye(n_s))
    gb_u = chan.g @ b @ u
    inner = gb_u.conj().T @ gb_u + np.diag(1.0 / lambda_y)
    inner = 0.5 * (inner + inner.conj().T)
    second = u @ solve_hermitian_psd(inner, np.eye(lambda_y.size)) @ u.conj().T
    return _error_cov_from_re(first + second, rho)


def error_cov_direct(config: SystemConfig, chan: ChannelRealization, q: np.ndarray) -> ErrorCovariance:
    """Error covariance of the end-to-end MMSE estimate for any relay ``q``.

    With ``T = G Q H`` and forwarded-noise covariance ``C = G Q Q^H G^H + I``,
    this is ``rho I - rho^2 T^H (rho T T^H + C)^-1 T``. Serves as the
    independent oracle for the decomposition and for non-MMSE baselines.
    """
    h, g = chan.h, chan.g
    rho = config.rho
    n_s, n_d = config.n_s, config.n_d
    f = g @ q
    t = f @ h
    s = rho * (t @ t.conj().T) + f @ f.conj().T + np.eye(n_d)
    s = 0.5 * (s + s.conj().T)
    r_e = rho * np.eye(n_s) - rho**2 * t.conj().T @ solve_hermitian_psd(s, t)
    return _error_cov_from_re(r_e, rho)


def relay_power(h: np.ndarray, q: np.ndarray, rho: float) -> float:
    """Transmit power spent by the relay, ``Tr(Q (rho H H^H + I) Q^H)``."""
    a = rho * (h @ h.conj().T) + np.eye(h.shape[0])
    return float(np.real(np.trace(q @ a @ q.conj().T)))


def second_hop_mse_trace(lambda_y: np.ndarray, lambda_g: np.ndarray, phi: np.ndarray) -> float:
    """Second-hop MSE contribution for a diagonal precoder magnitude vector."""
    return float(np.sum(1.0 / (phi**2 * lambda_g + 1.0 / lambda_y)))
