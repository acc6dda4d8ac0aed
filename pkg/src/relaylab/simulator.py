"""Monte Carlo outage estimation and diversity-slope fitting.

Trials are independently keyed: trial ``t`` of grid point ``i`` owns the
random stream ``i * POINT_STRIDE + t``, so outage counts are invariant
under chunking, scheduling, and worker count, and adding grid points
never perturbs existing ones. The ``bound`` mode needs only the two hop
Gram spectra per trial and is fully vectorised (closed-form eigenvalues
for orders 1 and 2), which makes 1e7-1e8 trials per point tractable; the
``exact`` and ``separate`` modes build the full transceiver per trial and
serve as the validation path at smaller trial counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import theory
from .channel import ChannelRealization, SystemConfig, config_at_snr, sample_realization_batch
from .metrics import mutual_info_joint, outage_separate, outage_threshold
from .numerics import ContractViolation
from .transceiver import RankDeficiencyError, build_design, error_cov_decomposed, error_cov_direct

__all__ = [
    "FitInfeasibleError",
    "SweepSpec",
    "OutagePoint",
    "OutageCurve",
    "SlopeFit",
    "wilson_interval",
    "run_point",
    "run_sweep",
    "fit_slope",
    "OUTAGE_MODES",
    "POINT_STRIDE",
]

OUTAGE_MODES = ("exact", "bound", "separate")

# Stream index of (point, trial) = point * POINT_STRIDE + trial.
POINT_STRIDE = 2**40

# Trials evaluated per task; results are per-trial keyed so the value
# only affects throughput, never the counts.
_BOUND_CHUNK = 32768
_DESIGN_CHUNK = 1024

_Z95 = 1.959963984540054


class FitInfeasibleError(RuntimeError):
    """Too few usable points to fit a diversity slope."""


@dataclass(frozen=True)
class SweepSpec:
    """Full description of one outage-vs-SNR experiment."""

    config: SystemConfig          # antennas and rate; rho is set per point
    snr_grid_db: tuple[float, ...]
    trials_per_point: int
    outage_mode: str = "bound"
    master_seed: int = 0
    adaptive: bool = False        # stop a point early once enough outages
    target_outages: int = 200

    def __post_init__(self):
        grid = tuple(float(x) for x in self.snr_grid_db)
        object.__setattr__(self, "snr_grid_db", grid)
        if len(grid) == 0 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ContractViolation(f"snr_grid_db must be strictly ascending, got {grid}")
        if self.trials_per_point < 100:
            raise ContractViolation(
                f"trials_per_point must be at least 100, got {self.trials_per_point}"
            )
        if self.trials_per_point > POINT_STRIDE:
            raise ContractViolation("trials_per_point exceeds the per-point stream budget")
        if self.outage_mode not in OUTAGE_MODES:
            raise ContractViolation(f"outage_mode must be one of {OUTAGE_MODES}")
        if self.adaptive and self.target_outages < 1:
            raise ContractViolation("target_outages must be positive")


@dataclass(frozen=True)
class OutagePoint:
    snr_db: float
    p_out: float
    trials: int
    outages: int
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class OutageCurve:
    points: tuple[OutagePoint, ...]
    mode: str
    config: SystemConfig


@dataclass(frozen=True)
class SlopeFit:
    d_hat: float
    window_snr_db: tuple[float, ...]
    residual: float               # RMS of log10 fit residuals
    d_theory: int


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval; well behaved at zero counts."""
    if trials <= 0:
        raise ContractViolation("trials must be positive")
    if not 0 <= successes <= trials:
        raise ContractViolation("successes must lie in [0, trials]")
    p_hat = successes / trials
    denom = 1.0 + z**2 / trials
    center = (p_hat + z**2 / (2 * trials)) / denom
    margin = (z / denom) * math.sqrt(p_hat * (1 - p_hat) / trials + z**2 / (4 * trials**2))
    low = 0.0 if successes == 0 else max(0.0, center - margin)
    high = 1.0 if successes == trials else min(1.0, center + margin)
    return low, high


# ---------------------------------------------------------------------------
# Per-chunk trial evaluation
# ---------------------------------------------------------------------------


def _batched_psd_eigs_desc(grams: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of a stack of small Hermitian PSD matrices."""
    k = grams.shape[-1]
    if k == 1:
        return np.maximum(grams[..., 0, 0].real, 0.0)[:, None]
    if k == 2:
        a = grams[..., 0, 0].real
        b = grams[..., 1, 1].real
        c = grams[..., 0, 1]
        half = 0.5 * (a + b)
        disc = np.sqrt(0.25 * (a - b) ** 2 + c.real**2 + c.imag**2)
        return np.stack([half + disc, np.maximum(half - disc, 0.0)], axis=-1)
    values = np.linalg.eigvalsh(grams)
    return np.maximum(values[..., ::-1], 0.0)


def _small_gram_stack(mats: np.ndarray) -> np.ndarray:
    # A A^H or A^H A, whichever is smaller; both carry the positive spectrum.
    n, r, c = mats.shape
    herm = mats.conj().swapaxes(-1, -2)
    return mats @ herm if r <= c else herm @ mats


def _count_outages_bound(config: SystemConfig, h: np.ndarray, g: np.ndarray) -> int:
    rho = config.rho
    m_dim = config.m_dim
    lam_h = _batched_psd_eigs_desc(_small_gram_stack(h))[:, :m_dim]
    lam_g = _batched_psd_eigs_desc(_small_gram_stack(g))
    if lam_g.shape[1] >= m_dim:
        lam_g = lam_g[:, :m_dim]
    else:
        lam_g = np.pad(lam_g, ((0, 0), (0, m_dim - lam_g.shape[1])))
    with np.errstate(divide="ignore"):
        rho_over_lambda_y = 1.0 + 1.0 / (rho * lam_h)
        statistic = np.sum(1.0 / (1.0 + rho * lam_h), axis=1) + np.sum(
            1.0 / (rho * lam_g + rho_over_lambda_y), axis=1
        )
    m = outage_threshold(config.n_s, m_dim, config.rate_bpcu)
    return int(np.count_nonzero(statistic >= m))


def _trial_gamma(config: SystemConfig, chan: ChannelRealization) -> np.ndarray:
    design = build_design(config, chan)
    try:
        cov = error_cov_decomposed(config, chan, design)
    except RankDeficiencyError:
        cov = error_cov_direct(config, chan, design.q)
    return cov.gamma


def _count_outages_designed(
    config: SystemConfig, h: np.ndarray, g: np.ndarray, mode: str, first_stream: int
) -> int:
    count = 0
    for i in range(h.shape[0]):
        try:
            gamma = _trial_gamma(config, ChannelRealization(h=h[i], g=g[i]))
            if mode == "exact":
                count += mutual_info_joint(gamma) <= config.rate_bpcu
            else:
                count += outage_separate(gamma, config.rate_bpcu, config.n_s)
        except Exception as exc:
            raise RuntimeError(f"trial stream {first_stream + i} failed: {exc}") from exc
    return count


def _count_chunk(
    config: SystemConfig, mode: str, master_seed: int, point_index: int, start: int, n: int
) -> int:
    streams = point_index * POINT_STRIDE + np.arange(start, start + n, dtype=np.uint64)
    h, g = sample_realization_batch(config, master_seed, streams)
    if mode == "bound":
        return _count_outages_bound(config, h, g)
    return _count_outages_designed(config, h, g, mode, point_index * POINT_STRIDE + start)


def _chunk_task(args) -> int:
    return _count_chunk(*args)


def _chunk_plan(trials: int, chunk: int) -> list[tuple[int, int]]:
    return [(s, min(chunk, trials - s)) for s in range(0, trials, chunk)]


def run_point(
    config: SystemConfig,
    snr_db: float,
    trials: int,
    mode: str,
    master_seed: int,
    point_index: int = 0,
    workers: int = 1,
    adaptive: bool = False,
    target_outages: int = 200,
    _executor: ProcessPoolExecutor | None = None,
) -> tuple[int, int]:
    """Count outages at one SNR point; returns ``(outages, trials_run)``.

    Deterministic in (config, snr_db, trials, mode, master_seed,
    point_index) for any worker count. With ``adaptive`` the point stops
    at the end of the first chunk prefix reaching ``target_outages``,
    which is likewise scheduling-independent.
    """
    if mode not in OUTAGE_MODES:
        raise ContractViolation(f"outage_mode must be one of {OUTAGE_MODES}")
    at_snr = config_at_snr(config, snr_db)
    chunk = _BOUND_CHUNK if mode == "bound" else _DESIGN_CHUNK
    plan = _chunk_plan(trials, chunk)
    tasks = [(at_snr, mode, master_seed, point_index, start, n) for start, n in plan]

    outages = 0
    done = 0
    if workers <= 1 or len(tasks) == 1:
        for (start, n), task in zip(plan, tasks):
            outages += _chunk_task(task)
            done += n
            if adaptive and outages >= target_outages:
                break
        return outages, done

    def consume_in_order(executor: ProcessPoolExecutor) -> tuple[int, int]:
        nonlocal outages, done
        window = 4 * workers
        futures: dict[int, object] = {}
        submitted = 0
        for consume in range(len(tasks)):
            while submitted < min(consume + window, len(tasks)):
                futures[submitted] = executor.submit(_chunk_task, tasks[submitted])
                submitted += 1
            outages += futures.pop(consume).result()
            done += plan[consume][1]
            if adaptive and outages >= target_outages:
                for f in futures.values():
                    f.cancel()
                break
        return outages, done

    if _executor is not None:
        return consume_in_order(_executor)
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return consume_in_order(executor)


def run_sweep(spec: SweepSpec, workers: int = 1) -> OutageCurve:
    """Estimate the outage curve across the SNR grid of ``spec``.

    The curve is a pure function of the spec: grid points use disjoint
    stream ranges keyed by their index, so results never depend on
    worker count or on other points.
    """
    points = []
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for index, snr_db in enumerate(spec.snr_grid_db):
            outages, trials = run_point(
                spec.config,
                snr_db,
                spec.trials_per_point,
                spec.outage_mode,
                spec.master_seed,
                point_index=index,
                workers=workers,
                adaptive=spec.adaptive,
                target_outages=spec.target_outages,
                _executor=executor,
            )
            ci_low, ci_high = wilson_interval(outages, trials)
            points.append(
                OutagePoint(
                    snr_db=float(snr_db),
                    p_out=outages / trials,
                    trials=trials,
                    outages=outages,
                    ci_low=ci_low,
                    ci_high=ci_high,
                )
            )
    finally:
        if executor is not None:
            executor.shutdown()
    return OutageCurve(points=tuple(points), mode=spec.outage_mode, config=spec.config)


def fit_slope(curve: OutageCurve, min_count: int = 20) -> SlopeFit:
    """Fit the diversity slope on the highest-SNR usable window.

    Uses the largest suffix of grid points whose outage count is at least
    ``min_count`` (starved points are noise, low-SNR points bias the
    slope); requires three such points. ``d_hat`` is minus the slope of
    log10 p_out against log10 rho.
    """
    points = list(curve.points)
    counts = [p.outages for p in points]
    usable = [i for i, c in enumerate(counts) if c >= min_count]
    if usable:
        # largest contiguous usable run ending at the last usable point
        # (starved points sit at the high-SNR end, low-SNR points below
        # the window bias the slope)
        end = usable[-1]
        start = end
        while start > 0 and counts[start - 1] >= min_count:
            start -= 1
        window = points[start : end + 1]
    else:
        window = []
    if len(window) < 3:
        raise FitInfeasibleError(
            f"need 3 contiguous points with at least {min_count} outages, "
            f"got {len(window)} usable (counts {counts})"
        )
    x = np.array([p.snr_db / 10.0 for p in window])  # log10(rho)
    y = np.log10([p.p_out for p in window])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    cfg = curve.config
    return SlopeFit(
        d_hat=float(-slope),
        window_snr_db=tuple(p.snr_db for p in window),
        residual=residual,
        d_theory=theory.drt(cfg.n_s, cfg.n_r, cfg.n_d, cfg.rate_bpcu),
    )
