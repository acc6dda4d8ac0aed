"""relaylab: MMSE transceiver design and outage/diversity simulation for
two-hop MIMO amplify-and-forward relay channels."""

__version__ = "0.1.0"

from .channel import (
    ChannelRealization,
    SystemConfig,
    config_at_snr,
    default_power_coupling,
    sample_realization,
    sample_realization_batch,
)
from .metrics import (
    MiReport,
    channel_eigenvalues,
    evaluate_realization,
    mi_lower_bound,
    mutual_info_joint,
    outage_bound_statistic,
    outage_separate,
)
from .numerics import (
    ContractViolation,
    HermitianEig,
    NumericalRankError,
    SeedSpec,
    eig_hermitian_desc,
    sample_complex_gaussian,
    sample_complex_gaussian_batch,
    solve_hermitian_psd,
)
from .simulator import (
    FitInfeasibleError,
    OutageCurve,
    OutagePoint,
    SlopeFit,
    SweepSpec,
    fit_slope,
    run_point,
    run_sweep,
    wilson_interval,
)
from .theory import DiversityPrediction, classify_regime, dmt, drt, m_bar, predict
from .transceiver import (
    ErrorCovariance,
    RankDeficiencyError,
    TransceiverDesign,
    build_design,
    destination_receiver,
    error_cov_decomposed,
    error_cov_direct,
    relay_power,
    relay_receiver,
    signal_covariance,
    waterfill_phi,
)

__all__ = [
    "__version__",
    "SystemConfig",
    "ChannelRealization",
    "SeedSpec",
    "TransceiverDesign",
    "ErrorCovariance",
    "MiReport",
    "SweepSpec",
    "OutageCurve",
    "OutagePoint",
    "SlopeFit",
    "DiversityPrediction",
    "HermitianEig",
    "ContractViolation",
    "NumericalRankError",
    "RankDeficiencyError",
    "FitInfeasibleError",
    "default_power_coupling",
    "config_at_snr",
    "sample_realization",
    "sample_realization_batch",
    "sample_complex_gaussian",
    "sample_complex_gaussian_batch",
    "eig_hermitian_desc",
    "solve_hermitian_psd",
    "relay_receiver",
    "signal_covariance",
    "waterfill_phi",
    "build_design",
    "destination_receiver",
    "error_cov_decomposed",
    "error_cov_direct",
    "relay_power",
    "mutual_info_joint",
    "mi_lower_bound",
    "outage_bound_statistic",
    "outage_separate",
    "channel_eigenvalues",
    "evaluate_realization",
    "m_bar",
    "drt",
    "dmt",
    "classify_regime",
    "predict",
    "wilson_interval",
    "run_point",
    "run_sweep",
    "fit_slope",
]
