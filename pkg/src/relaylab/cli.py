"""Command-line front end: theory tables, outage sweeps, slope fits, and
the transceiver identity battery.

Subcommands
-----------
theory        closed-form diversity predictions for rates or multiplexing gains
simulate      Monte Carlo outage sweep from a config file, CSV + manifest out
slope         diversity slope of a previously written curve file
design-check  numerical identity/power battery over seeded channel draws

Exit codes: 0 success, 1 runtime or tolerance failure, 2 usage error.
The ``RELAYLAB_SEED`` environment variable overrides the config-file
master seed (an explicit ``--seed`` flag beats both).
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
import tempfile
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, theory
from .channel import ChannelRealization, SystemConfig, sample_realization
from .numerics import ContractViolation, SeedSpec
from .simulator import (
    FitInfeasibleError,
    OutageCurve,
    OutagePoint,
    SweepSpec,
    fit_slope,
    run_sweep,
)
from .transceiver import (
    build_design,
    destination_receiver_second_hop,
    error_cov_decomposed,
    error_cov_direct,
    relay_power,
    ry_identity_gap,
    second_hop_mse_trace,
)

SEED_ENV_VAR = "RELAYLAB_SEED"
CURVE_HEADER = "snr_db,p_out,trials,outages,ci_low,ci_high"

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Curve / config / manifest serialization
# ---------------------------------------------------------------------------


def curve_to_csv(curve: OutageCurve) -> str:
    lines = [CURVE_HEADER]
    for p in curve.points:
        lines.append(
            f"{_fmt(p.snr_db)},{_fmt(p.p_out)},{p.trials},{p.outages},"
            f"{_fmt(p.ci_low)},{_fmt(p.ci_high)}"
        )
    return "\n".join(lines) + "\n"


def read_curve_csv(path: Path, config: SystemConfig | None = None, mode: str = "bound") -> OutageCurve:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != CURVE_HEADER:
        raise ContractViolation(f"{path} is not a curve file (bad header)")
    points = []
    for ln in lines[1:]:
        snr_db, p_out, trials, outages, ci_low, ci_high = ln.split(",")
        points.append(
            OutagePoint(
                snr_db=float(snr_db),
                p_out=float(p_out),
                trials=int(trials),
                outages=int(outages),
                ci_low=float(ci_low),
                ci_high=float(ci_high),
            )
        )
    if config is None:
        config = SystemConfig(n_s=1, n_r=1, n_d=1)
    return OutageCurve(points=tuple(points), mode=mode, config=config)


def parse_sweep_config(path: Path) -> SweepSpec:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read or "system" not in parser or "sweep" not in parser:
        raise ContractViolation(f"config {path} must contain [system] and [sweep] sections")
    sys_sec = parser["system"]
    sweep = parser["sweep"]
    config = SystemConfig(
        n_s=sys_sec.getint("n_s"),
        n_r=sys_sec.getint("n_r"),
        n_d=sys_sec.getint("n_d"),
        rate_bpcu=sys_sec.getfloat("rate_bpcu"),
    )
    grid = tuple(float(x) for x in sweep.get("snr_grid_db").split(","))
    return SweepSpec(
        config=config,
        snr_grid_db=grid,
        trials_per_point=sweep.getint("trials_per_point"),
        outage_mode=sweep.get("outage_mode", "bound"),
        master_seed=sweep.getint("master_seed", 0),
        adaptive=sweep.getboolean("adaptive", False),
        target_outages=sweep.getint("target_outages", 200),
    )


def spec_echo_text(spec: SweepSpec) -> str:
    cfg = spec.config
    return (
        "[system]\n"
        f"n_s = {cfg.n_s}\n"
        f"n_r = {cfg.n_r}\n"
        f"n_d = {cfg.n_d}\n"
        f"rate_bpcu = {_fmt(cfg.rate_bpcu)}\n"
        "\n[sweep]\n"
        f"snr_grid_db = {', '.join(_fmt(x) for x in spec.snr_grid_db)}\n"
        f"trials_per_point = {spec.trials_per_point}\n"
        f"outage_mode = {spec.outage_mode}\n"
        f"master_seed = {spec.master_seed}\n"
        f"adaptive = {str(spec.adaptive).lower()}\n"
        f"target_outages = {spec.target_outages}\n"
    )


def manifest_text(spec: SweepSpec, started: str, finished: str, workers: int, outputs: dict[str, str]) -> str:
    lines = [spec_echo_text(spec), "\n[run]"]
    lines.append(f"tool_version = {__version__}")
    lines.append(f"started_at = {started}")
    lines.append(f"finished_at = {finished}")
    lines.append(f"workers = {workers}")
    lines.append("\n[outputs]")
    for key, value in outputs.items():
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _utcnow() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# ---------------------------------------------------------------------------
# theory
# ---------------------------------------------------------------------------


def _parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def cmd_theory(args: argparse.Namespace) -> int:
    rows: list[tuple[str, ...]] = []
    try:
        if args.rates:
            header = ("rate_bpcu", "m_bar", "d_drt", "regime")
            for rate in _parse_float_list(args.rates):
                pred = theory.predict(args.ns, args.nr, args.nd, rate)
                rows.append((_fmt(rate), str(pred.m_bar), str(pred.d_drt), pred.regime_note))
        else:
            header = ("mux_gain", "d_dmt")
            for r in _parse_float_list(args.mux):
                rows.append((_fmt(r), _fmt(theory.dmt(args.ns, args.nr, args.nd, r))))
    except (ContractViolation, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    if args.out:
        text = ",".join(header) + "\n" + "\n".join(",".join(row) for row in rows) + "\n"
        _write_atomic(Path(args.out), text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        spec = parse_sweep_config(Path(args.config))
    except (OSError, ContractViolation, configparser.Error, ValueError, TypeError) as exc:
        print(f"error: unreadable config: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        seed = spec.master_seed
        if SEED_ENV_VAR in os.environ:
            seed = int(os.environ[SEED_ENV_VAR])
        if args.seed is not None:
            seed = args.seed
        overrides = {"master_seed": seed}
        if args.mode:
            overrides["outage_mode"] = args.mode
        if args.trials:
            overrides["trials_per_point"] = args.trials
        if args.snr_db:
            overrides["snr_grid_db"] = tuple(_parse_float_list(args.snr_db))
        if args.adaptive:
            overrides["adaptive"] = True
        spec = replace(spec, **overrides)
    except (ContractViolation, ValueError) as exc:
        print(f"error: invalid sweep spec: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out_dir = Path(args.out_dir)
    started = _utcnow()
    try:
        curve = run_sweep(spec, workers=args.workers)
    except Exception as exc:
        print(f"error: simulation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finished = _utcnow()

    curve_path = out_dir / "curve.csv"
    _write_atomic(curve_path, curve_to_csv(curve))
    manifest_path = out_dir / "manifest.txt"
    _write_atomic(
        manifest_path,
        manifest_text(spec, started, finished, args.workers, {"curve": curve_path.name}),
    )

    print(f"{spec.config.shape_label} R={_fmt(spec.config.rate_bpcu)} mode={spec.outage_mode} seed={spec.master_seed}")
    print(CURVE_HEADER.replace(",", "  "))
    for p in curve.points:
        print(f"{p.snr_db:6.1f}  {p.p_out:.4e}  {p.trials}  {p.outages}  {p.ci_low:.4e}  {p.ci_high:.4e}")
    print(f"wrote {curve_path} and {manifest_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# slope
# ---------------------------------------------------------------------------


def _config_for_slope(args: argparse.Namespace, curve_path: Path) -> SystemConfig | None:
    if args.ns and args.nr and args.nd and args.rate is not None:
        return SystemConfig(n_s=args.ns, n_r=args.nr, n_d=args.nd, rate_bpcu=args.rate)
    manifest = Path(args.manifest) if args.manifest else curve_path.parent / "manifest.txt"
    if manifest.exists():
        try:
            return parse_sweep_config(manifest).config
        except (ContractViolation, configparser.Error, ValueError):
            return None
    return None


def cmd_slope(args: argparse.Namespace) -> int:
    curve_path = Path(args.curve)
    try:
        config = _config_for_slope(args, curve_path)
        curve = read_curve_csv(curve_path, config=config)
    except (OSError, ContractViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        fit = fit_slope(curve, min_count=args.min_count)
    except FitInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    d_theory = str(fit.d_theory) if config is not None else "n/a (no config)"
    print(f"d_hat     = {fit.d_hat:.4f}")
    print(f"window    = {', '.join(_fmt(x) for x in fit.window_snr_db)} dB")
    print(f"residual  = {fit.residual:.3e}")
    print(f"d_theory  = {d_theory}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# design-check
# ---------------------------------------------------------------------------


def _parse_shapes(text: str) -> list[tuple[int, int, int]]:
    shapes = []
    for token in text.split(","):
        parts = token.strip().lower().split("x")
        if len(parts) != 3:
            raise ContractViolation(f"bad shape {token!r}, expected NSxNRxND")
        shapes.append(tuple(int(p) for p in parts))
    return shapes


def _scalar_oracle_gap() -> float:
    """Hand-computed 1x1x1 pipeline at rho=1, h=g=1, p_r=1."""
    config = SystemConfig(n_s=1, n_r=1, n_d=1, rho=1.0, p_r=1.0, rate_bpcu=0.0)
    chan = ChannelRealization(h=np.ones((1, 1), dtype=complex), g=np.ones((1, 1), dtype=complex))
    design = build_design(config, chan)
    gaps = [
        abs(design.l[0, 0] - 0.5),
        abs(design.r_y[0, 0] - 0.5),
        abs(design.phi[0] ** 2 - 2.0),
        abs(design.nu - 0.125),
        abs(abs(design.q[0, 0]) - math.sqrt(2) / 2),
        abs(abs(design.w[0, 0]) - math.sqrt(2) / 4),
        abs(error_cov_direct(config, chan, design.q).r_e[0, 0].real - 0.75),
        abs(error_cov_decomposed(config, chan, design).r_e[0, 0].real - 0.75),
    ]
    return float(max(gaps))


def run_design_check(
    shapes: list[tuple[int, int, int]],
    draws: int,
    rho: float,
    master_seed: int,
    inject_fault: bool = False,
) -> tuple[bool, list[str]]:
    """Identity/power battery over seeded draws; returns (ok, report lines).

    Checks, per draw: the two-term error covariance against the direct
    formula (optimal precoder and a random diagonally-loaded one), the
    two forms of R_y, the two forms of the destination receiver, the
    relay power budget, eigenvalue range and zero-mode rules, and error
    covariance bounds. A fault injection mode mis-accounts the relay
    power to prove the harness catches violations.
    """
    tol = 1e-9
    lines = []
    ok = True
    rng = np.random.default_rng(master_seed)

    for shape in shapes:
        n_s, n_r, n_d = shape
        m = min(n_s, n_r)
        worst = {
            "decomposition_gap": (0.0, -1),
            "decomposition_gap_random_b": (0.0, -1),
            "ry_gap": (0.0, -1),
            "receiver_gap": (0.0, -1),
            "power_mismatch": (0.0, -1),
            "re_bound_excess": (0.0, -1),
        }
        flagged: list[str] = []
        budget = rho * n_s * (1.2 if inject_fault else 1.0)
        config = SystemConfig(n_s=n_s, n_r=n_r, n_d=n_d, rho=rho, p_r=budget)
        report_config = SystemConfig(n_s=n_s, n_r=n_r, n_d=n_d, rho=rho)

        for draw in range(draws):
            chan = sample_realization(config, SeedSpec(master_seed, draw))
            design = build_design(config, chan)

            direct = error_cov_direct(report_config, chan, design.q)
            decomposed = error_cov_decomposed(report_config, chan, design)
            gap = _rel_gap(direct.r_e, decomposed.r_e)
            _track(worst, "decomposition_gap", gap, draw)

            b1 = rng.standard_normal((n_r, m)) + 1j * rng.standard_normal((n_r, m))
            b1[:m, :m] += 0.5 * np.eye(m)
            b_general = b1 @ design.u_y_tilde.conj().T
            gap = _rel_gap(
                error_cov_direct(report_config, chan, b_general @ design.l).r_e,
                error_cov_decomposed(report_config, chan, design, relay_precoder=b_general).r_e,
            )
            _track(worst, "decomposition_gap_random_b", gap, draw)

            _track(worst, "ry_gap", ry_identity_gap(chan.h, rho), draw)

            w_alt = destination_receiver_second_hop(design.r_y, design.b, chan.g)
            ref = max(float(np.linalg.norm(design.w)), 1e-30)
            _track(worst, "receiver_gap", float(np.linalg.norm(design.w - w_alt)) / ref, draw)

            spent = relay_power(chan.h, design.q, rho)
            if np.any(design.phi > 0):
                _track(worst, "power_mismatch", abs(spent - rho * n_s) / (rho * n_s), draw)
            if spent > rho * n_s * (1 + 1e-8):
                flagged.append(f"draw {draw}: relay power {spent:.6e} exceeds budget {rho * n_s:.6e}")

            if not (np.all(design.lambda_y > 0) and np.all(design.lambda_y < rho)):
                flagged.append(f"draw {draw}: lambda_y outside (0, rho)")
            if min(n_r, n_d) < m and np.any(design.phi[min(n_r, n_d):] != 0.0):
                flagged.append(f"draw {draw}: dead eigenmodes received power")
            feasibility = np.real(np.trace((design.v_g_tilde @ design.u_y_tilde.conj().T)
                                           @ design.r_y
                                           @ (design.v_g_tilde @ design.u_y_tilde.conj().T).conj().T))
            if not feasibility < rho * m:
                flagged.append(f"draw {draw}: unit-precoder power {feasibility:.6e} not below rho*M")

            eigs = np.linalg.eigvalsh(decomposed.r_e)
            excess = max(float(eigs.max()) / rho - 1.0, 0.0)
            _track(worst, "re_bound_excess", excess, draw)
            if eigs.min() <= 0 or excess > 1e-9 or np.any(decomposed.gamma < -1e-9):
                flagged.append(f"draw {draw}: error covariance out of bounds")

        for draw in range(min(100, draws)):
            chan = sample_realization(config, SeedSpec(master_seed, draw))
            design = build_design(config, chan)
            if not np.any(design.phi > 0):
                continue
            base = second_hop_mse_trace(design.lambda_y, design.lambda_g, design.phi)
            for _ in range(5):
                perturbed = np.abs(design.phi + 0.1 * rng.standard_normal(m))
                perturbed[design.lambda_g == 0] = 0.0
                scale = math.sqrt(config.p_r / max(np.sum(design.lambda_y * perturbed**2), 1e-300))
                trial = second_hop_mse_trace(design.lambda_y, design.lambda_g, perturbed * scale)
                if trial < base * (1 - 1e-7):
                    flagged.append(f"draw {draw}: feasible perturbation beat the water-filling")
                    break

        shape_ok = not flagged and all(v[0] <= tol for k, v in worst.items() if k != "power_mismatch") \
            and worst["power_mismatch"][0] <= 1e-6
        ok = ok and shape_ok
        lines.append(f"shape {n_s}x{n_r}x{n_d}: {'ok' if shape_ok else 'FAIL'}")
        for key, (value, draw) in worst.items():
            lines.append(f"  max {key:<20s} = {value:.3e} (draw {draw})")
        for msg in flagged[:5]:
            lines.append(f"  breach: {msg}")

        if shape == (1, 1, 1):
            gap = _scalar_oracle_gap()
            lines.append(f"  scalar oracle gap      = {gap:.3e}")
            if gap > 1e-9:
                ok = False

    return ok, lines


def _rel_gap(a: np.ndarray, b: np.ndarray) -> float:
    ref = max(float(np.linalg.norm(a)), 1e-30)
    return float(np.linalg.norm(a - b)) / ref


def _track(worst: dict, key: str, value: float, draw: int) -> None:
    if value > worst[key][0]:
        worst[key] = (value, draw)


def cmd_design_check(args: argparse.Namespace) -> int:
    try:
        shapes = _parse_shapes(args.shapes)
    except (ContractViolation, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    ok, lines = run_design_check(
        shapes, args.draws, args.rho, args.seed, inject_fault=args.inject_fault
    )
    for line in lines:
        print(line)
    print("design-check:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_RUNTIME


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaylab",
        description="MMSE relay transceiver design, outage simulation, and diversity checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_theory = sub.add_parser("theory", help="closed-form diversity predictions")
    p_theory.add_argument("--ns", type=int, required=True)
    p_theory.add_argument("--nr", type=int, required=True)
    p_theory.add_argument("--nd", type=int, required=True)
    group = p_theory.add_mutually_exclusive_group(required=True)
    group.add_argument("--rates", help="comma-separated rates in bpcu")
    group.add_argument("--mux", help="comma-separated multiplexing gains")
    p_theory.add_argument("--out", help="optional CSV output path")
    p_theory.set_defaults(func=cmd_theory)

    p_sim = sub.add_parser("simulate", help="Monte Carlo outage sweep")
    p_sim.add_argument("--config", required=True, help="sweep config file")
    p_sim.add_argument("--out-dir", required=True, help="directory for curve.csv and manifest.txt")
    p_sim.add_argument("--mode", choices=["exact", "bound", "separate"])
    p_sim.add_argument("--trials", type=int, help="override trials per point")
    p_sim.add_argument("--snr-db", help="override SNR grid, comma-separated dB values")
    p_sim.add_argument("--seed", type=int, help="override master seed (beats RELAYLAB_SEED)")
    p_sim.add_argument("--adaptive", action="store_true", help="stop points at target outage count")
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.set_defaults(func=cmd_simulate)

    p_slope = sub.add_parser("slope", help="fit diversity slope of a curve file")
    p_slope.add_argument("--curve", required=True)
    p_slope.add_argument("--min-count", type=int, default=20)
    p_slope.add_argument("--manifest", help="manifest for config (default: sibling manifest.txt)")
    p_slope.add_argument("--ns", type=int)
    p_slope.add_argument("--nr", type=int)
    p_slope.add_argument("--nd", type=int)
    p_slope.add_argument("--rate", type=float)
    p_slope.set_defaults(func=cmd_slope)

    p_check = sub.add_parser("design-check", help="transceiver identity battery")
    p_check.add_argument("--shapes", required=True, help="e.g. 2x2x2,3x2x4,2x2x1")
    p_check.add_argument("--draws", type=int, default=500)
    p_check.add_argument("--rho", type=float, default=10.0)
    p_check.add_argument("--seed", type=int, default=0)
    p_check.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p_check.set_defaults(func=cmd_design_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
