"""Command-line front end: experiment configs, SNR sweeps, CSV output, verification.

Exit codes: 0 success, 1 configuration/validation error, 2 runtime or solver
failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path

import numpy as np

from . import power_alloc, slp_core
from .channel import generate_channel, sigma2_from_snr, trial_rng
from .constellation import SUPPORTED_ORDERS, build_constellation, classify_component
from .errors import ConfigurationError
from .link_sim import (
    LinkConfig,
    Scheme,
    quantize_broadcast,
    run_monte_carlo,
    simulate_block,
)


class Experiment(str, Enum):
    BER_SWEEP = "BER_SWEEP"
    THROUGHPUT_SWEEP = "THROUGHPUT_SWEEP"
    F_TRACE = "F_TRACE"


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved experiment description (config file plus flag overrides)."""

    users: int = 4
    antennas: int = 4
    block_len: int = 50
    modulation: int = 16
    schemes: tuple = (Scheme.SLP_IN_BLOCK, Scheme.SLP_UNIFORM, Scheme.ZF, Scheme.RZF)
    total_power: float = 1.0
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    feedback_bits: int = 5
    f_max: float = 1.0
    channels: int = 100
    seed: int = 1
    quantization: bool = True
    experiment: Experiment = Experiment.BER_SWEEP
    out: str = "results.csv"


# Column orders are part of the output contract; never reorder.
SWEEP_COLUMNS = [
    "experiment", "scheme", "modulation", "K", "N_T", "M", "B",
    "snr_db", "ber", "bler", "t_eff", "mean_f", "f_spread",
    "n_bits", "n_errors", "seed",
]
TRACE_COLUMNS = [
    "experiment", "scheme", "modulation", "K", "N_T", "M", "B",
    "snr_db", "block", "symbol", "f", "seed",
]


def parse_snr_values(text: str) -> tuple:
    """Parse an SNR grid: a single value, a comma list, or start:step:stop (dB)."""
    text = text.strip()
    try:
        if ":" in text:
            start_s, step_s, stop_s = text.split(":")
            start, step, stop = float(start_s), float(step_s), float(stop_s)
            if step <= 0:
                raise ConfigurationError(f"snr_db step must be > 0, got {step}")
            values = []
            v = start
            while v <= stop + 1e-9:
                values.append(round(v, 9))
                v += step
            return tuple(values)
        if "," in text:
            return tuple(float(v) for v in text.split(","))
        return (float(text),)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse snr_db value {text!r}") from exc


def _parse_schemes(text: str) -> tuple:
    names = [s.strip() for s in text.split(",") if s.strip()]
    if not names:
        raise ConfigurationError("schemes must name at least one scheme")
    try:
        return tuple(Scheme(name) for name in names)
    except ValueError as exc:
        raise ConfigurationError(
            f"unknown scheme in {text!r}; valid: {[s.value for s in Scheme]}"
        ) from exc


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"cannot parse boolean value {text!r}")


# Config-file keys and their parsers; this is the full documented key list.
_CONFIG_PARSERS = {
    "users": int,
    "antennas": int,
    "block_len": int,
    "modulation": int,
    "schemes": _parse_schemes,
    "total_power": float,
    "snr_db": parse_snr_values,
    "feedback_bits": int,
    "f_max": float,
    "channels": int,
    "seed": int,
    "quantization": _parse_bool,
    "experiment": Experiment,
    "out": str,
}


def _read_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_PARSERS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_PARSERS[key](value.strip())
        except ConfigurationError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return values


def _validate(spec: ExperimentSpec) -> ExperimentSpec:
    if spec.users < 1:
        raise ConfigurationError(f"users must be >= 1, got {spec.users}")
    if spec.users > spec.antennas:
        raise ConfigurationError(
            f"constraint violated: users <= antennas (got users={spec.users}, antennas={spec.antennas})"
        )
    if spec.block_len < 1:
        raise ConfigurationError(f"block_len must be >= 1, got {spec.block_len}")
    if spec.modulation not in SUPPORTED_ORDERS:
        raise ConfigurationError(
            f"modulation must be one of {SUPPORTED_ORDERS}, got {spec.modulation}"
        )
    if not spec.schemes:
        raise ConfigurationError("schemes must name at least one scheme")
    if not spec.snr_db:
        raise ConfigurationError("snr_db grid is empty")
    if spec.feedback_bits < 1:
        raise ConfigurationError(f"feedback_bits must be >= 1, got {spec.feedback_bits}")
    if spec.f_max <= 0:
        raise ConfigurationError(f"f_max must be > 0, got {spec.f_max}")
    if spec.total_power <= 0:
        raise ConfigurationError(f"total_power must be > 0, got {spec.total_power}")
    if spec.channels < 0:
        raise ConfigurationError(f"channels must be >= 0, got {spec.channels}")
    if spec.seed < 0:
        raise ConfigurationError(f"seed must be >= 0, got {spec.seed}")
    return spec


def parse_config(path=None, overrides: dict | None = None) -> ExperimentSpec:
    """Resolve an experiment spec from an optional key=value file plus overrides."""
    values = _read_config_file(path) if path else {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _CONFIG_PARSERS:
            raise ConfigurationError(f"unknown key {key!r}")
        values[key] = value
    known = {f.name for f in fields(ExperimentSpec)}
    assert set(values) <= known
    return _validate(ExperimentSpec(**values))


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _link_config(spec: ExperimentSpec, scheme: Scheme) -> LinkConfig:
    return LinkConfig(
        users=spec.users,
        antennas=spec.antennas,
        block_len=spec.block_len,
        modulation=spec.modulation,
        scheme=scheme,
        total_power=spec.total_power,
        snr_grid_db=spec.snr_db,
        feedback_bits=spec.feedback_bits,
        f_max=spec.f_max,
        n_channels=spec.channels,
        seed=spec.seed,
        quantization=spec.quantization,
    )


def _sweep_rows(spec: ExperimentSpec) -> list:
    rows = []
    for scheme in spec.schemes:
        cfg = _link_config(spec, scheme)
        for record in run_monte_carlo(cfg):
            rows.append({
                "experiment": spec.experiment,
                "scheme": scheme,
                "modulation": spec.modulation,
                "K": spec.users,
                "N_T": spec.antennas,
                "M": spec.block_len,
                "B": spec.feedback_bits,
                "snr_db": record.snr_db,
                "ber": record.ber,
                "bler": record.bler,
                "t_eff": record.t_eff,
                "mean_f": record.mean_f,
                "f_spread": record.f_spread,
                "n_bits": record.n_bits,
                "n_errors": record.n_errors,
                "seed": spec.seed,
            })
    return rows


def _trace_rows(spec: ExperimentSpec) -> list:
    """Per-symbol ideal rescaling factors for one block per scheme."""
    snr_db = spec.snr_db[0]
    rows = []
    for scheme in spec.schemes:
        cfg = _link_config(spec, scheme)
        rng = trial_rng(spec.seed, 0, 0)
        channel = generate_channel(spec.users, spec.antennas, rng)
        sigma2 = sigma2_from_snr(snr_db, spec.block_len, spec.total_power)
        block = simulate_block(cfg, channel, sigma2, rng)
        for m, f_value in enumerate(block.f_ideal):
            rows.append({
                "experiment": spec.experiment,
                "scheme": scheme,
                "modulation": spec.modulation,
                "K": spec.users,
                "N_T": spec.antennas,
                "M": spec.block_len,
                "B": spec.feedback_bits,
                "snr_db": snr_db,
                "block": 0,
                "symbol": m,
                "f": float(f_value),
                "seed": spec.seed,
            })
    return rows


def run_experiment(spec: ExperimentSpec) -> int:
    """Run the configured experiment and write its CSV. Returns 0 on success."""
    if spec.experiment is Experiment.F_TRACE:
        rows = _trace_rows(spec)
        _write_csv(spec.out, TRACE_COLUMNS, rows)
    else:
        rows = _sweep_rows(spec)
        _write_csv(spec.out, SWEEP_COLUMNS, rows)
    return 0


# ---------------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str


def check_power_allocation(
    rng, n_samples: int = 200, sizes=(2, 10, 50), power_scale: float = 1.0
) -> SuiteResult:
    """Closed form vs bisection oracle plus KKT certificates on random margins.

    ``power_scale`` rescales the candidate powers before checking; values
    other than 1.0 inject a budget fault (test hook).
    """
    worst_rel = 0.0
    worst_kkt = 0.0
    total_power = 1.0
    for i in range(n_samples):
        size = sizes[i % len(sizes)]
        margins = 10.0 ** rng.uniform(-1.5, 1.5, size)
        powers = power_alloc.allocate_in_block(margins, total_power).powers * power_scale
        oracle = power_alloc.solve_maxmin_power(margins, total_power)
        worst_rel = max(worst_rel, float(np.max(np.abs(powers - oracle) / oracle)))
        cert = power_alloc.verify_kkt(margins, powers, total_power)
        worst_kkt = max(
            worst_kkt,
            cert.stationarity_residual,
            cert.complementarity_residual,
            cert.primal_residual,
        )
    passed = worst_rel <= 1e-8 and worst_kkt <= 1e-9
    return SuiteResult(
        name="power-allocation",
        passed=passed,
        detail=f"worst closed-form/oracle rel diff {worst_rel:.2e}, worst KKT residual {worst_kkt:.2e}",
    )


def check_slp_solutions(rng, n_samples: int = 40, users: int = 4, antennas: int = 4,
                        modulation: int = 16) -> SuiteResult:
    """Solve random instances and verify the returned solutions' constraints."""
    spec = build_constellation(modulation)
    worst = 0.0
    min_margin = np.inf
    for _ in range(n_samples):
        channel = generate_channel(users, antennas, rng)
        labels = rng.integers(0, modulation, users)
        symbols = spec.points[labels]
        inst = slp_core.build_instance(channel, symbols, spec)
        sol = slp_core.solve_ci_max(inst)
        report = slp_core.verify_solution(inst, sol, tol=1e-6)
        worst = max(worst, report.coupling, report.inner, report.outer,
                    report.ball, report.norm_dev)
        min_margin = min(min_margin, sol.margin)
    passed = worst <= 1e-6 and min_margin > 0
    return SuiteResult(
        name="slp-solver",
        passed=passed,
        detail=f"worst residual {worst:.2e}, smallest margin {min_margin:.3f}",
    )


def check_constellations() -> SuiteResult:
    """Unit energy, Gray adjacency, and inner/outer partition for every order."""
    worst_energy = 0.0
    gray_ok = True
    for order in SUPPORTED_ORDERS:
        spec = build_constellation(order)
        worst_energy = max(worst_energy, abs(float(np.mean(np.abs(spec.points) ** 2)) - 1.0))
        # axis-adjacent points must differ in exactly one label bit
        labels_by_point = {complex(p): label for label, p in enumerate(spec.points)}
        step = spec.levels[1] - spec.levels[0] if spec.levels.size > 1 else 0.0
        for p, label in labels_by_point.items():
            for delta in (step, 1j * step):
                q = p + delta
                if complex(q) in labels_by_point:
                    other = labels_by_point[complex(q)]
                    if bin(label ^ other).count("1") != 1:
                        gray_ok = False
    spec16 = build_constellation(16)
    types = [classify_component(spec16, complex(p)).point_type for p in spec16.points]
    partition_ok = all(types.count(t) == 4 for t in "ABCD")
    passed = worst_energy <= 1e-12 and gray_ok and partition_ok
    return SuiteResult(
        name="constellation",
        passed=passed,
        detail=f"worst mean-energy deviation {worst_energy:.2e}, gray={gray_ok}, partition={partition_ok}",
    )


def check_quantization(rng, n_samples: int = 100_000, feedback_bits: int = 5,
                       f_max: float = 1.0) -> SuiteResult:
    """Empirical broadcast-error variance against f_max / 2^B (within 3%)."""
    f_nominal = 10.0
    draws = np.array([
        quantize_broadcast(f_nominal, feedback_bits, f_max, rng) for _ in range(n_samples)
    ])
    measured = float(np.var(draws - f_nominal))
    expected = f_max / 2.0**feedback_bits
    rel = abs(measured - expected) / expected
    return SuiteResult(
        name="quantization",
        passed=rel <= 0.03,
        detail=f"variance {measured:.5f} vs expected {expected:.5f} (rel dev {rel:.2%})",
    )


def run_verification(spec: ExperimentSpec | None = None, seed: int = 0) -> list:
    """Run all verification suites; library invariants when no spec is given."""
    users, antennas, modulation = 4, 4, 16
    if spec is not None:
        users, antennas, modulation = spec.users, spec.antennas, spec.modulation
    results = [
        check_constellations(),
        check_power_allocation(np.random.default_rng(seed)),
        check_slp_solutions(
            np.random.default_rng(seed + 1), users=users, antennas=antennas,
            modulation=modulation,
        ),
        check_quantization(np.random.default_rng(seed + 2)),
    ]
    return results


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_run_flags(parser):
    parser.add_argument("--config", help="key = value experiment file")
    parser.add_argument("--experiment", choices=[e.value for e in Experiment])
    parser.add_argument("--scheme", dest="schemes",
                        help="comma-separated schemes (default: all)")
    parser.add_argument("--mod", dest="modulation", type=int, help="QAM order")
    parser.add_argument("--users", type=int)
    parser.add_argument("--antennas", type=int)
    parser.add_argument("--block-len", dest="block_len", type=int)
    parser.add_argument("--snr-db", dest="snr_db",
                        help="grid: single value, comma list, or start:step:stop")
    parser.add_argument("--channels", type=int)
    parser.add_argument("--bits-feedback", dest="feedback_bits", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--no-quantization", action="store_true",
                        help="broadcast the rescaling factor without error")


def _overrides_from_args(args) -> dict:
    overrides = {
        "users": args.users,
        "antennas": args.antennas,
        "block_len": args.block_len,
        "modulation": args.modulation,
        "channels": args.channels,
        "feedback_bits": args.feedback_bits,
        "seed": args.seed,
        "out": args.out,
    }
    if args.schemes is not None:
        overrides["schemes"] = _parse_schemes(args.schemes)
    if args.snr_db is not None:
        overrides["snr_db"] = parse_snr_values(args.snr_db)
    if args.experiment is not None:
        overrides["experiment"] = Experiment(args.experiment)
    if args.no_quantization:
        overrides["quantization"] = False
    return overrides


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="slpsim",
        description="Symbol-level precoding link simulator with in-block power allocation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_parser = sub.add_parser("run", help="run an experiment and write its CSV")
    _add_run_flags(run_parser)
    verify_parser = sub.add_parser("verify", help="run the built-in verification suites")
    verify_parser.add_argument("--config", help="optional experiment file to take sizes from")
    verify_parser.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)

    if args.command == "verify":
        try:
            spec = parse_config(args.config) if args.config else None
        except (ConfigurationError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        results = run_verification(spec, seed=args.seed)
        for result in results:
            status = "PASS" if result.passed else "FAIL"
            print(f"{status} {result.name}: {result.detail}")
        return 0 if all(r.passed for r in results) else 3

    try:
        spec = parse_config(args.config, _overrides_from_args(args))
    except (ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return run_experiment(spec)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # solver/runtime failures
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
