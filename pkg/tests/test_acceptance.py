"""Desk-scale acceptance suite: one criterion per test, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. The BER/throughput criteria share one Monte Carlo sweep (module
fixture) at K = N_T = 4, M = 50, 16QAM, 500 channels, B = 5, f_max = 1 with
quantization enabled.
"""

import time

import numpy as np
import pytest

from slpsim.channel import generate_channel, sigma2_from_snr, trial_rng
from slpsim.cli import main
from slpsim.constellation import build_constellation
from slpsim.link_sim import (
    BlockResult,
    LinkConfig,
    Scheme,
    effective_throughput,
    quantize_broadcast,
    run_monte_carlo,
    simulate_block,
)
from slpsim.power_alloc import allocate_in_block, solve_maxmin_power, verify_kkt
from slpsim.slp_core import build_instance, solve_ci_max, verify_solution

from ci_oracle import margin_oracle_for_instance

DESK_SNR_DB = (25.0, 35.0, 40.0)
DESK_SEED = 2026


def _report(name: str, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def desk_sweep():
    """500-channel paired sweep of all four schemes over DESK_SNR_DB."""
    out = {}
    for scheme in Scheme:
        cfg = LinkConfig(
            users=4, antennas=4, block_len=50, modulation=16, scheme=scheme,
            snr_grid_db=DESK_SNR_DB, feedback_bits=5, f_max=1.0,
            n_channels=500, seed=DESK_SEED, quantization=True,
        )
        records, trials = run_monte_carlo(cfg, return_trials=True)
        counts = [
            np.array([b.n_bit_errors if isinstance(b, BlockResult) else -1 for b in snr_trials])
            for snr_trials in trials
        ]
        out[scheme] = {"records": records, "counts": counts, "cfg": cfg}
    return out


def _paired_z(counts_a, counts_b):
    """z-score of mean(count_a - count_b) under per-channel pairing."""
    ok = (counts_a >= 0) & (counts_b >= 0)
    diff = (counts_a[ok] - counts_b[ok]).astype(float)
    sem = diff.std(ddof=1) / np.sqrt(diff.size)
    return diff.mean() / sem if sem > 0 else np.inf * np.sign(diff.mean() or 1)


def test_c1_block_constant_rescaling():
    """In-block allocation flattens the rescaling factor; uniform does not."""
    start = time.time()
    worst_in_block = 0.0
    uniform_hits = {16: 0, 64: 0}
    n_channels = 100
    for modulation in (16, 64):
        for scheme in (Scheme.SLP_IN_BLOCK, Scheme.SLP_UNIFORM):
            cfg = LinkConfig(
                users=4, antennas=4, block_len=10, modulation=modulation,
                scheme=scheme, snr_grid_db=(40.0,), n_channels=n_channels,
                seed=51, quantization=False,
            )
            sigma2 = sigma2_from_snr(40.0, cfg.block_len)
            for trial in range(n_channels):
                rng = trial_rng(cfg.seed, 0, trial)
                channel = generate_channel(4, 4, rng)
                block = simulate_block(cfg, channel, sigma2, rng)
                if scheme is Scheme.SLP_IN_BLOCK:
                    worst_in_block = max(worst_in_block, block.f_spread)
                elif block.f_spread > 1e-3:
                    uniform_hits[modulation] += 1
    elapsed = time.time() - start
    ok = (
        worst_in_block <= 1e-6
        and all(hits >= 99 for hits in uniform_hits.values())
        and elapsed < 60
    )
    _report(
        "criterion 1 (block-constant rescaling)",
        ok,
        f"in-block worst spread {worst_in_block:.2e} (<=1e-6), uniform spread >1e-3 in "
        f"{uniform_hits[16]}/100 (16QAM) and {uniform_hits[64]}/100 (64QAM) blocks, "
        f"{elapsed:.1f} s",
    )


def test_c2_closed_form_vs_oracle():
    """Closed-form allocation matches the bisection oracle and passes KKT."""
    start = time.time()
    rng = np.random.default_rng(7)
    worst_rel = 0.0
    worst_kkt = 0.0
    sizes = (2, 10, 50)
    for i in range(1000):
        margins = 10.0 ** rng.uniform(-1.5, 1.5, sizes[i % 3])
        closed = allocate_in_block(margins, 1.0).powers
        numeric = solve_maxmin_power(margins, 1.0)
        worst_rel = max(worst_rel, float(np.max(np.abs(closed - numeric) / numeric)))
        cert = verify_kkt(margins, closed, 1.0)
        worst_kkt = max(
            worst_kkt,
            cert.stationarity_residual,
            cert.complementarity_residual,
            cert.primal_residual,
        )
    elapsed = time.time() - start
    ok = worst_rel <= 1e-8 and worst_kkt <= 1e-9 and elapsed < 10
    _report(
        "criterion 2 (closed form vs oracle)",
        ok,
        f"worst relative diff {worst_rel:.2e} (<=1e-8), worst KKT residual "
        f"{worst_kkt:.2e} (<=1e-9), {elapsed:.1f} s",
    )


def test_c3_slp_solver_correctness():
    """Analytic cases, brute-force oracle agreement, and residuals per solve."""
    start = time.time()
    spec = build_constellation(16)

    inst = build_instance(np.array([[1.0 + 0j]]), [(1 + 1j) / np.sqrt(10)], spec)
    err_inner = abs(solve_ci_max(inst).margin - np.sqrt(5))
    inst = build_instance(np.array([[1.0 + 0j]]), [(3 + 3j) / np.sqrt(10)], spec)
    err_corner = abs(solve_ci_max(inst).margin - np.sqrt(5) / 3)

    worst_oracle = 0.0
    worst_residual = 0.0
    worst_norm = 0.0
    for seed in range(50):
        rng = trial_rng(1000 + seed)
        channel = generate_channel(2, 2, rng)
        symbols = spec.points[rng.integers(0, 16, 2)]
        inst = build_instance(channel, symbols, spec)
        sol = solve_ci_max(inst)
        worst_oracle = max(worst_oracle, abs(sol.margin - margin_oracle_for_instance(inst)))
        report = verify_solution(inst, sol, tol=1e-6)
        worst_residual = max(worst_residual, report.coupling, report.inner, report.outer)
        worst_norm = max(worst_norm, report.norm_dev)
    elapsed = time.time() - start
    ok = (
        err_inner <= 1e-6
        and err_corner <= 1e-6
        and worst_oracle <= 1e-3
        and worst_residual <= 1e-6
        and worst_norm <= 1e-6
        and elapsed < 120
    )
    _report(
        "criterion 3 (CI solver correctness)",
        ok,
        f"analytic errors {err_inner:.1e}/{err_corner:.1e} (<=1e-6), worst vs brute force "
        f"{worst_oracle:.2e} (<=1e-3), worst residual {worst_residual:.2e} (<=1e-6), "
        f"worst norm dev {worst_norm:.2e} (<=1e-6), {elapsed:.1f} s",
    )


def test_c4_noiseless_zero_ber():
    """Zero noise and exact broadcast give exactly zero bit errors."""
    totals = {}
    for scheme in (Scheme.SLP_IN_BLOCK, Scheme.SLP_UNIFORM, Scheme.ZF):
        cfg = LinkConfig(
            users=4, antennas=4, block_len=20, modulation=16, scheme=scheme,
            snr_grid_db=(float("inf"),), n_channels=50, seed=77, quantization=False,
        )
        record = run_monte_carlo(cfg)[0]
        totals[scheme.value] = record.n_errors
        assert record.n_trials == 50
    ok = all(v == 0 for v in totals.values())
    _report("criterion 4 (noiseless correctness)", ok, f"bit errors per scheme: {totals}")


def test_c5_ber_ordering(desk_sweep):
    """At 35 dB in-block SLP beats RZF; at the top SNR uniform SLP is worse.

    Significance uses per-channel paired differences (errors cluster by
    block, so binomial noise would overstate confidence); the schemes share
    channels, symbols, and noise through the common seed.
    """
    idx35 = DESK_SNR_DB.index(35.0)
    idx_hi = len(DESK_SNR_DB) - 1
    ib = desk_sweep[Scheme.SLP_IN_BLOCK]
    rzf = desk_sweep[Scheme.RZF]
    uni = desk_sweep[Scheme.SLP_UNIFORM]

    ber_ib35 = ib["records"][idx35].ber
    ber_rzf35 = rzf["records"][idx35].ber
    z_rzf = _paired_z(rzf["counts"][idx35], ib["counts"][idx35])

    ber_ib_hi = ib["records"][idx_hi].ber
    ber_uni_hi = uni["records"][idx_hi].ber
    z_uni = _paired_z(uni["counts"][idx_hi], ib["counts"][idx_hi])

    ok = ber_ib35 < ber_rzf35 and z_rzf > 3.0 and ber_uni_hi > ber_ib_hi and z_uni > 3.0
    _report(
        "criterion 5 (BER ordering)",
        ok,
        f"35 dB: in-block {ber_ib35:.3e} vs RZF {ber_rzf35:.3e} (paired z={z_rzf:+.2f}, need >3); "
        f"{DESK_SNR_DB[idx_hi]:.0f} dB: uniform {ber_uni_hi:.3e} vs in-block {ber_ib_hi:.3e} "
        f"(paired z={z_uni:+.2f}, need >3)",
    )


def test_c6_throughput_ordering(desk_sweep):
    """Effective-throughput ordering at the top SNR plus exact formula checks."""
    idx_hi = len(DESK_SNR_DB) - 1
    t_ib = desk_sweep[Scheme.SLP_IN_BLOCK]["records"][idx_hi].t_eff
    t_zf = desk_sweep[Scheme.ZF]["records"][idx_hi].t_eff
    t_uni = desk_sweep[Scheme.SLP_UNIFORM]["records"][idx_hi].t_eff

    # error-free limits, exact (no tolerance)
    block_limit = effective_throughput(0.0, 16, 12, 200, 5, Scheme.SLP_IN_BLOCK)
    uniform_limit = effective_throughput(0.0, 16, 12, 200, 5, Scheme.SLP_UNIFORM)
    exact = (
        block_limit == np.log2(16) * 12 - 5 / 200
        and uniform_limit == np.log2(16) * 12 - 5
        and effective_throughput(0.0, 16, 12, 200, 5, Scheme.ZF) == block_limit
        and effective_throughput(0.0, 16, 12, 200, 5, Scheme.RZF) == block_limit
    )
    ok = t_ib > t_zf and t_ib > t_uni and exact
    _report(
        "criterion 6 (effective throughput)",
        ok,
        f"top SNR: in-block {t_ib:.3f} > ZF {t_zf:.3f} and > uniform {t_uni:.3f}; "
        f"error-free limits exact: {exact}",
    )


def test_c7_quantization_variance():
    """Broadcast error variance matches f_max / 2^B within 3%."""
    rng = trial_rng(123)
    draws = np.array([quantize_broadcast(10.0, 5, 1.0, rng) for _ in range(100_000)])
    measured = float(np.var(draws - 10.0))
    expected = 1.0 / 32.0
    rel = abs(measured - expected) / expected
    _report(
        "criterion 7 (quantization model)",
        rel <= 0.03,
        f"variance {measured:.5f} vs {expected:.5f} (rel dev {rel:.2%}, need <=3%)",
    )


def test_c8_deterministic_csv(tmp_path):
    """Identical seed and worker count give byte-identical CSV output."""
    args = [
        "run", "--experiment", "BER_SWEEP", "--scheme", "SLP_IN_BLOCK,ZF",
        "--users", "2", "--antennas", "2", "--block-len", "5",
        "--snr-db", "10,30", "--channels", "4", "--seed", "99",
    ]
    out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    rc1 = main(args + ["--out", str(out1)])
    rc2 = main(args + ["--out", str(out2)])
    identical = out1.read_bytes() == out2.read_bytes()
    _report(
        "criterion 8 (determinism)",
        rc1 == 0 and rc2 == 0 and identical,
        f"exit codes {rc1}/{rc2}, byte-identical: {identical}",
    )


def test_c9_solver_latency():
    """A single CI solve at K = N_T = 12 with 64QAM stays under 50 ms median."""
    spec = build_constellation(64)
    rng = trial_rng(31)
    times = []
    for _ in range(15):
        channel = generate_channel(12, 12, rng)
        symbols = spec.points[rng.integers(0, 64, 12)]
        inst = build_instance(channel, symbols, spec)
        start = time.perf_counter()
        sol = solve_ci_max(inst)
        times.append(time.perf_counter() - start)
        assert sol.margin > 0
    median_ms = float(np.median(times)) * 1e3
    _report(
        "criterion 9 (solver latency)",
        median_ms < 50.0,
        f"median solve {median_ms:.2f} ms over 15 instances (need <50 ms)",
    )
