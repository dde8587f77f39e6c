"""Acceptance criteria, one test each.

Every test records a one-line PASS/FAIL verdict that the terminal summary
prints (see ``conftest.py``); running this file directly prints the same
lines.  Monte-Carlo criteria use seeds ``0 .. runs-1`` and the fixed-point
datapath.
"""
import dataclasses
import functools
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

import conftest
from parsir import fixedpoint as fx
from parsir.filterbank import ParallelSIRFilter
from parsir.harness import ScenarioConfig, aggregate, run_many, run_scenario
from parsir.resample import systematic_resample
from parsir.rng import PERIOD, step_word
from parsir.subfilter import ParticleMemory, read_resampled, write_addresses
from parsir.timing import CycleBudget, sampling_rate, sir_cycles
from oracles import brute_force_resample, two_buffer_read

# Thresholds frozen after the pre-studies recorded in the decisions ledger.
SUCCESS_BAR_PLANAR = 0.80  # criterion 8: 500-run pre-study rate, see ledger
SUCCESS_BAR_SPATIAL = 0.70  # criterion 10
RUNS = 100


def record(n: int, title: str, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {n:>2}  {title}: {detail}"
    conftest.ACCEPTANCE[n] = (ok, line)
    print(line)
    assert ok, line


@functools.lru_cache(maxsize=None)
def _study(cfg_items: tuple, runs: int):
    cfg = ScenarioConfig(**dict(cfg_items))
    return aggregate(cfg, run_many(cfg, range(runs)))


def study(cfg: ScenarioConfig, runs: int = RUNS) -> dict:
    return _study(tuple(dataclasses.asdict(cfg).items()), runs)


# --- 1, 2: cycle model ---------------------------------------------------------

def test_c01_cycle_model_exactness():
    big, small = CycleBudget(1024, 8), CycleBudget(256, 8)
    checks = [
        sir_cycles(1024, 8, 50) == 562,
        round(big.t_sir * 1e8) == 562,  # 5.62 us in units of 10 ns
        round(sampling_rate(100e6, 1024, 8, 50) / 1e3) == 178,
        sir_cycles(256, 8, 50) == 178 and small.cycles == 178,
        round(sampling_rate(100e6, 256, 8, 50) / 1e3) == 562,
    ]
    record(1, "cycle model exactness", all(checks),
           f"N=1024,K=8 -> {big.cycles} cycles, {big.t_sir * 1e6:.2f} us, {big.f_s / 1e3:.0f} kHz; "
           f"N=256,K=8 -> {small.cycles} cycles, {small.f_s / 1e3:.0f} kHz")


def test_c02_instrumented_cycles():
    mismatches = []
    worst_resample = {}
    for n, k in itertools.product((64, 128, 256, 512, 1024), (1, 2, 4, 8)):
        pf = ParallelSIRFilter(n_particles=n, n_subfilters=k, emulate=True, seed=n + k)
        pf.reset([38.0, -4.0])
        m = n // k
        for z in (0x01, 0xFF, 0x00, 0x5A):
            pf.partial_fit(z, [36.0, -2.0], 300)
            if pf.cycles_ != 4 * m + 50:
                mismatches.append((n, k, pf.cycles_))
            for kk in range(k):
                kinds = pf.trace_.by_kind(kk)
                used = kinds["resample_fetch"] + kinds["resample_compare"] + kinds["resample_emit"]
                worst_resample[m] = max(worst_resample.get(m, 0), used)
    # exhaustive small-M sweep: the scan never exceeds 3M and reaches it
    exhaustive = max(systematic_resample(np.array(p, float), sum(p), u).cycles
                     for p in itertools.product(range(4), repeat=4) if sum(p)
                     for u in (0.0, 0.5, 0.99))
    ok = not mismatches and all(v == 3 * m for m, v in worst_resample.items()) and exhaustive == 12
    record(2, "instrumented vs formula", ok,
           f"20 configs, mismatches={mismatches or 'none'}; resampler worst case "
           f"{sorted(worst_resample.items())} (3M each), M=4 exhaustive max {exhaustive}")


# --- 3, 4: resampler -------------------------------------------------------------

def _resample_instances(m, count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        kind = rng.integers(3)
        if kind == 0:
            w = rng.random(m)
        elif kind == 1:
            w = rng.random(m) * (rng.random(m) < 0.3)
        else:
            w = rng.exponential(size=m) ** 3
        if not w.sum() > 0:
            w[rng.integers(m)] = 1.0
        yield w, float(rng.random())


@functools.lru_cache(maxsize=None)
def _criterion3_runs():
    """(mismatches, bracket violations, instances) over all real-mode instances."""
    mismatches = violations = total = 0
    for m in (4, 8, 32):
        for w, u0 in _resample_instances(m, 10_000, seed=m):
            total += 1
            sum_w = math.fsum(w)
            out = systematic_resample(w, sum_w, u0)
            ind_r, ind_d = brute_force_resample(w, u0, Fraction(sum_w) / m)
            if list(out.ind_r) != ind_r or list(out.ind_d) != ind_d:
                mismatches += 1
            exact = [Fraction(x) for x in w]
            tot = sum(exact)
            for c, x in zip(out.counts, exact):
                share = m * x / tot
                if not math.floor(share) <= c <= math.ceil(share):
                    violations += 1
    return mismatches, violations, total


def test_c03_resampler_oracle():
    example = systematic_resample([0, 4, 0, 0, 2, 0], 6, 0.5)
    example_ok = (tuple(example.ind_r) == (2, 2, 2, 2, 5, 5)
                  and tuple(example.ind_d) == (1, 3, 4, 6))
    mismatches, _, total = _criterion3_runs()
    # fixed mode against the same oracle with integer weights and the truncated step
    rng = np.random.default_rng(1)
    fixed_bad = 0
    for m in (4, 8, 32):
        for _ in range(10_000):
            w = rng.integers(0, 1 << 16, m) * (rng.random(m) < 0.6)
            w[rng.integers(m)] = rng.integers(m, 1 << 16)
            u0 = int(rng.integers(0, 1 << 16))
            out = systematic_resample(w, int(w.sum()), u0, fixed=True)
            ref = brute_force_resample(w, Fraction(u0, 65536), int(w.sum()) >> (m.bit_length() - 1))
            fixed_bad += (list(out.ind_r), list(out.ind_d)) != ref
    ok = example_ok and mismatches == 0 and fixed_bad == 0
    record(3, "resampler oracle equivalence", ok,
           f"worked example {'reproduced' if example_ok else 'WRONG'}; real-mode mismatches "
           f"{mismatches}/{total}; fixed-mode mismatches {fixed_bad}/30000")


def test_c04_replication_bracketing():
    _, violations, total = _criterion3_runs()
    record(4, "replication-count bracketing", violations == 0,
           f"{violations} counts outside [floor, ceil] of M*w/sum over {total} runs")


# --- 5: memory scheme ------------------------------------------------------------

def _memory_pass(old, ind_r, fresh):
    ind_r = list(ind_r)
    used = set(ind_r)
    ind_d = [p for p in range(1, len(old) + 1) if p not in used]
    mem = ParticleMemory(np.asarray(old))
    reads = read_resampled(mem, ind_r, (write_addresses(ind_r, ind_d), fresh))
    return [int(v) for v in reads]


def test_c05_memory_scheme():
    fresh = lambda i, v: -1 - i  # noqa: E731
    exhaustive = bad = 0
    for m in range(1, 9):
        old = list(range(100, 100 + m))
        for ind_r in itertools.combinations_with_replacement(range(1, m + 1), m):
            exhaustive += 1
            bad += _memory_pass(old, ind_r, fresh) != two_buffer_read(old, list(ind_r), fresh)[0]
    rng = np.random.default_rng(32)
    old = list(range(500, 532))
    for _ in range(1000):
        ind_r = np.sort(rng.integers(1, 33, 32)).tolist()
        bad += _memory_pass(old, ind_r, fresh) != two_buffer_read(old, ind_r, fresh)[0]
    record(5, "memory-scheme equivalence", bad == 0,
           f"{exhaustive} exhaustive outcomes (M<=8) + 1000 random M=32, {bad} mismatches")


# --- 6 .. 10: Monte-Carlo behaviour ------------------------------------------------

@pytest.mark.slow
def test_c06_modified_vs_standard():
    base = ScenarioConfig.planar()
    modified = study(base)
    standard = study(base.replace(k_subfilters=1, routing=False))
    rel = abs(modified["mean_error"] - standard["mean_error"]) / standard["mean_error"]
    record(6, "modified vs standard accuracy", rel <= 0.10,
           f"K=8 mean {modified['mean_error']:.3f}, K=1 mean {standard['mean_error']:.3f}, "
           f"relative gap {rel:.1%} (bound 10%) over {RUNS} seeds")


@pytest.mark.slow
def test_c07_error_vs_n():
    base = ScenarioConfig.planar()
    ns = (32, 64, 128, 256)
    means = [study(base.replace(n_particles=n))["mean_error"] for n in ns]
    inversions = sum(b > a for a, b in zip(means, means[1:]))
    drop = 1 - means[-1] / means[0]
    record(7, "error decreases with N", inversions <= 1 and drop >= 0.25,
           "means " + ", ".join(f"N={n}: {e:.3f}" for n, e in zip(ns, means))
           + f"; inversions {inversions} (<=1), drop {drop:.1%} (>=25%)")


@pytest.mark.slow
def test_c08_localization_success():
    agg = study(ScenarioConfig.planar())
    record(8, "localization success", agg["success_rate"] >= SUCCESS_BAR_PLANAR,
           f"final error < 2.5 in {agg['success_rate']:.0%} of {RUNS} seeds "
           f"(bar {SUCCESS_BAR_PLANAR:.0%})")


@pytest.mark.slow
def test_c09_steps_vs_beta():
    base = ScenarioConfig.planar(alpha=0.8)
    steps = [study(base.replace(beta=b))["mean_steps"] for b in (0.2, 0.4, 0.6)]
    ok = steps[0] < steps[1] < steps[2]
    record(9, "steps-to-localize grows with beta", ok,
           "mean steps " + ", ".join(f"beta={b}: {s:.1f}" for b, s in zip((0.2, 0.4, 0.6), steps)))


@pytest.mark.slow
def test_c10_spatial_scenario():
    cfg = ScenarioConfig.spatial(localized_threshold=5.0)
    agg = study(cfg, runs=50)
    record(10, "3D scenario", agg["success_rate"] >= SUCCESS_BAR_SPATIAL,
           f"final error < 5 in {agg['success_rate']:.0%} of 50 seeds "
           f"(bar {SUCCESS_BAR_SPATIAL:.0%}), mean {agg['mean_error']:.2f}")


# --- 11: LFSR ---------------------------------------------------------------------

def test_c11_lfsr_period():
    word, n = step_word(0x0001), 1
    while word != 0x0001 and n <= PERIOD + 1:
        word = step_word(word)
        n += 1
    record(11, "LFSR maximality", n == 65535, f"period from 0x0001 = {n}")


# --- 12: fixed vs real ---------------------------------------------------------------

def test_c12_fixed_vs_real_drift():
    """Both datapaths replay one measurement log with the same seed (same LFSR words)."""
    cfg = ScenarioConfig.planar(horizon=50)
    log = run_scenario(cfg.replace(mode="real"), 0).rows
    fixed = cfg.make_filter(0, mode="fixed").reset(cfg.vehicle_start)
    real = cfg.make_filter(0, mode="real").reset(cfg.vehicle_start)
    drift = []
    for row in log:
        heading = fx.angle_from_real(row["heading"])
        fixed.partial_fit(row["z"], row["vehicle"], heading)
        real.partial_fit(row["z"], row["vehicle"], heading)
        drift.append(np.abs(fixed.estimate_ - real.estimate_).max())
    drift = np.array(drift)
    over = np.flatnonzero(drift > 0.1)
    record(12, "fixed vs real drift", len(over) == 0,
           f"max per-axis drift {drift.max():.3f} over 50 steps (bound 0.1)"
           + (f", first exceeded at step {over[0] + 1}" if len(over) else ""))


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
