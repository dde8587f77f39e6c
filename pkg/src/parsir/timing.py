"""Cycle-cost model of the parallel SIR datapath.

Each sub-filter spends M cycles in the pipelined sampling/importance stage,
2M cycles scanning weights and M cycles emitting replicated indices, plus
start-up latencies; sub-filters run concurrently and routing rides along with
sampling, so one step costs 4N/K + tau cycles.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

DEFAULT_TAU = (10, 20, 20)  # sampling, importance, resampling start-up latency
DEFAULT_F_CLK = 100e6


class ConfigurationError(ValueError):
    """Invalid filter or experiment configuration."""


def _per_subfilter(n: int, k: int) -> int:
    if k < 1 or n < 1 or n % k:
        raise ConfigurationError(f"K={k} must divide N={n}")
    m = n // k
    if m & (m - 1):
        raise ConfigurationError(f"N/K={m} must be a power of two")
    return m


def sir_cycles(n: int, k: int, tau: int = sum(DEFAULT_TAU)) -> int:
    return 4 * _per_subfilter(n, k) + tau


def sampling_rate(f_clk: float, n: int, k: int, tau: int = sum(DEFAULT_TAU)) -> float:
    return f_clk / sir_cycles(n, k, tau)


@dataclass(frozen=True)
class CycleBudget:
    n: int
    k: int
    tau_s: int = DEFAULT_TAU[0]
    tau_i: int = DEFAULT_TAU[1]
    tau_r: int = DEFAULT_TAU[2]
    t_clk: float = 1.0 / DEFAULT_F_CLK

    @property
    def tau(self) -> int:
        return self.tau_s + self.tau_i + self.tau_r

    @property
    def m(self) -> int:
        return _per_subfilter(self.n, self.k)

    @property
    def sample_importance_cycles(self) -> int:
        return self.m + self.tau_s + self.tau_i

    @property
    def resample_cycles(self) -> int:
        return 3 * self.m + self.tau_r

    @property
    def cycles(self) -> int:
        return sir_cycles(self.n, self.k, self.tau)

    @property
    def t_sir(self) -> float:
        return self.cycles * self.t_clk

    @property
    def f_s(self) -> float:
        return 1.0 / self.t_sir


class CycleTrace:
    """Append-only log of modeled cycles, keyed by sub-filter and event kind."""

    def __init__(self):
        self.events = []

    def add(self, k: int, kind: str, cycles: int):
        self.events.append((k, kind, int(cycles)))

    def per_subfilter(self) -> dict:
        totals = defaultdict(int)
        for k, _, c in self.events:
            totals[k] += c
        return dict(totals)

    def by_kind(self, k: int | None = None) -> dict:
        totals = defaultdict(int)
        for kk, kind, c in self.events:
            if k is None or kk == k:
                totals[kind] += c
        return dict(totals)


def measured_cycles(trace: CycleTrace) -> int:
    """Critical path of one step: the slowest sub-filter (they run in parallel)."""
    totals = trace.per_subfilter()
    return max(totals.values()) if totals else 0


def timing_table(n: int, ks, tau: int = sum(DEFAULT_TAU), f_clk: float = DEFAULT_F_CLK):
    """Rows of (N, K, tau, cycles, T_SIR in us, f_s in kHz) for each valid K."""
    rows = []
    for k in ks:
        try:
            c = sir_cycles(n, k, tau)
        except ConfigurationError:
            continue
        rows.append({"n": n, "k": k, "tau": tau, "cycles": c,
                     "t_sir_us": c / f_clk * 1e6, "f_s_khz": f_clk / c / 1e3})
    return rows
