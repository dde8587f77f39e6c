"""One sub-filter: particle memory, sampling, importance and resampling.

The vectorized bank in :mod:`parsir.filterbank` runs all sub-filters at once
with two-buffer gathers.  :class:`SubFilter` here is the cycle-by-cycle model:
a single dual-port particle memory with a replication cache register,
weights written at the sampled-particle address, and the threshold-scan
resampler.  Both paths must agree bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fixedpoint as fx
from .arith import SECTOR_WIDTH
from .resample import DegenerateWeightsError, ResampleOutcome, systematic_resample
from .timing import CycleTrace

N_AZIMUTH = 8
PRIOR_HALF_WIDTH = 16  # prior square half-width, in units of std


@dataclass(frozen=True)
class SectorGeometry:
    """Azimuth sectors around the heading, optionally split into elevation bands.

    ``elevation_edges`` are ascending radians; ``None`` means planar (8
    sectors).  Sector numbering is ``band * 8 + azimuth_sector``.
    """

    elevation_edges: tuple | None = None

    @classmethod
    def planar(cls):
        return cls(None)

    @classmethod
    def hemispheres(cls):
        return cls((-math.pi / 2, 0.0, math.pi / 2))

    @property
    def dims(self) -> int:
        return 2 if self.elevation_edges is None else 3

    @property
    def n_bands(self) -> int:
        return 1 if self.elevation_edges is None else len(self.elevation_edges) - 1

    @property
    def n_sectors(self) -> int:
        return N_AZIMUTH * self.n_bands

    def sectors(self, arith, d, heading_raw):
        """Sector index 1..n_sectors for displacements ``d`` (particle - vehicle)."""
        az = arith.azimuth_sector(d, heading_raw)
        if self.elevation_edges is None:
            return az
        inner = arith.elevation_edges(self.elevation_edges[1:-1])
        band = np.searchsorted(inner, arith.elevation(d), side="left")
        return band * N_AZIMUTH + az

    def center(self, sector: int):
        """(azimuth offset from heading, elevation) at a sector's center, radians."""
        band, az = divmod(sector - 1, N_AZIMUTH)
        az_offset = (2 * (az + 1) - 1) * math.pi / 8
        if self.elevation_edges is None:
            return az_offset, 0.0
        lo, hi = self.elevation_edges[band], self.elevation_edges[band + 1]
        return az_offset, 0.5 * (lo + hi)


# --- scalar operations --------------------------------------------------------

def sector_index(theta, phi_ugv, *, fixed: bool = True) -> int:
    """Sector 1..8 of bearing ``theta`` seen from heading ``phi_ugv``.

    Fixed mode takes Angle12 words, real mode radians.  The angular offset is
    wrapped into (0, 2*pi], so a particle dead ahead lands in sector 8.
    """
    if fixed:
        delta = fx.angle_sub(theta, phi_ugv) or fx.ANGLE_FULL
        return (delta + SECTOR_WIDTH - 1) // SECTOR_WIDTH
    delta = math.fmod(theta - phi_ugv, 2 * math.pi)
    if delta <= 0:
        delta += 2 * math.pi
    return min(max(math.ceil(delta * 4 / math.pi), 1), 8)


def compute_bearing(p, vehicle_pos):
    """Angle12 bearing from the vehicle to a Fx16 particle position."""
    return fx.cordic_atan2(fx.fx_sub(p[1], vehicle_pos[1]), fx.fx_sub(p[0], vehicle_pos[0]))


def sample_propagate(prev, prn, std, *, fixed: bool = True):
    """Sampling update: each coordinate moves by prn * std (saturating in fixed mode)."""
    prev = np.asarray(prev)
    prn = np.asarray(prn)
    if fixed:
        return fx.fx_add(prev.astype(np.int64), fx.fx_mul(prn.astype(np.int64), std))
    if std < 0:
        raise ValueError("std must be non-negative")
    return prev + prn * std


def z_bits(z: int, n_sectors: int) -> np.ndarray:
    """Unpack a measurement word; bit j-1 holds sector j."""
    return (int(z) >> np.arange(n_sectors)) & 1


def likelihood_table(z: int, n_sectors: int, alpha: float, beta: float,
                     variant: str = "full") -> np.ndarray:
    """p(z | source in sector s) for s = 1..n_sectors.

    ``full`` multiplies the source-sector factor with the clutter factor of
    every other sector; ``own-sector`` keeps only the source-sector factor.
    """
    bits = z_bits(z, n_sectors).astype(bool)
    own = np.where(bits, alpha, 1.0 - alpha)
    if variant == "own-sector":
        return own
    if variant != "full":
        raise ValueError(f"unknown likelihood variant {variant!r}")
    ab = alpha * beta
    other = np.where(bits, ab, 1.0 - ab)
    table = np.empty(n_sectors)
    for s in range(n_sectors):
        table[s] = own[s] * np.prod(np.delete(other, s))
    return table


def importance_weight(z: int, sector: int, alpha: float, beta: float, w_prev: float,
                      *, n_sectors: int = 8, variant: str = "full") -> float:
    return w_prev * float(likelihood_table(z, n_sectors, alpha, beta, variant)[sector - 1])


# --- particle memory --------------------------------------------------------------

class ParticleMemory:
    """Single dual-port particle RAM with a one-entry replication cache.

    A read whose address equals the previous read address is served from the
    register, never from the cell, because the cell may already hold the new
    particle written back during the same pass.
    """

    def __init__(self, cells):
        self.cells = np.array(cells, copy=True)
        self.last_read_addr = None
        self.last_read_value = None
        self.reads = 0
        self.writes = 0

    def begin_pass(self):
        self.last_read_addr = None
        self.last_read_value = None

    def read(self, addr: int):
        if addr == self.last_read_addr:
            return self.last_read_value
        self.last_read_value = self.cells[addr].copy()
        self.last_read_addr = addr
        self.reads += 1
        return self.last_read_value

    def write(self, addr: int, value):
        self.cells[addr] = value
        self.writes += 1


def write_addresses(ind_r, ind_d) -> np.ndarray:
    """1-based write sequence: a first read writes back in place, repeats take discarded slots."""
    ind_r = np.asarray(ind_r)
    rep = np.zeros(len(ind_r), dtype=bool)
    rep[1:] = ind_r[1:] == ind_r[:-1]
    out = ind_r.copy()
    out[rep] = np.asarray(ind_d)[: rep.sum()]
    return out


def read_resampled(memory: ParticleMemory, ind_r, writes=None) -> list:
    """Read the resampled stream while (optionally) writing back new particles.

    ``writes`` maps read position ``i`` to the value written at cycle ``i``;
    the write address follows :func:`write_addresses`.  Returns the values
    read, i.e. the time t-1 particles selected by ``ind_r``.
    """
    memory.begin_pass()
    out = []
    waddr = None
    if writes is not None:
        waddr = writes[0]
    for i, a in enumerate(ind_r):
        out.append(memory.read(int(a) - 1))
        if waddr is not None:
            memory.write(int(waddr[i]) - 1, writes[1](i, out[-1]))
    return out


# --- cycle-level sub-filter ------------------------------------------------------

@dataclass
class SubFilterState:
    memory: ParticleMemory
    weights: np.ndarray
    sum_w: object
    sector_counts: np.ndarray
    outcome: ResampleOutcome
    reinitialized: bool = False


@dataclass
class StepInputs:
    """Everything one sub-filter needs for a pass besides its own state."""

    noise: np.ndarray  # (M, D) unit noise in the arithmetic's representation
    u0: int  # raw 16-bit uniform word
    z: int
    vehicle: np.ndarray  # position in the arithmetic's representation
    heading_raw: int
    likelihood: np.ndarray
    std: object  # propagation scale in the arithmetic's representation
    prior_scale: object


@dataclass
class SubFilter:
    """Cycle-level model of sub-filter ``k``."""

    k: int
    arith: object
    geometry: SectorGeometry
    state: SubFilterState = field(default=None)
    tau: tuple = (10, 20, 20)

    @property
    def m(self) -> int:
        return len(self.state.memory.cells)

    def initialize(self, cells):
        m = len(cells)
        self.state = SubFilterState(
            memory=ParticleMemory(cells),
            weights=np.zeros(m),
            sum_w=0,
            sector_counts=np.zeros(self.geometry.n_sectors, dtype=np.int64),
            outcome=ResampleOutcome.identity(m),
        )

    def outgoing(self) -> np.ndarray:
        """First M/2 resampled particles, as the ring will see them this pass."""
        q = self.m // 2
        idx = self.state.outcome.ind_r[:q] - 1
        return self.state.memory.cells[idx].copy()

    def step(self, routed_in: np.ndarray, inp: StepInputs, trace: CycleTrace | None = None):
        """One full SIR pass; returns the particles sent to the next sub-filter."""
        st = self.state
        m = self.m
        q = m // 2
        if len(routed_in) != q:
            raise ValueError(f"sub-filter {self.k}: routed block has {len(routed_in)} particles, expected {q}")
        arith = self.arith
        outcome = st.outcome
        waddr = write_addresses(outcome.ind_r, outcome.ind_d)
        weights = np.zeros(m, dtype=np.int64 if arith.fixed else np.float64)
        sectors = np.zeros(m, dtype=np.int64)
        sent = []

        def sample_and_weigh(i, read_value):
            if i < q:
                sent.append(read_value)
                source = routed_in[i]
            else:
                source = read_value
            new = arith.propagate(source, inp.noise[i], inp.std)
            d = arith.displacement(new[None, :], inp.vehicle)
            s = int(self.geometry.sectors(arith, d, inp.heading_raw)[0])
            a = int(waddr[i]) - 1
            weights[a] = arith.weights(inp.likelihood, np.array([s]), m)[0]
            sectors[a] = s
            if trace is not None:
                trace.add(self.k, "sample_importance", 1)
            return new

        read_resampled(st.memory, outcome.ind_r, (waddr, sample_and_weigh))
        if trace is not None:
            trace.add(self.k, "latency_sample", self.tau[0])
            trace.add(self.k, "latency_importance", self.tau[1])

        st.weights = weights
        st.sum_w = weights.sum()
        st.sector_counts = np.bincount(sectors - 1, minlength=self.geometry.n_sectors)
        st.reinitialized = False
        try:
            u0 = inp.u0 if arith.fixed else inp.u0 / 65536.0
            st.outcome = systematic_resample(weights, st.sum_w, u0, fixed=arith.fixed)
        except DegenerateWeightsError:
            # every particle weightless: re-seed around the vehicle, like t = 0
            st.memory.cells = arith.propagate(np.broadcast_to(inp.vehicle, inp.noise.shape),
                                              inp.noise, inp.prior_scale)
            st.outcome = ResampleOutcome.identity(m)
            st.reinitialized = True
        if trace is not None:
            o = st.outcome
            trace.add(self.k, "resample_fetch", o.loop_fetches + o.flush_fetches)
            trace.add(self.k, "resample_compare", o.loop_fetches + o.flush_fetches)
            trace.add(self.k, "resample_emit", o.emit_cycles)
            trace.add(self.k, "latency_resample", self.tau[2])
        return np.asarray(sent)

    def resampled(self) -> np.ndarray:
        """Current resampled particle set x_hat_t (in ind_r order)."""
        return self.state.memory.cells[self.state.outcome.ind_r - 1]
