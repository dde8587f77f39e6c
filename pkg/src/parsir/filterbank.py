"""K sub-filters on a ring: routing, sector check, mean estimate, SIR step.

:class:`ParallelSIRFilter` follows the scikit-learn estimator conventions
(constructor stores hyper-parameters only, ``get_params``/``set_params``,
``clone``-able, trailing-underscore fitted attributes).  The filter is online
and closed-loop, so the primary entry points are :meth:`reset` and
:meth:`partial_fit`; :meth:`fit` replays a recorded measurement log.
"""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_scalar

from . import fixedpoint as fx
from .arith import make_arithmetic
from .resample import systematic_resample_bank
from .rng import Lfsr, seed_word, split_streams, words_per_draw
from .subfilter import (PRIOR_HALF_WIDTH, SectorGeometry, StepInputs, SubFilter,
                        likelihood_table)
from .timing import DEFAULT_TAU, ConfigurationError, CycleTrace, measured_cycles


def route_ring(blocks):
    """Sub-filter k receives block k-1; sub-filter 1 receives block K."""
    sizes = {len(b) for b in blocks}
    if len(sizes) > 1:
        raise ConfigurationError(f"routed blocks differ in size: {sorted(sizes)}")
    if isinstance(blocks, np.ndarray):
        return np.roll(blocks, 1, axis=0)
    return [blocks[-1]] + list(blocks[:-1])


def sector_check(counts) -> int:
    """Steering sector: argmax of per-sector totals over sub-filters, lowest index on ties."""
    totals = np.asarray(counts).reshape(-1, np.shape(counts)[-1]).sum(axis=0)
    return int(np.argmax(totals)) + 1


def mean_estimate(particles, arith):
    """Per-axis mean of all N particles; fixed mode divides by shifting."""
    flat = np.asarray(particles).reshape(-1, np.shape(particles)[-1])
    n = len(flat)
    if n & (n - 1):
        raise ConfigurationError(f"N={n} must be a power of two for the shift divider")
    return arith.mean(arith.sum(flat, axis=0), n)


def write_addresses_bank(ind_r0: np.ndarray) -> np.ndarray:
    """0-based write addresses for every row of nondecreasing replicated indices."""
    k, m = ind_r0.shape
    offsets = (np.arange(k) * m)[:, None]
    flat = (ind_r0 + offsets).ravel()
    counts = np.bincount(flat, minlength=k * m)
    rep = np.zeros((k, m), dtype=bool)
    rep[:, 1:] = ind_r0[:, 1:] == ind_r0[:, :-1]
    out = flat.copy()
    out[rep.ravel()] = np.flatnonzero(counts == 0)
    return (out.reshape(k, m) - offsets)


class ParallelSIRFilter(BaseEstimator):
    """Parallel SIR particle filter for bearings-only binary sector sensing.

    Parameters
    ----------
    n_particles : int, default=256
        Total particle count N. N / n_subfilters must be a power of two.
    n_subfilters : int, default=8
        Number of sub-filters K on the routing ring.
    alpha, beta : float
        Detection and clutter probabilities of the sector sensors.
    std : float, default=1.0
        Propagation noise scale; uniform noise spans [-std, std).
    dims : {2, 3}
        Planar (8 sectors) or spatial (16 sectors) localization.
    mode : {"fixed", "real"}
        Q9.6/Angle12 hardware arithmetic or float64.
    likelihood : {"full", "own-sector"}
    noise : {"uniform", "gaussian"}
    routing : bool, default=True
        Exchange M/2 particles around the ring each step. With
        ``n_subfilters=1`` the filter is the standard single SIR filter either way.
    emulate : bool, default=False
        Run the cycle-level sub-filter model (dual-port memory, scan
        resampler, cycle trace) instead of the vectorized bank.
    seed : int, default=0
    tau : tuple of int
        Start-up latencies (sampling, importance, resampling) in cycles.
    elevation_edges : tuple of float or None
        Elevation band edges for ``dims=3``; defaults to two hemispheres.
    """

    def __init__(self, n_particles=256, n_subfilters=8, alpha=0.8, beta=0.6, std=1.0,
                 dims=2, mode="fixed", likelihood="full", noise="uniform", routing=True,
                 emulate=False, seed=0, tau=DEFAULT_TAU, elevation_edges=None):
        self.n_particles = n_particles
        self.n_subfilters = n_subfilters
        self.alpha = alpha
        self.beta = beta
        self.std = std
        self.dims = dims
        self.mode = mode
        self.likelihood = likelihood
        self.noise = noise
        self.routing = routing
        self.emulate = emulate
        self.seed = seed
        self.tau = tau
        self.elevation_edges = elevation_edges

    # -- setup ---------------------------------------------------------------

    def _validate(self):
        check_scalar(self.n_particles, "n_particles", numbers.Integral, min_val=2)
        check_scalar(self.n_subfilters, "n_subfilters", numbers.Integral, min_val=1)
        check_scalar(self.alpha, "alpha", numbers.Real, min_val=0.0, max_val=1.0)
        check_scalar(self.beta, "beta", numbers.Real, min_val=0.0, max_val=1.0)
        check_scalar(self.std, "std", numbers.Real, min_val=0.0)
        if self.dims not in (2, 3):
            raise ConfigurationError(f"dims must be 2 or 3, got {self.dims}")
        if self.likelihood not in ("full", "own-sector"):
            raise ConfigurationError(f"unknown likelihood variant {self.likelihood!r}")
        words_per_draw(self.noise)
        n, k = self.n_particles, self.n_subfilters
        if n % k:
            raise ConfigurationError(f"n_subfilters={k} must divide n_particles={n}")
        m = n // k
        if m < 2 or m & (m - 1) or n & (n - 1):
            raise ConfigurationError(f"N={n} and M=N/K={m} must be powers of two, M >= 2")

    def reset(self, vehicle_position):
        """Distribute the prior around the vehicle (time step 0)."""
        self._validate()
        self.arith_ = make_arithmetic(self.mode)
        if self.dims == 2:
            self.geometry_ = SectorGeometry.planar()
        elif self.elevation_edges is not None:
            self.geometry_ = SectorGeometry(tuple(self.elevation_edges))
        else:
            self.geometry_ = SectorGeometry.hemispheres()
        self.m_ = self.n_particles // self.n_subfilters
        self.std_ = self.arith_.scalar(self.std)
        self.prior_scale_ = self.arith_.scalar(PRIOR_HALF_WIDTH * self.std)
        self.lfsr_ = Lfsr(seed_word(self.seed, 0))
        vehicle = self._vehicle(vehicle_position)

        k, m, d = self.n_subfilters, self.m_, self.dims
        words = split_streams(self.lfsr_.next_block(k * m * d), k).reshape(k, m, d)
        cells = self.arith_.spread(np.broadcast_to(vehicle, words.shape), words,
                                   PRIOR_HALF_WIDTH * self.std)
        self.cells_ = cells
        self.ind_r_ = np.tile(np.arange(m), (k, 1))
        self.sector_counts_ = np.zeros((k, self.geometry_.n_sectors), dtype=np.int64)
        if self.emulate:
            self.subfilters_ = []
            for kk in range(k):
                sf = SubFilter(kk, self.arith_, self.geometry_, tau=tuple(self.tau))
                sf.initialize(cells[kk])
                self.subfilters_.append(sf)
        self.t_ = 0
        self.estimate_ = self.arith_.to_real(mean_estimate(cells, self.arith_))
        self.steering_sector_ = None
        self.cycles_ = 0
        self.trace_ = None
        self.reinitialized_ = np.zeros(k, dtype=bool)
        return self

    def _vehicle(self, position):
        pos = np.asarray(position, dtype=np.float64)
        if pos.shape != (self.dims,):
            raise ConfigurationError(f"vehicle position must have {self.dims} coordinates")
        return self.arith_.quantize(pos)

    # -- one SIR step -----------------------------------------------------------

    def _draw(self):
        k, m, d = self.n_subfilters, self.m_, self.dims
        wpd = words_per_draw(self.noise)
        per = m * d * wpd + 1
        streams = split_streams(self.lfsr_.next_block(k * per), k)
        units = self.arith_.noise(streams[:, :-1].reshape(k, m, d, wpd), self.noise)
        return units, streams[:, -1]

    def partial_fit(self, z, vehicle_position, heading):
        """Process one measurement word taken at the given vehicle pose.

        ``heading`` is an Angle12 word (int) or, if a float, radians.
        """
        check_is_fitted(self, "cells_")
        heading_raw = heading if isinstance(heading, (int, np.integer)) else fx.angle_from_real(heading)
        heading_raw = int(heading_raw) & fx.ANGLE_MASK
        vehicle = self._vehicle(vehicle_position)
        units, u0 = self._draw()
        table = likelihood_table(int(z), self.geometry_.n_sectors, self.alpha, self.beta,
                                 self.likelihood)
        if self.emulate:
            self._step_emulated(units, u0, int(z), vehicle, heading_raw, table)
        else:
            self._step_bank(units, u0, vehicle, heading_raw, table)
        self.t_ += 1
        self.steering_sector_ = sector_check(self.sector_counts_)
        resampled = np.take_along_axis(self.cells_, self.ind_r_[..., None], axis=1)
        self.estimate_ = self.arith_.to_real(mean_estimate(resampled, self.arith_))
        return self

    def _step_bank(self, units, u0, vehicle, heading_raw, table):
        arith = self.arith_
        k, m = self.n_subfilters, self.m_
        q = m // 2
        reads = np.take_along_axis(self.cells_, self.ind_r_[..., None], axis=1)
        outgoing = reads[:, :q]
        incoming = route_ring(outgoing) if self.routing else outgoing
        inputs = np.concatenate([incoming, reads[:, q:]], axis=1)
        sampled = arith.propagate(inputs, units, self.std_)

        waddr = write_addresses_bank(self.ind_r_)
        cells = np.empty_like(sampled)
        np.put_along_axis(cells, waddr[..., None], sampled, axis=1)

        sectors = self.geometry_.sectors(arith, arith.displacement(cells, vehicle), heading_raw)
        weights = arith.weights(table, sectors, m)
        sum_w = weights.sum(axis=1)
        u = u0 if arith.fixed else u0 / 65536.0
        ind_r = systematic_resample_bank(weights, sum_w, u, fixed=arith.fixed)
        bad = ind_r[:, 0] < 0
        if bad.any():
            cells[bad] = arith.propagate(np.broadcast_to(vehicle, units[bad].shape),
                                         units[bad], self.prior_scale_)
            ind_r[bad] = np.arange(m)
        self.reinitialized_ = bad
        offsets = (np.arange(k) * self.geometry_.n_sectors)[:, None]
        self.sector_counts_ = np.bincount((sectors - 1 + offsets).ravel(),
                                          minlength=k * self.geometry_.n_sectors).reshape(k, -1)
        self.cells_ = cells
        self.ind_r_ = ind_r
        self.weights_ = weights
        self.cycles_ = 4 * m + sum(self.tau)
        self.trace_ = None

    def _step_emulated(self, units, u0, z, vehicle, heading_raw, table):
        trace = CycleTrace()
        sfs = self.subfilters_
        outgoing = [sf.outgoing() for sf in sfs]
        incoming = route_ring(outgoing) if self.routing else outgoing
        for sf in sfs:
            trace.add(sf.k, "routing", 0)
        for sf, block in zip(sfs, incoming):
            inp = StepInputs(units[sf.k], int(u0[sf.k]), z, vehicle, heading_raw, table,
                             self.std_, self.prior_scale_)
            sent = sf.step(block, inp, trace)
            if not np.array_equal(sent, outgoing[sf.k]):
                raise AssertionError(f"sub-filter {sf.k}: in-pass reads diverged from routed block")
        self.cells_ = np.stack([sf.state.memory.cells for sf in sfs])
        self.ind_r_ = np.stack([sf.state.outcome.ind_r - 1 for sf in sfs])
        self.sector_counts_ = np.stack([sf.state.sector_counts for sf in sfs])
        self.weights_ = np.stack([sf.state.weights for sf in sfs])
        self.reinitialized_ = np.array([sf.state.reinitialized for sf in sfs])
        self.trace_ = trace
        self.cycles_ = measured_cycles(trace)

    # -- estimator surface --------------------------------------------------------

    def fit(self, X, y=None):
        """Replay a measurement log.

        Each row of ``X`` is ``[z_word, heading_radians, *vehicle_position]``.
        The prior is centred on the first row's position; per-step estimates
        land in ``estimates_`` and steering sectors in ``sectors_``.
        """
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2 + self.dims:
            raise ConfigurationError(f"expected {2 + self.dims} columns, got {X.shape[1]}")
        self.reset(X[0, 2:])
        estimates, sectors = [], []
        for row in X:
            self.partial_fit(int(row[0]), row[2:], float(row[1]))
            estimates.append(self.estimate_)
            sectors.append(self.steering_sector_)
        self.estimates_ = np.asarray(estimates)
        self.sectors_ = np.asarray(sectors)
        return self

    def predict(self, X=None):
        """Current source-position estimate, or per-row estimates after replaying ``X``."""
        if X is not None:
            return self.fit(X).estimates_
        check_is_fitted(self, "estimate_")
        return self.estimate_

    def particles(self) -> np.ndarray:
        """Resampled particle set as real coordinates, shape (K, M, dims)."""
        check_is_fitted(self, "cells_")
        resampled = np.take_along_axis(self.cells_, self.ind_r_[..., None], axis=1)
        return self.arith_.to_real(resampled)


def standard_sir(n_particles=256, **params) -> ParallelSIRFilter:
    """The single-filter SIR reference: one sub-filter, no routing."""
    return ParallelSIRFilter(n_particles=n_particles, n_subfilters=1, routing=False, **params)
