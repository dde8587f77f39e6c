"""Scenario configuration, closed-loop runs and Monte-Carlo sweeps."""
from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import fixedpoint as fx
from .filterbank import ParallelSIRFilter
from .rng import Lfsr, seed_word
from .subfilter import SectorGeometry
from .timing import ConfigurationError
from .world import SensorConfig, SourceState, VehicleState, advance_vehicle, sense

TRACE_HEADER = ["t", "veh_x", "veh_y", "veh_z", "heading", "z_word",
                "est_x", "est_y", "est_z", "sector", "error", "cycles"]


@dataclass
class ScenarioConfig:
    dims: int = 2
    n_particles: int = 256
    k_subfilters: int = 8
    alpha: float = 0.8
    beta: float = 0.6
    std: float = 1.0
    step_len: float = 0.5
    horizon: int = 250
    runs: int = 100
    seed: int = 0
    mode: str = "fixed"
    source_pos: tuple = (6.0, 22.0)
    vehicle_start: tuple = (38.0, -4.0)
    vehicle_heading0: float = 0.0  # radians
    localized_threshold: float = 2.5
    likelihood_variant: str = "full"
    noise: str = "uniform"
    routing: bool = True
    tau_s: int = 10
    tau_i: int = 20
    tau_r: int = 20
    f_clk: float = 100e6
    workers: int = 0  # 0 = one per CPU

    @classmethod
    def planar(cls, **overrides):
        return cls(**overrides)

    @classmethod
    def spatial(cls, **overrides):
        base = dict(dims=3, n_particles=512, k_subfilters=8, beta=0.4, horizon=350,
                    source_pos=(40.0, 30.0, 20.0), vehicle_start=(10.0, 0.0, -20.0))
        base.update(overrides)
        return cls(**base)

    def validate(self):
        if self.dims not in (2, 3):
            raise ConfigurationError(f"dims must be 2 or 3, got {self.dims}")
        for name in ("source_pos", "vehicle_start"):
            if len(getattr(self, name)) != self.dims:
                raise ConfigurationError(f"{name} needs {self.dims} coordinates")
        if not self.localized_threshold > 0:
            raise ConfigurationError("localized_threshold must be positive")
        if self.mode not in ("fixed", "real"):
            raise ConfigurationError(f"mode must be fixed or real, got {self.mode!r}")
        if not self.step_len > 0:
            raise ConfigurationError("step_len must be positive")
        if self.horizon < 1 or self.runs < 1:
            raise ConfigurationError("horizon and runs must be at least 1")
        try:
            self.make_filter().reset(self.vehicle_start)  # surfaces N/K and range errors
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(str(exc)) from exc
        return self

    @property
    def tau(self) -> tuple:
        return (self.tau_s, self.tau_i, self.tau_r)

    def geometry(self) -> SectorGeometry:
        return SectorGeometry.planar() if self.dims == 2 else SectorGeometry.hemispheres()

    def make_filter(self, seed: Optional[int] = None, **overrides) -> ParallelSIRFilter:
        params = dict(n_particles=self.n_particles, n_subfilters=self.k_subfilters,
                      alpha=float(self.alpha), beta=float(self.beta), std=float(self.std),
                      dims=self.dims, mode=self.mode, likelihood=self.likelihood_variant,
                      noise=self.noise, routing=self.routing,
                      seed=self.seed if seed is None else seed, tau=self.tau)
        params.update(overrides)
        return ParallelSIRFilter(**params)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


# --- config text format ----------------------------------------------------------

_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
# command-line spellings accepted wherever a config key is expected
KEY_ALIASES = {"particles": "n_particles", "subfilters": "k_subfilters", "steps": "horizon",
               "likelihood": "likelihood_variant", "step-len": "step_len"}


def canonical_key(key: str) -> str:
    key = key.strip()
    return KEY_ALIASES.get(key, key)


def _coerce(key: str, text: str):
    if key not in _FIELDS:
        raise ConfigurationError(f"unknown config key {key!r}")
    default = _FIELDS[key].default
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if isinstance(default, tuple):
            return tuple(float(v) for v in text.split(","))
        if isinstance(default, int):
            return int(text, 0)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {text!r}") from exc


def parse_config_text(text: str) -> dict:
    """``key = value`` lines, ``#`` comments, comma-separated arrays."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = canonical_key(key)
        values[key] = _coerce(key, value)
    return values


def load_config(path, **overrides) -> ScenarioConfig:
    with open(path) as fh:
        values = parse_config_text(fh.read())
    values.update(overrides)
    return ScenarioConfig(**values)


# --- metrics and runs ----------------------------------------------------------------

def estimation_error(est, truth) -> float:
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ConfigurationError(f"dimension mismatch: {est.shape} vs {truth.shape}")
    return float(np.sqrt(np.sum((est - truth) ** 2)))


@dataclass
class RunTrace:
    dims: int
    threshold: float
    rows: list = field(default_factory=list)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r["error"] for r in self.rows])

    @property
    def final_error(self) -> float:
        return self.rows[-1]["error"]

    @property
    def steps_to_localize(self) -> Optional[int]:
        hits = np.flatnonzero(self.errors < self.threshold)
        return int(self.rows[hits[0]]["t"]) if len(hits) else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        digits = 2 if self.dims == 2 else 4
        for r in self.rows:
            veh, est = list(r["vehicle"]), list(r["estimate"])
            if self.dims == 2:
                veh.append(None)
                est.append(None)
            w.writerow([r["t"], *(_fmt(v) for v in veh), _fmt(r["heading"]),
                        f"0x{r['z']:0{digits}X}", *(_fmt(v) for v in est),
                        r["sector"], _fmt(r["error"]), r["cycles"]])
        return buf.getvalue()


def _fmt(v) -> str:
    return "" if v is None else f"{v:.6f}"


def run_scenario(cfg: ScenarioConfig, seed: Optional[int] = None, **filter_overrides) -> RunTrace:
    """Closed loop: sense, filter step, steer, for ``cfg.horizon`` steps."""
    seed = cfg.seed if seed is None else seed
    geometry = cfg.geometry()
    sensor = SensorConfig(cfg.alpha, cfg.beta, geometry)
    source = SourceState(np.asarray(cfg.source_pos, dtype=float))
    vehicle = VehicleState(np.asarray(cfg.vehicle_start, dtype=float),
                           fx.angle_from_real(cfg.vehicle_heading0))
    sensor_rng = Lfsr(seed_word(seed, 1))
    pf = cfg.make_filter(seed, **filter_overrides).reset(vehicle.position)
    trace = RunTrace(cfg.dims, cfg.localized_threshold)
    for t in range(1, cfg.horizon + 1):
        z = sense(source, vehicle, sensor, sensor_rng)
        pf.partial_fit(z, vehicle.position, vehicle.heading)
        est = pf.estimate_
        trace.rows.append({
            "t": t, "vehicle": tuple(float(v) for v in vehicle.position),
            "heading": vehicle.heading_rad, "z": z,
            "estimate": tuple(float(v) for v in est), "sector": pf.steering_sector_,
            "error": estimation_error(est, source.position), "cycles": pf.cycles_,
        })
        vehicle = advance_vehicle(vehicle, pf.steering_sector_, cfg.step_len, geometry)
    return trace


def _run_summary(args):
    cfg, seed = args
    tr = run_scenario(cfg, seed)
    return tr.final_error, tr.steps_to_localize


def run_many(cfg: ScenarioConfig, seeds=None, workers: Optional[int] = None) -> list:
    """(final_error, steps_to_localize) for each seed, in seed order."""
    seeds = list(range(cfg.seed, cfg.seed + cfg.runs)) if seeds is None else list(seeds)
    workers = cfg.workers if workers is None else workers
    workers = workers or os.cpu_count() or 1
    jobs = [(cfg, s) for s in seeds]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_summary(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_summary, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def aggregate(cfg: ScenarioConfig, results: list) -> dict:
    errors = np.array([r[0] for r in results])
    steps = np.array([cfg.horizon if r[1] is None else r[1] for r in results], dtype=float)
    return {
        "runs": len(results),
        "mean_error": float(errors.mean()),
        "std_error": float(errors.std(ddof=1)) if len(errors) > 1 else 0.0,
        "success_rate": float(np.mean(errors < cfg.localized_threshold)),
        "localized_rate": float(np.mean([r[1] is not None for r in results])),
        "mean_steps": float(steps.mean()),
        "std_steps": float(steps.std(ddof=1)) if len(steps) > 1 else 0.0,
    }


def parse_sweep(specs) -> dict:
    """``["beta=0.2,0.4", ...]`` to ``{"beta": [0.2, 0.4]}``."""
    grid = {}
    for spec in specs or ():
        if "=" not in spec:
            raise ConfigurationError(f"sweep must look like KEY=v1,v2,..., got {spec!r}")
        key, values = spec.split("=", 1)
        key = canonical_key(key)
        if key not in _FIELDS:
            raise ConfigurationError(f"unknown sweep key {key!r}")
        if isinstance(_FIELDS[key].default, tuple):
            raise ConfigurationError(f"cannot sweep array-valued key {key!r}")
        grid[key] = [_coerce(key, v) for v in values.split(",") if v.strip()]
        if not grid[key]:
            raise ConfigurationError(f"empty sweep for {key!r}")
    return grid


def monte_carlo(cfg: ScenarioConfig, sweep: Optional[dict] = None) -> list:
    """Aggregate rows, one per grid point (the cartesian product of ``sweep``)."""
    sweep = sweep or {}
    keys = list(sweep)
    rows = []
    for combo in itertools.product(*(sweep[k] for k in keys)) if keys else [()]:
        point = cfg.replace(**dict(zip(keys, combo))).validate()
        row = dict(zip(keys, combo))
        row.update(aggregate(point, run_many(point)))
        rows.append(row)
    return rows


def rows_to_csv(rows: list) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()

