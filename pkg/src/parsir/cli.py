"""Command-line front end: ``parsir`` / ``python -m parsir``."""
from __future__ import annotations

import argparse
import sys

from .harness import (ScenarioConfig, monte_carlo, parse_config_text, parse_sweep,
                      rows_to_csv, run_scenario)
from .timing import ConfigurationError, timing_table

EXIT_CONFIG = 2

# flag dest -> ScenarioConfig field
_FLAG_FIELDS = {
    "dims": "dims", "particles": "n_particles", "subfilters": "k_subfilters",
    "alpha": "alpha", "beta": "beta", "std": "std", "step_len": "step_len",
    "steps": "horizon", "runs": "runs", "seed": "seed", "mode": "mode",
    "likelihood": "likelihood_variant", "workers": "workers",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="parsir", description="Parallel SIR source-localization experiments.")
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--preset", choices=("planar", "spatial"), default="planar",
                   help="base scenario before --config and flags are applied")
    p.add_argument("--dims", type=int, choices=(2, 3))
    p.add_argument("--particles", type=int)
    p.add_argument("--subfilters", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--std", type=float)
    p.add_argument("--step-len", dest="step_len", type=float)
    p.add_argument("--steps", type=int, help="horizon in time steps")
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("fixed", "real"))
    p.add_argument("--likelihood", choices=("full", "own-sector"))
    p.add_argument("--workers", type=int, help="worker processes (0 = one per CPU)")
    p.add_argument("--full-counts", action="store_true",
                   help="use 1000 runs per grid point instead of the desk-scale default")
    p.add_argument("--sweep", action="append", metavar="KEY=v1,v2,...",
                   help="grid axis; repeat for a cartesian product")
    p.add_argument("--out", metavar="PATH", help="CSV destination (default stdout)")
    p.add_argument("--timing", action="store_true", help="emit the cycle table only")
    return p


def config_from_args(args) -> ScenarioConfig:
    """Preset, then config file, then flags; later sources win."""
    base = ScenarioConfig.spatial() if args.preset == "spatial" else ScenarioConfig.planar()
    values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                values = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config: {exc}") from exc
    values.update({field: getattr(args, flag) for flag, field in _FLAG_FIELDS.items()
                   if getattr(args, flag) is not None})
    if args.full_counts and "runs" not in values:
        values["runs"] = 1000
    dims = values.get("dims", base.dims)
    if dims != base.dims:
        # switching dimensionality without coordinates: borrow the matching preset's
        other = ScenarioConfig.spatial() if dims == 3 else ScenarioConfig.planar()
        values.setdefault("source_pos", other.source_pos)
        values.setdefault("vehicle_start", other.vehicle_start)
    return base.replace(**values)


def _timing_rows(cfg: ScenarioConfig) -> list:
    ks = [k for k in (1, 2, 4, 8, 16, 32) if k <= cfg.n_particles]
    rows = timing_table(cfg.n_particles, ks, sum(cfg.tau), cfg.f_clk)
    if not rows:
        raise ConfigurationError(f"no valid sub-filter count for N={cfg.n_particles}")
    return rows


def run(args) -> str:
    cfg = config_from_args(args)
    if args.timing:
        return rows_to_csv(_timing_rows(cfg))
    cfg.validate()
    sweep = parse_sweep(args.sweep)
    if sweep or cfg.runs > 1:
        return rows_to_csv(monte_carlo(cfg, sweep))
    return run_scenario(cfg).to_csv()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = run(args)
    except ConfigurationError as exc:
        print(f"parsir: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
