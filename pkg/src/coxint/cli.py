"""Command-line workflow: simulate, fit, evaluate, predict.

Configuration comes from an optional TOML or JSON file plus flag overrides;
every run writes plot-ready CSV artifacts and a ``report.json`` that echoes
the configuration, seed and library versions needed to re-run it.  The only
environment variable honoured is ``COXINT_LOG_LEVEL``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__, hyper, kernels, metrics, model, samplers, simulate
from .kernels import DomainError, Interval, Rectangle
from .model import Dataset, midpoint_grid
from .samplers import ChainConfig, run_chain

logger = logging.getLogger(__name__)


class ParseError(ValueError):
    """Malformed input file; the message names the offending line."""


class CliError(ValueError):
    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code


@dataclass
class RunConfig:
    mode: str = "fit"
    events: str | None = None
    bins: str | None = None
    out: str = "."
    domain: str | None = None
    offset: str | None = None
    kernel: str = "bm"
    theta: str | None = None
    hyper: str = "map"
    epsilon: float = 1e-8
    iters: int = 50_000
    burnin: int = 10_000
    thin: int = 1
    sampler: str = "ess"
    seed: int = 0
    grid: int = 100
    intensity: str | None = None
    truth: str | None = None
    scale: float = 1.0
    bin_tail: str | None = None
    replicates: int = 1
    jobs: int = 1

    def chain_config(self) -> ChainConfig:
        return ChainConfig(
            n_burnin=self.burnin,
            n_samples=self.iters,
            thin=self.thin,
            sampler=self.sampler,
            seed=self.seed,
        )


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------


def _parse_domain(cfg: RunConfig):
    if cfg.domain is None:
        raise CliError("config", "a --domain is required (e.g. '50' or '0:1,0:1')")
    text = cfg.domain.strip()
    if "," in text:
        try:
            xs, ys = text.split(",")
            x0, x1 = (float(v) for v in xs.split(":"))
            y0, y1 = (float(v) for v in ys.split(":"))
        except ValueError as exc:
            raise CliError("config", f"cannot parse 2d domain {text!r}") from exc
        off = (0.0, 0.0)
        if cfg.offset:
            off = tuple(float(v) for v in cfg.offset.split(","))
        return Rectangle((x0, x1), (y0, y1), offset=off)
    try:
        if ":" in text:
            lo, hi = (float(v) for v in text.split(":"))
            if lo != 0.0:
                raise CliError("config", "1d domains start at 0; use --offset to translate")
            length = hi
        else:
            length = float(text)
    except ValueError as exc:
        raise CliError("config", f"cannot parse domain {text!r}") from exc
    return Interval(length, offset=float(cfg.offset) if cfg.offset else 0.0)


def _parse_intensity(text: str, cfg: RunConfig):
    name, _, arg = text.partition(":")
    if name == "lambda1":
        return simulate.benchmark_lambda1(cfg.scale)
    if name == "lambda2":
        return simulate.benchmark_lambda2(cfg.scale)
    if name == "constant":
        if not arg:
            raise CliError("config", "constant intensity needs a rate: constant:<rate>")
        return simulate.IntensitySpec(
            kind="constant", domain=_parse_domain(cfg), rate=float(arg), scale=cfg.scale
        )
    if name == "table":
        grid, values = _read_table(arg)
        dom = _parse_domain(cfg) if cfg.domain else None
        return simulate.from_table(grid, values, dom, scale=cfg.scale)
    raise CliError("config", f"unknown intensity {text!r}")


def _read_table(path):
    grid, values = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if lineno == 1:
                continue
            try:
                grid.append(float(row[0]))
                values.append(float(row[1]))
            except (IndexError, ValueError) as exc:
                raise ParseError(f"{path}: line {lineno}: expected 't,value'") from exc
    return np.asarray(grid), np.asarray(values)


def load_config(path: str) -> dict:
    if path.endswith(".json"):
        with open(path) as fh:
            return json.load(fh)
    try:
        import tomllib as toml
    except ModuleNotFoundError:
        import tomli as toml
    with open(path, "rb") as fh:
        return toml.load(fh)


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def _read_events(path, domain) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if header is None:
                header = [c.strip() for c in row]
                if header not in (["t"], ["x", "y"]):
                    raise ParseError(
                        f"{path}: line 1: expected header 't' or 'x,y', got {','.join(header)!r}"
                    )
                if len(header) != domain.ndim:
                    raise ParseError(f"{path}: line 1: header does not match the domain dimension")
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: non-numeric value") from exc
            if len(vals) != domain.ndim:
                raise ParseError(f"{path}: line {lineno}: expected {domain.ndim} columns")
            if not np.all(domain.contains(np.asarray(vals if domain.ndim == 2 else vals[0]))):
                raise ParseError(f"{path}: line {lineno}: event outside the domain")
            rows.append(vals[0] if domain.ndim == 1 else vals)
    if header is None:
        raise ParseError(f"{path}: empty file")
    return np.asarray(rows, dtype=float)


def _read_bins(path, domain):
    expected = ["start", "end", "count"] if domain.ndim == 1 else ["x0", "x1", "y0", "y1", "count"]
    bins = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if header is None:
                header = [c.strip() for c in row]
                if header != expected:
                    raise ParseError(
                        f"{path}: line 1: expected header {','.join(expected)!r}"
                    )
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: non-numeric value") from exc
            if len(vals) != len(expected):
                raise ParseError(f"{path}: line {lineno}: expected {len(expected)} columns")
            count = vals[-1]
            if count != int(count) or count < 0:
                raise ParseError(f"{path}: line {lineno}: count must be a nonnegative integer")
            if domain.ndim == 1:
                region = (vals[0], vals[1])
            else:
                region = ((vals[0], vals[1]), (vals[2], vals[3]))
            bins.append((region, int(count)))
    return bins


def _perturb_duplicates(events: np.ndarray, domain, rng) -> np.ndarray:
    """Nudges exact duplicate coordinates so the prior stays nondegenerate."""
    if events.shape[0] < 2:
        return events
    events = events.copy()
    scale = 1e-9 * (domain.length if domain.ndim == 1 else max(
        domain.x_range[1] - domain.x_range[0], domain.y_range[1] - domain.y_range[0]
    ))
    view = events if events.ndim == 2 else events[:, None]
    _, first = np.unique(view, axis=0, return_index=True)
    dup = np.setdiff1d(np.arange(events.shape[0]), first)
    if dup.size:
        logger.warning("perturbing %d duplicate event coordinates by ~%.1e", dup.size, scale)
        noise = rng.uniform(-scale, scale, size=view[dup].shape)
        if domain.ndim == 1:
            lo, hi = np.array([0.0]), np.array([domain.length])
        else:
            lo = np.array([domain.x_range[0], domain.y_range[0]])
            hi = np.array([domain.x_range[1], domain.y_range[1]])
        view[dup] = np.clip(view[dup] + noise, lo, hi)
    return events


def ingest(events_path, bins_path, domain, grid_size: int = 100, seed: int = 0) -> Dataset:
    """Validated dataset from CSV files, with the prediction grid appended.

    Exact duplicate event coordinates are perturbed by uniform noise of
    magnitude ``1e-9`` of the domain extent (logged); malformed rows and
    out-of-domain points raise :class:`ParseError` naming the line.
    """
    events = _read_events(events_path, domain) if events_path else np.empty(0)
    bins = _read_bins(bins_path, domain) if bins_path else []
    if np.size(events):
        events = _perturb_duplicates(events, domain, np.random.default_rng(seed))
    return Dataset(
        domain=domain, events=events, bins=tuple(bins), grid=midpoint_grid(domain, grid_size)
    )


# ---------------------------------------------------------------------------
# the four modes
# ---------------------------------------------------------------------------


def _write_events_csv(path, events, domain):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if domain.ndim == 1:
            writer.writerow(["t"])
            writer.writerows([[repr(float(t))] for t in np.atleast_1d(events)])
        else:
            writer.writerow(["x", "y"])
            writer.writerows([[repr(float(x)), repr(float(y))] for x, y in np.atleast_2d(events)])


def _versions() -> dict:
    import scipy

    return {
        "coxint": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": sys.version.split()[0],
    }


def _write_report(cfg: RunConfig, outdir, payload: dict):
    report = {"mode": cfg.mode, "config": asdict(cfg), "seed": cfg.seed, "versions": _versions()}
    report.update(payload)
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2)


def _resolve_kernel(cfg: RunConfig, data: Dataset, truth=None):
    family = cfg.kernel
    if family in ("bm", "bs"):
        return kernels.make_kernel(family, [1.0]), True
    if cfg.theta:
        params = [float(v) for v in cfg.theta.split(",")]
        return kernels.make_kernel(family, params), False
    map_cfg = hyper.MapConfig(seed=cfg.seed)
    if cfg.hyper == "mle":
        if truth is None:
            raise CliError("config", "--hyper mle needs a --truth intensity")
        fit = hyper.fit_oracle_mle(truth, data, family, map_cfg)
    else:
        fit = hyper.fit_map(data, family, map_cfg)
    logger.info("estimated %s hyperparameters: %s", family, fit.theta)
    return fit.kernel, False


def _apply_bin_tail(events, domain, spec_text):
    try:
        start, width = (float(v) for v in spec_text.split(":"))
    except ValueError as exc:
        raise CliError("config", f"cannot parse --bin-tail {spec_text!r}") from exc
    regions = simulate.tail_bins(domain.length, start, width)
    kept, counts = simulate.bin_events(events, regions)
    return kept, tuple(zip(regions, (int(c) for c in counts)))


def _fit_once(cfg: RunConfig, data: Dataset, truth_spec=None, seed=None):
    kernel, sample_theta = _resolve_kernel(cfg, data, truth_spec)
    chain_cfg = cfg.chain_config()
    if seed is not None:
        chain_cfg.seed = seed
    samples = run_chain(data, kernel, chain_cfg, epsilon=cfg.epsilon)
    truth_vals = truth_spec.evaluate(data.value_points) if truth_spec is not None else None
    report = metrics.summarize(samples, truth_vals)
    return samples, report


def _write_fit_artifacts(cfg: RunConfig, outdir, data, samples, report):
    metrics.write_quantiles_csv(
        os.path.join(outdir, "quantiles.csv"), report, points=data.grid
    )
    if samples.theta_draws is not None:
        with open(os.path.join(outdir, "theta_trace.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theta"])
            writer.writerows([[repr(float(t))] for t in samples.theta_draws])


def _replicate_metrics(args):
    cfg_dict, rep_seed = args
    cfg = RunConfig(**cfg_dict)
    truth = _parse_intensity(cfg.truth, cfg)
    rng = np.random.default_rng(rep_seed)
    events = simulate.simulate_thinning(truth, rng)
    bins = ()
    if cfg.bin_tail:
        events, bins = _apply_bin_tail(events, truth.domain, cfg.bin_tail)
    data = Dataset(
        domain=truth.domain,
        events=events,
        bins=bins,
        grid=midpoint_grid(truth.domain, cfg.grid),
    )
    _, report = _fit_once(cfg, data, truth, seed=rep_seed)
    return {
        "seed": int(rep_seed),
        "n_events": int(data.n_events),
        "sse_grid": report.sse_grid,
        "coverage_grid": report.coverage_grid,
        "ci_width": report.ci_width,
    }


def run(cfg: RunConfig) -> int:
    """Execute one configured run; returns the process exit status."""
    outdir = cfg.out
    os.makedirs(outdir, exist_ok=True)

    if cfg.mode == "simulate":
        if not cfg.intensity:
            raise CliError("config", "simulate mode needs an --intensity")
        spec = _parse_intensity(cfg.intensity, cfg)
        events = simulate.simulate_thinning(spec, np.random.default_rng(cfg.seed))
        n_total = int(np.atleast_1d(events).shape[0])
        payload = {"n_events": n_total}
        if cfg.bin_tail:
            events, bins = _apply_bin_tail(events, spec.domain, cfg.bin_tail)
            with open(os.path.join(outdir, "bins_sim.csv"), "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["start", "end", "count"])
                writer.writerows([[repr(a), repr(b), c] for (a, b), c in bins])
            payload["n_binned"] = n_total - int(np.atleast_1d(events).shape[0])
        _write_events_csv(os.path.join(outdir, "events_sim.csv"), events, spec.domain)
        _write_report(cfg, outdir, payload)
        return 0

    if cfg.mode in ("fit", "predict", "evaluate"):
        truth_spec = _parse_intensity(cfg.truth, cfg) if cfg.truth else None
        if cfg.mode == "evaluate" and truth_spec is None:
            raise CliError("config", "evaluate mode needs a --truth intensity")

        if cfg.mode == "evaluate" and cfg.replicates > 1:
            seeds = [
                int(ss.generate_state(1)[0])
                for ss in np.random.SeedSequence(cfg.seed).spawn(cfg.replicates)
            ]
            jobs = [(asdict(cfg), s) for s in seeds]
            if cfg.jobs > 1:
                with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                    results = list(pool.map(_replicate_metrics, jobs))
            else:
                results = [_replicate_metrics(j) for j in jobs]
            agg = {
                "replicates": results,
                "median_sse_grid": float(np.median([r["sse_grid"] for r in results])),
                "median_coverage_grid": float(np.median([r["coverage_grid"] for r in results])),
                "median_ci_width": float(np.median([r["ci_width"] for r in results])),
            }
            _write_report(cfg, outdir, {"metrics": agg})
            return 0

        if not cfg.events:
            raise CliError("config", f"{cfg.mode} mode needs an --events file")
        domain = truth_spec.domain if (truth_spec and not cfg.domain) else _parse_domain(cfg)
        data = ingest(cfg.events, cfg.bins, domain, cfg.grid, seed=cfg.seed)
        if cfg.bin_tail:
            events, bins = _apply_bin_tail(data.events, domain, cfg.bin_tail)
            data = Dataset(domain=domain, events=events, bins=bins, grid=data.grid)
        samples, report = _fit_once(cfg, data, truth_spec)
        _write_fit_artifacts(cfg, outdir, data, samples, report)
        _write_report(
            cfg,
            outdir,
            {"metrics": report.to_dict(), "diagnostics": samples.diagnostics},
        )
        return 0

    raise CliError("config", f"unknown mode {cfg.mode!r}")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coxint",
        description="Bayesian intensity inference for Poisson point processes",
    )
    p.add_argument("--config", help="TOML or JSON file with the same keys as the flags")
    p.add_argument("--mode", choices=["simulate", "fit", "evaluate", "predict"])
    p.add_argument("--events", help="event CSV (header 't' or 'x,y')")
    p.add_argument("--bins", help="count-bin CSV (header 'start,end,count' or 'x0,x1,y0,y1,count')")
    p.add_argument("--out", help="output directory")
    p.add_argument("--domain", help="'T' for [0,T], or 'x0:x1,y0:y1'")
    p.add_argument("--offset", help="translation applied before kernel evaluation")
    p.add_argument("--kernel", choices=["bm", "se", "bs", "product_se"])
    p.add_argument("--theta", help="comma-separated fixed kernel hyperparameters")
    p.add_argument("--hyper", choices=["map", "mle"], help="hyperparameter estimator for fixed-theta kernels")
    p.add_argument("--epsilon", type=float, help="diagonal perturbation of the corrected precision")
    p.add_argument("--iters", type=int, help="retained iterations")
    p.add_argument("--burnin", type=int, help="burn-in iterations")
    p.add_argument("--thin", type=int)
    p.add_argument("--sampler", choices=["ess", "nuts"])
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", type=int, help="prediction grid points per axis")
    p.add_argument("--intensity", help="simulate-mode intensity (lambda1|lambda2|constant:R|table:F)")
    p.add_argument("--truth", help="ground-truth intensity for evaluate mode")
    p.add_argument("--scale", type=float, help="intensity scale multiplier")
    p.add_argument("--bin-tail", dest="bin_tail", help="'start:width' converts trailing events to count bins")
    p.add_argument("--replicates", type=int, help="independent simulate+fit replicates (evaluate mode)")
    p.add_argument("--jobs", type=int, help="worker processes for replicates")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("COXINT_LOG_LEVEL", "WARNING").upper())
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    fields = {f for f in RunConfig.__dataclass_fields__}
    settings = {}
    if args.config:
        try:
            file_cfg = load_config(args.config)
        except (OSError, ValueError) as exc:
            print(f"error: config: {exc}", file=sys.stderr)
            return 2
        unknown = set(file_cfg) - fields
        if unknown:
            print(f"error: config: unknown keys {sorted(unknown)}", file=sys.stderr)
            return 2
        settings.update(file_cfg)
    settings.update({k: v for k, v in vars(args).items() if k in fields and v is not None})

    cfg = RunConfig(**settings)
    try:
        return run(cfg)
    except CliError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 2
    except (ParseError, DomainError) as exc:
        print(f"error: input: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: runtime: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
