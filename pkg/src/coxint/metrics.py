"""Posterior summaries: per-point quantiles, SSE against a known truth,
credible-interval coverage and width."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .samplers import PosteriorSamples

PROBS = (0.025, 0.25, 0.5, 0.75, 0.975)


@dataclass
class EvalReport:
    """Summaries of retained draws over every state slot.

    ``quantiles`` has one row per slot (grid, observed, integral) and one
    column per probability in :data:`PROBS`.  SSE and coverage are reported
    separately over grid and observed slots and are ``None`` without a truth.
    ``ci_width`` is the average 95% interval width over the grid slots
    (over all value slots when there is no grid).
    """

    quantiles: np.ndarray
    labels: list
    n_draws: int
    sse_grid: float | None = None
    sse_obs: float | None = None
    coverage_grid: float | None = None
    coverage_obs: float | None = None
    ci_width: float | None = None

    def to_dict(self) -> dict:
        return {
            "n_draws": self.n_draws,
            "probs": list(PROBS),
            "labels": list(self.labels),
            "quantiles": self.quantiles.tolist(),
            "sse_grid": self.sse_grid,
            "sse_obs": self.sse_obs,
            "coverage_grid": self.coverage_grid,
            "coverage_obs": self.coverage_obs,
            "ci_width": self.ci_width,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _block_stats(q, truth):
    med = q[:, PROBS.index(0.5)]
    lo = q[:, 0]
    hi = q[:, -1]
    sse = float(np.sum((med - truth) ** 2))
    coverage = float(np.mean((truth >= lo) & (truth <= hi)))
    return sse, coverage


def summarize(samples: PosteriorSamples, truth=None) -> EvalReport:
    """Empirical quantiles of the retained draws, plus truth-based metrics.

    ``truth`` holds the true intensity at the value points (grid then
    observed); when omitted only the quantiles are produced.  Quantiles use
    the linear-interpolation (type 7) estimator.
    """
    if samples.n_draws < 2:
        raise ValueError("need at least two retained draws to summarize")
    lay = samples.layout
    q = np.quantile(samples.lam_draws, PROBS, axis=0, method="linear").T

    sse_grid = sse_obs = cov_grid = cov_obs = None
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        if truth.shape != (lay.n_values,):
            raise ValueError(f"truth must cover the {lay.n_values} value points")
        if lay.n_grid:
            sse_grid, cov_grid = _block_stats(q[lay.grid_slice], truth[: lay.n_grid])
        if lay.n_obs:
            sse_obs, cov_obs = _block_stats(q[lay.obs_slice], truth[lay.n_grid :])

    width_block = q[lay.grid_slice] if lay.n_grid else q[: lay.n_values]
    ci_width = float(np.mean(width_block[:, -1] - width_block[:, 0]))
    return EvalReport(
        quantiles=q,
        labels=lay.labels(),
        n_draws=samples.n_draws,
        sse_grid=sse_grid,
        sse_obs=sse_obs,
        coverage_grid=cov_grid,
        coverage_obs=cov_obs,
        ci_width=ci_width,
    )


def quantile_rows(report: EvalReport, points=None, include=("grid", "integral")):
    """Flat rows ``(point, q025, q25, q50, q75, q975)`` for plotting.

    ``points`` supplies coordinates for the grid rows; integral rows carry
    their label in the point column.
    """
    rows = []
    grid_seen = 0
    for label, q in zip(report.labels, report.quantiles):
        kind = "integral" if label.startswith("integral") else label
        if kind == "grid" and "grid" in include:
            if points is not None:
                p = points[grid_seen]
                name = f"{p[0]}:{p[1]}" if np.ndim(p) else repr(float(p))
            else:
                name = str(grid_seen)
            grid_seen += 1
            rows.append([name] + [repr(float(v)) for v in q])
        elif kind == "obs" and "obs" in include:
            rows.append(["obs"] + [repr(float(v)) for v in q])
        elif kind == "integral" and "integral" in include:
            rows.append([label] + [repr(float(v)) for v in q])
    return rows


def write_quantiles_csv(path, report: EvalReport, points=None, include=("grid", "integral")):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["point", "q025", "q25", "q50", "q75", "q975"])
        writer.writerows(quantile_rows(report, points, include))
