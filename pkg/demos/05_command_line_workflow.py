"""The simulate -> fit -> evaluate workflow through the command line.

Everything the library does is reachable from the ``coxint`` executable; this
script drives it in-process and shows the artifacts each mode writes.
"""

import json
import pathlib

from coxint import cli

out = pathlib.Path("demo_output/cli")
out.mkdir(parents=True, exist_ok=True)

print("== simulate: constant rate 10 on [0, 5] ==")
rc = cli.main([
    "--mode", "simulate", "--intensity", "constant:10", "--domain", "5",
    "--seed", "42", "--out", str(out / "sim"),
])
events = out / "sim" / "events_sim.csv"
print("exit", rc, "->", events, f"({sum(1 for _ in open(events)) - 1} events)")

print("\n== fit: Brownian-motion kernel, Gibbs-sampled precision ==")
rc = cli.main([
    "--mode", "fit", "--events", str(events), "--domain", "5",
    "--kernel", "bm", "--iters", "4000", "--burnin", "1000",
    "--grid", "100", "--seed", "1", "--out", str(out / "fit"),
])
print("exit", rc, "-> quantiles.csv, theta_trace.csv, report.json")

print("\n== evaluate: same fit scored against the generating intensity ==")
rc = cli.main([
    "--mode", "evaluate", "--events", str(events), "--truth", "constant:10",
    "--domain", "5", "--iters", "4000", "--burnin", "1000",
    "--grid", "100", "--seed", "1", "--out", str(out / "eval"),
])
report = json.loads((out / "eval" / "report.json").read_text())
m = report["metrics"]
print("exit", rc, f"-> SSE {m['sse_grid']:.1f}, coverage {m['coverage_grid']:.0%},"
      f" CI width {m['ci_width']:.2f}")

print("\n== evaluate with replicates: a small simulation study ==")
rc = cli.main([
    "--mode", "evaluate", "--truth", "constant:10", "--domain", "5",
    "--replicates", "4", "--jobs", "1", "--iters", "2000", "--burnin", "500",
    "--grid", "50", "--seed", "9", "--out", str(out / "study"),
])
report = json.loads((out / "study" / "report.json").read_text())
m = report["metrics"]
print("exit", rc, f"-> median SSE {m['median_sse_grid']:.1f},"
      f" median coverage {m['median_coverage_grid']:.0%}")
