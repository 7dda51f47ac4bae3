#!/usr/bin/env python3
"""The whole pipeline in one go, then a next-month forecast.

Writes a demo workspace (synthetic CSV + config), runs ingest through
reports, prints the selection and master scores, and finally consults the
stored run for the forthcoming month's forecast. Everything is seeded:
rerunning reproduces every number bit-exactly.

Same thing from the command line:

    spreadnet master  -c demo_workspace/config.json
    spreadnet report  --run <run dir>
    spreadnet predict --run <run dir>
"""

import tempfile
from pathlib import Path

from spreadnet.demo import write_demo_workspace
from spreadnet.pipeline import PipelineConfig, predict_from_run, run_pipeline

workdir = Path(tempfile.mkdtemp(prefix="spreadnet_demo_"))
csv_path, config_path = write_demo_workspace(workdir, restarts=10)
print(f"workspace: {workdir}")

config = PipelineConfig.from_file(config_path)
result = run_pipeline(config, through="report")
print(f"stages completed: {', '.join(result.stages)}")
print(f"{len(result.matrices)} matrices -> {len(result.candidates)} candidates")

print("\ntop 10 members by out-of-sample ISM:")
for rank, c in enumerate(result.members, start=1):
    ep = "-" if c.score.norm_ep is None else f"{c.score.norm_ep:6.2f}%"
    print(f"  {rank:2d}. {c.name}  ISM={c.score.ism!r:<22} normEP={ep}")

m = result.master.score
print(f"\nmaster: ISM={m.ism!r}, "
      f"normEP={'-' if m.norm_ep is None else f'{m.norm_ep:.2f}%'}, "
      f"hit rate {m.hit_rate:.2f}")

print(f"\nrun directory: {result.run_dir}")
for path in result.report_paths:
    print(f"  reports/{path.name}")

forecast = predict_from_run(result.run_dir)
arrow = "rise" if forecast.forecast.direction > 0 else "fall"
print(f"\nforecast for {forecast.target_month}: {forecast.forecast.value:.2f} "
      f"({arrow} vs last actual {forecast.last_actual:.2f}; "
      f"{forecast.forecast.up_vote_percent:.0f}% of members vote up)")
