"""A small size/power study written to CSV.

Desk-scale version of the simulation design: deterministic truncation,
both regularizations, a few exponents c.  Set n_sims and gp.reps higher
for tighter Monte Carlo error.
"""

import sys
import tempfile
from pathlib import Path

from flmsup.harness import StudyConfig, run_study, write_study
from flmsup.testing import GpSettings

out = Path(tempfile.mkdtemp()) / "study.csv"
for rho_kind, snr in (("rho0", None), ("rho1", 0.10)):
    cfg = StudyConfig(rho_kind=rho_kind, snr=snr, n_list=(200,), n_sims=60, c_exponents=(2, 4),
                      schemes=("simple", "ridge"), gp=GpSettings(reps=5000), seed=6, threads=4)
    cells = run_study(cfg, progress=lambda m: print(m, file=sys.stderr))
    path, _ = write_study(cells, cfg, out.with_name(f"{rho_kind}.csv"))
    print(f"\n{rho_kind}:  n   c  scheme  k   W     D     T     log err")
    for c in cells:
        print(f"      {c.n}  {c.c:g}  {c.scheme:6s}  {c.k_sup}  {c.reject_rate_W:.2f}  "
              f"{c.reject_rate_D:.2f}  {c.reject_rate_T:.2f}  {c.mean_log_error:6.2f}")
    print(f"  written to {path}")
