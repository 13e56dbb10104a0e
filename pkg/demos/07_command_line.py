"""The command-line interface, driven from Python.

Equivalent shell usage:

    flmsup estimate data.csv --truth rho1
    flmsup test data.csv --seed 1 --baselines
    flmsup simulate-null --k 3 --reps 20000
"""

import tempfile
from pathlib import Path

import numpy as np

from flmsup.cli import main
from flmsup.fnspace import Grid, coefficient_function, generate_dataset

grid = Grid.uniform(100)
data = generate_dataset(400, coefficient_function("rho1", grid), 0.5, np.random.default_rng(7))
path = Path(tempfile.mkdtemp()) / "data.csv"
# first column Y, then the curve on the equispaced grid
np.savetxt(path, np.column_stack([data.Y, data.X]), delimiter=",", fmt="%.17g")

for argv in (["estimate", str(path), "--truth", "rho1"],
             ["test", str(path), "--seed", "1", "--baselines", "--reps", "5000"],
             ["simulate-null", "--k", "3", "--reps", "5000", "--seed", "1"]):
    print("$ flmsup " + " ".join(argv))
    code = main(argv)
    print(f"(exit {code})\n")
