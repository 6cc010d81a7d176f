"""
Estimating on a training file and projecting a test file
========================================================

The command-line workflow on CSV files: estimate a two-dimensional basis
from a training set, map a test set through the training transform and
report how each sufficient predictor correlates with the response.
"""

import tempfile
from pathlib import Path

import numpy as np

from cqspace.cli import main
from cqspace.data import format_matrix_csv
from cqspace.simulation import ModelSpec, generate

workdir = Path(tempfile.mkdtemp())
full = generate(ModelSpec("VI", n=300, p=6, seed=6))
header = ["y"] + full.names
rows = np.column_stack([full.y, full.x])
(workdir / "train.csv").write_text(format_matrix_csv(rows[:160], header))
(workdir / "test.csv").write_text(format_matrix_csv(rows[160:], header))

main(["estimate", "--data", str(workdir / "train.csv"), "--tau", "0.5", "--d", "2",
      "--out", str(workdir / "basis.csv")])
print((workdir / "basis.csv.json").read_text())

# prints the correlation report as JSON
main(["project", "--basis", str(workdir / "basis.csv"), "--train", str(workdir / "train.csv"),
      "--test", str(workdir / "test.csv"), "--out", str(workdir / "predictors.csv")])
