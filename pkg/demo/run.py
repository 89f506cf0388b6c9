"""
Calibrates a (coarse) noise predictor, then plans and checks the
assembly of a small pyramid. All outputs are written in demo/output.
"""

import sys
from pathlib import Path

from markerplan.cli import main
from markerplan.structure import pyramid

here = Path(__file__).parent.resolve()
output = here / "output"
output.mkdir(exist_ok=True)
(output / "plan.jsonl").unlink(missing_ok=True)

structure = output / "structure.json"
pyramid(5).save(structure)

common = ["--config", str(here / "settings.toml"), "--vars", str(here / "vars.toml")]

steps = [
    ["calibrate", "--seed", "0", "--out", str(output / "predictor.json")]
    + ["--report", str(output / "calibration.json")],
    ["plan", "--structure", str(structure), "--markers", "3", "--radius", "3"]
    + ["--seed", "0", "--out", str(output / "plan.jsonl")],
    ["check", "--structure", str(structure), "--plan", str(output / "plan.jsonl")]
    + ["--predictor", str(output / "predictor.json"), "--out", str(output / "report.json")],
    ["sweep", "--structure", str(structure), "--radii", "1.5", "2", "3", "4"]
    + ["--predictor", str(output / "predictor.json"), "--seed", "0"]
    + ["--out", str(output / "sweep.csv"), "--svg", str(output / "sweep.svg")],
]

for step in steps:
    if step[0] == "check" and not (output / "plan.jsonl").exists():
        # planning failed (exit code 3): nothing to check
        continue
    status = main(step + common)
    if status not in (0, 3, 4, 5):
        sys.exit(status)
