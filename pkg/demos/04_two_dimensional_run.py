"""
A 2D run from a config file, then an audit
==========================================

Drives the same code path as ``qtensor-ieq run`` and ``qtensor-ieq audit``.
"""

import tempfile
from pathlib import Path

from qtensor_ieq.config import load_config
from qtensor_ieq.diagnostics import read_csv
from qtensor_ieq.driver import audit, run

cfg = load_config(Path(__file__).with_name("random_2d.ini"))
with tempfile.TemporaryDirectory() as out:
    status = run(cfg, out)
    rows = read_csv(Path(out) / "diagnostics.csv")
    print(f"exit {status}; {len(rows) - 1} steps, E {rows[0].E:.6f} -> {rows[-1].E:.6f}")
    for line in audit(out):
        print(line)
