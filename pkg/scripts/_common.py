import sys
from pathlib import Path

from qlink.expcli import main

ROOT = Path(__file__).resolve().parents[1]


def run_all(jobs, out_root="out"):
    """Run (verb, config, subdir[, extra args]) jobs; exit with the worst status."""
    worst = 0
    for verb, config, sub, *extra in jobs:
        print(f"== qlink {verb} {config}", flush=True)
        rc = main([verb, "--config", str(ROOT / "configs" / config), "--out", str(Path(out_root) / sub), *extra])
        worst = max(worst, rc)
    sys.exit(worst)
