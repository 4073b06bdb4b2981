#!/usr/bin/env python3
"""
Run every committed figure spec in turn and write one CSV per figure.

    python scripts/run_figures.py --blocks 1000 --workers 4
    python scripts/run_figures.py --only fig4 fig5
"""

import sys
import time
import argparse
import pathlib

BASE_DIR = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(BASE_DIR))

from misalign import config  # noqa: E402
from misalign.errors import MisalignError  # noqa: E402
from misalign.experiments import build_spec, load_spec_file, run_experiment, write_csv  # noqa: E402

FIGURES = ["fig2", "fig3", "fig4", "fig5"]


def run_one(name: str, blocks, workers, seed) -> dict:
    """Run a single figure spec and return a status record"""
    started = time.time()
    try:
        values = load_spec_file(pathlib.Path(config.SPEC_DIR) / f"{name}.spec")
        spec = build_spec(values, {"trials": blocks, "workers": workers, "seed": seed})
        rows = run_experiment(spec)
        path = write_csv(rows, spec.output_path())
        return {"status": "success", "name": name, "rows": len(rows), "path": str(path),
                "seconds": time.time() - started}
    except MisalignError as e:
        return {"status": "error", "name": name, "error": str(e), "seconds": time.time() - started}


def main():
    ap = argparse.ArgumentParser(description="Reproduce all figure sweeps.")
    ap.add_argument("--only", nargs="+", choices=FIGURES, default=FIGURES)
    ap.add_argument("--blocks", type=int, default=None, help="override Monte Carlo blocks per point")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()
    config.setup_logging()

    print("🚀 FIGURE SWEEPS")
    print("=" * 60)
    print(f"📋 Specs from {config.SPEC_DIR}: {', '.join(args.only)}")
    print(f"📁 Results to {config.RESULTS_DIR}")

    results = [run_one(name, args.blocks, args.workers, args.seed) for name in args.only]

    print("\n" + "=" * 60)
    print("📊 SUMMARY")
    print("=" * 60)
    failed = 0
    for r in results:
        if r["status"] == "success":
            print(f"✅ {r['name']}: {r['rows']} rows in {r['seconds']:.1f}s -> {r['path']}")
        else:
            failed += 1
            print(f"❌ {r['name']}: {r['error']}")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
