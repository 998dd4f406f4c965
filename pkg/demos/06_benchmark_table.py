"""Run the canned scenario suite through both methods and print the table.

Equivalent to `safedmp bench --scenario-dir scenarios --out ...` but inline;
with --timing the (non-reproducible) per-step wall-clock columns are filled
as well.
"""

import pathlib
import sys

from safedmp import bench

SCENARIOS = pathlib.Path(__file__).resolve().parent.parent / "scenarios"


def main():
    with_timing = "--timing" in sys.argv[1:]
    paths = sorted(SCENARIOS.glob("*.json"))
    print(f"running {len(paths)} scenarios x 2 methods "
          f"(timing {'on' if with_timing else 'off'}) ...\n")
    scenarios = [bench.load_scenario(p) for p in paths]
    rows = bench.compare(scenarios, with_timing=with_timing)
    sys.stdout.write(bench.report_to_text(rows))

    safe_rows = [r for r in rows if r.method == "safedmp" and r.metrics]
    collisions = sum(r.metrics.collision_count for r in safe_rows)
    print(f"\nsafedmp collisions across the whole suite: {collisions}")


if __name__ == "__main__":
    main()
