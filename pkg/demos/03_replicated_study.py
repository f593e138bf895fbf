"""A small replicated study in the style of the benchmark tables.

Run with ``python demos/03_replicated_study.py [reps]``.  The acceptance
suite runs the full-size version (20 replicates, 3000 genes).
"""

# %% Setup
import sys

from mmscreen import bench

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 3

# %% High and low signal, fewer genes than the default scenario
for name in ("layout1-high", "layout1-low"):
    sc = bench.get_scenario(name, p=600, s=100)
    recs = bench.run_bench(sc, reps, q0=0.05, cluster=name.endswith("high"))
    print(bench.format_table(name, recs))
    var = sum(r["var_auprc"] for r in recs) / len(recs)
    print(f"variance-ranking AUPRC\t{100 * var:.0f}\n")

# %% The all-null scenario at q0 = 0.1
recs = bench.run_bench(bench.get_scenario("layout1-null"), reps, q0=0.1, cluster=False)
for r in recs:
    print(f"null rep {r['rep']}: {r['n_selected']} selected, threshold {r['threshold']}")
