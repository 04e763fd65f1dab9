"""Distance curves between toy-corpus contexts.

Each marker word ("rain", "snow", ..., "iron") conditions the bundled
character n-gram model toward a different blend of two description
topics. Comparing markers that sit close together on that blend should
yield small curve areas; comparing opposite ends should yield large
ones. This script prints the AUC matrix for a few markers and one full
curve.
"""

from pathlib import Path

import numpy as np

from ccdae import backends, pipeline

DATA = Path(backends.__file__).parent / "data"

markers = ["rain", "wind", "dust", "clay", "iron"]

model = backends.NGramModel.load(DATA / "toy_ngram.json")
backend = backends.NGramBackend(model)
config = pipeline.CompareConfig(samples_per_input=20, max_tokens=20, seed=0)

print("pairwise curve areas (lower = more alike):")
print("          " + "".join(f"{m:>10s}" for m in markers))
for a in markers:
    row = []
    for b in markers:
        row.append(pipeline.compare(a, b, backend, config).auc)
    print(f"{a:>10s}" + "".join(f"{v:10.3f}" for v in row))

print()
report = pipeline.compare("rain", "iron", backend, config)
curve = report.curve
print(f"rain vs iron: auc={report.auc:.3f}, c_max={curve.c_max:.3f}")
idx = np.linspace(0, curve.capacity_grid.size - 1, 8).astype(int)
print("capacity  distance")
for k in idx:
    print(f"{curve.capacity_grid[k]:8.3f}  {curve.distance[k]:8.3f}")

print()
print(report.explanation_table(top=3))
