"""
Vegetation indices from the crown centre to its edge
====================================================

Each crown is cut into five concentric segments around the midpoint of its
two farthest pixels. Averaging the 21 vegetation indices per segment shows
which indices change steadily from the centre outwards.
"""

import numpy as np

from treeembed.segments import monotone_run, monotone_table, tree_geometry, tree_profile
from treeembed.synth import SceneSpec, generate_scene
from treeembed.treex import find_trees
from treeembed.vegindex import INDEX_NAMES, compute_all, compute_index

scene = generate_scene(SceneSpec(seed=0))
trees = find_trees(scene.cube)

###############################################################################
# One pixel, a few indices

x, y = int(trees[0].xs[0]), int(trees[0].ys[0])
for name in ("NDVI", "SIPI", "ARI2", "PSRI"):
    print(f"{name:6s} at ({x}, {y}): {compute_index(scene.cube, x, y, name):.4f}")

###############################################################################
# Geometry and segment means of the first tree

center, radius = tree_geometry(trees[0])
print(f"tree {trees[0].id}: centre ({center[0]:.1f}, {center[1]:.1f}), radius {radius:.2f}")
rows = compute_all(scene.cube, trees[0])
profile = tree_profile(trees[0], rows)
print("pixels per segment:", profile.pixel_counts.tolist())
ndvi = INDEX_NAMES.index("NDVI")
print("NDVI by segment:", np.round(profile.means[:, ndvi], 4).tolist(),
      "-> run", monotone_run(profile.means[:, ndvi]))

###############################################################################
# How many trees show a monotone run of l segments, per index

profiles = [tree_profile(t, compute_all(scene.cube, t)) for t in trees]
table = monotone_table(profiles)
print(f"\n{'index':8s}" + "".join(f"{f'l={l}':>6s}" for l in range(1, 6)))
for name, row in zip(INDEX_NAMES, table):
    print(f"{name:8s}" + "".join(f"{c:6d}" for c in row))
