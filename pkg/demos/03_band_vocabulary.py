"""
From index means to an 84-word vocabulary
=========================================

Every index column (all segments of all trees) is min-max normalised,
screened with the box-plot fences and cut at its quartiles into four bands.
Band b of index j becomes one token, so 21 indices give 84 tokens. Two
tokens are similar when they occur in the same (tree, segment) contexts.
"""

import numpy as np

from treeembed.banding import build_band_table, token_name
from treeembed.embed import band_contexts
from treeembed.segments import tree_profile
from treeembed.synth import SceneSpec, generate_scene
from treeembed.treex import find_trees
from treeembed.vegindex import INDEX_NAMES, compute_all

scene = generate_scene(SceneSpec(seed=0))
profiles = [tree_profile(t, compute_all(scene.cube, t)) for t in find_trees(scene.cube)]
table = build_band_table(profiles)
print(f"{table.n_trees} trees x {table.n_segments} segments x {table.n_indices} indices, "
      f"vocabulary of {table.vocab_size} tokens")

j = INDEX_NAMES.index("NDVI")
q1, q2, q3 = table.thresholds[j]
print(f"NDVI quartiles on the normalised scale: {q1:.3f} {q2:.3f} {q3:.3f}")
print(f"cells screened out as outliers: {table.outlier.sum()}")

###############################################################################
# Bands of the first tree, centre to edge

for s in range(table.n_segments):
    names = [token_name(j * 4 + b) for j, b in enumerate(table.bands[0, s], 0) if b][:4]
    print(f"  segment {s + 1}: " + ", ".join(names) + ", ...")

###############################################################################
# Co-occurrence over contexts and the most similar token pairs

co = band_contexts(table)
J = co.jaccard.copy()
np.fill_diagonal(J, -1)
i, k = np.unravel_index(np.argsort(J, axis=None)[::-1][:10:2], J.shape)
for a, b in zip(i, k):
    print(f"  {token_name(a + 1):22s} ~ {token_name(b + 1):22s} Jaccard {J[a, b]:.2f}")
