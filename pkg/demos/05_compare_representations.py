"""
Embedding-based versus index-based tree vectors
===============================================

Each tree becomes either a 6720-long concatenation of band embeddings or a
105-long vector of normalised segment means. We cluster both with k-means,
compare the clusterings by purity, run the split-sweep classifiers, and
describe a cluster by its most compact index bands.
"""

import argparse

import numpy as np

from treeembed.analysis import (characterize_cluster, classification_harness, confusion,
                                direct_vectors, kmeans, purity)
from treeembed.banding import build_band_table
from treeembed.embed import EmbedConfig, band_contexts, init_model, train
from treeembed.segments import tree_profile
from treeembed.synth import SceneSpec, generate_scene
from treeembed.treevec import tree_vectors
from treeembed.treex import find_trees
from treeembed.vegindex import compute_all

parser = argparse.ArgumentParser()
parser.add_argument("--epochs", type=int, default=300)
parser.add_argument("--trees", type=int, default=24)
args = parser.parse_args()

# a larger orchard gives the classifiers something to split
spec = SceneSpec(width=320, height=320, n_trees=args.trees, seed=5)
scene = generate_scene(spec)
profiles = [tree_profile(t, compute_all(scene.cube, t)) for t in find_trees(scene.cube)]
table = build_band_table(profiles)
model, _ = train(init_model(84, EmbedConfig(), 0), band_contexts(table), epochs=args.epochs)

tau = tree_vectors(table, model)
direct = direct_vectors(table)
print(f"embedding vectors {tau.shape}, direct vectors {direct.shape}")

###############################################################################
# k-means with k = 4 in both spaces

emb = kmeans(tau, 4, seed=0, tree_ids=table.tree_ids, space="embedding")
dirc = kmeans(direct, 4, seed=0, tree_ids=table.tree_ids, space="direct")
print("confusion (rows: embedding clusters, columns: direct clusters)")
print(confusion(emb, dirc))
print(f"purity {purity(emb, dirc):.3f}")

###############################################################################
# Classifiers trained on each space's own cluster labels

for name, X, labels in (("embedding", tau, emb.labels), ("direct", direct, dirc.labels)):
    for algo in ("gaussian-naive-bayes", "multinomial-logistic"):
        rows = classification_harness(X, labels, algo, test_fractions=(0.12, 0.24, 0.48),
                                      repetitions=20, seed=0)
        accs = " ".join(f"{r.fraction:.2f}:{r.mean_accuracy:.2f}" for r in rows)
        print(f"  {name:9s} {algo:22s} {accs}")

###############################################################################
# What the first embedding cluster has in common

members = np.nonzero(emb.labels == 1)[0]
print(f"cluster 1 has {members.size} trees; most compact coordinates:")
for r in characterize_cluster(members, direct, table, top_n=5):
    print(f"  segment {r.segment}: {r.label:22s} deviation {r.deviation:.2e}")
