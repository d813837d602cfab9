"""
Training band embeddings
========================

A small network scores a token pair by concatenating the two embedding
columns and passing them through a leaky-ReLU hidden layer. Adam fits the
score to the pairs' Jaccard similarity. Tokens that share contexts end up
close together in the embedding space.

Run with a smaller ``--epochs`` for a quick look; the default matches the
pipeline.
"""

import argparse

import numpy as np

from treeembed.banding import build_band_table, parse_token, token_name
from treeembed.embed import (EmbedConfig, band_contexts, gradient_check, init_model, loss,
                             nearest_tokens, nudge_from_kink, train)
from treeembed.segments import tree_profile
from treeembed.synth import SceneSpec, generate_scene
from treeembed.treex import find_trees
from treeembed.vegindex import compute_all

parser = argparse.ArgumentParser()
parser.add_argument("--epochs", type=int, default=2000)
args = parser.parse_args()

scene = generate_scene(SceneSpec(seed=0))
profiles = [tree_profile(t, compute_all(scene.cube, t)) for t in find_trees(scene.cube)]
contexts = band_contexts(build_band_table(profiles))

###############################################################################
# Check the hand-written backpropagation on a tiny model first

tiny = init_model(5, EmbedConfig(embedding_dim=3, hidden=6), seed=1)
print(f"gradient check, max relative error: {gradient_check(nudge_from_kink(tiny, 2, 4), (2, 4, 0.5)):.2e}")

###############################################################################
# Full-size model: 64-dim embeddings, 600 hidden units, 20% dropout

model = init_model(contexts.n_tokens, EmbedConfig(), seed=0)
print(f"initial loss {loss(model, contexts):.5f}")
model, history = train(model, contexts, epochs=args.epochs, seed=0)
for e in sorted({0, len(history) // 4, len(history) // 2, len(history) - 1}):
    print(f"  epoch {e + 1:5d}: loss {history[e]:.5f}")

###############################################################################
# Nearest bands in the embedding space

for name in ("Low EVI", "Very High NDVI", "Mid PSRI"):
    tok = parse_token(name)
    hits = nearest_tokens(model, tok, 3)
    print(f"{name:16s} -> " + ", ".join(token_name(h) for h in hits))
print("embedding matrix:", model.E.shape, "finite:", bool(np.isfinite(model.E).all()))
