"""Self-supervised embeddings of vegetation-index bands for hyperspectral tree crowns."""

__version__ = "0.1.0"

from .hypercube import Hypercube, brightness, load_hypercube, nearest_channel, save_hypercube
from .treex import LeafMask, LeafThresholds, TreeRegion, connected_grids, extract_trees, find_trees, is_leaf, leaf_mask
from .vegindex import CATALOG, INDEX_NAMES, IndexOptions, compute_all, compute_index
from .segments import SegmentProfile, assign_segments, monotone_histogram, monotone_run, segment_means, tree_geometry
from .banding import (BandTable, assign_band, band_thresholds, build_band_table, detect_outliers,
                      minmax_normalize, token_name)
from .embed import (CooccurrenceTable, EmbedConfig, EmbeddingModel, band_contexts, forward,
                    gradient_check, init_model, loss, train)
from .treevec import impute_cell, tree_vector, tree_vectors
from .analysis import (ClusterAssignment, characterize_cluster, classification_harness, confusion,
                       direct_vectors, kmeans, nearest_bands_direct, nearest_bands_embedding, purity)
from .synth import SceneSpec, generate_scene
