"""Leaf-pixel filtering, grid connectivity and tree indexing."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hypercube import Hypercube

MIN_TREE_PIXELS = 40

# 8-neighbourhood, scanned in a fixed order so DFS discovery is deterministic
_NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class LeafThresholds:
    ari2: float = 0.80
    sipi: float = 0.88
    p900_max: float = 6000.0
    p780_min: float = 2500.0
    p660_max: float = 1000.0


@dataclass(frozen=True)
class LeafMask:
    """Per-pixel flags, arrays of shape (height, width)."""

    is_leaf: np.ndarray
    in_connected_grid: np.ndarray | None = None

    @property
    def shape(self):
        return self.is_leaf.shape


@dataclass(frozen=True)
class TreeRegion:
    id: int
    xs: np.ndarray
    ys: np.ndarray

    @property
    def pixel_count(self) -> int:
        return int(self.xs.size)

    @property
    def pixels(self) -> set:
        return set(zip(self.xs.tolist(), self.ys.tolist()))


def filter_ari2(p550, p700, p800):
    """Leaf-filter ARI2 (reciprocals summed)."""
    return p800 * (1.0 / p550 + 1.0 / p700)


def filter_sipi(p445, p680, p800):
    return (p800 - p445) / (p800 + p680)


def leaf_rule(ari2, sipi, p900, p780, p660, thresholds: LeafThresholds = LeafThresholds()):
    """Vectorised leaf decision from precomputed quantities.

    Non-finite ARI2/SIPI values (division hazards) compare False and so
    classify the pixel as non-leaf.
    """
    t = thresholds
    with np.errstate(invalid="ignore"):
        return ((np.asarray(ari2) > t.ari2) & (np.asarray(sipi) > t.sipi)
                & (np.asarray(p900) < t.p900_max) & (np.asarray(p780) > t.p780_min)
                & (np.asarray(p660) < t.p660_max))


def _leaf_from_bands(get, thresholds):
    with np.errstate(divide="ignore", invalid="ignore"):
        ari2 = filter_ari2(get(550), get(700), get(800))
        sipi = filter_sipi(get(445), get(680), get(800))
        ari2 = np.where(np.isfinite(ari2), ari2, np.nan)
        sipi = np.where(np.isfinite(sipi), sipi, np.nan)
    return leaf_rule(ari2, sipi, get(900), get(780), get(660), thresholds)


def is_leaf(cube: Hypercube, x: int, y: int, thresholds: LeafThresholds = LeafThresholds()) -> bool:
    if not (0 <= x < cube.width and 0 <= y < cube.height):
        raise IndexError(f"pixel ({x}, {y}) outside cube")
    spectrum = cube.reflectance[y, x].astype(np.float64)
    return bool(_leaf_from_bands(lambda nm: spectrum[cube.nearest_channel(nm)], thresholds))


def leaf_mask(cube: Hypercube, thresholds: LeafThresholds = LeafThresholds()) -> LeafMask:
    return LeafMask(np.asarray(_leaf_from_bands(cube.band, thresholds), dtype=bool))


def connected_grids(mask: LeafMask, k: int = 4, theta_g: int = 10) -> LeafMask:
    """Flag every pixel of each k-by-k tile holding at least ``theta_g`` leaf pixels.

    Tiles start at the top-left corner; partial tiles on the right and bottom
    borders use the same absolute threshold.
    """
    if k < 2:
        raise ValueError("grid side k must be >= 2")
    leaf = np.asarray(mask.is_leaf, dtype=bool)
    h, w = leaf.shape
    gh, gw = -(-h // k), -(-w // k)
    padded = np.zeros((gh * k, gw * k), dtype=np.int64)
    padded[:h, :w] = leaf
    counts = padded.reshape(gh, k, gw, k).sum(axis=(1, 3))
    connected = counts >= theta_g
    flags = np.repeat(np.repeat(connected, k, axis=0), k, axis=1)[:h, :w]
    return LeafMask(leaf, flags)


def extract_trees(mask: LeafMask, min_pixels: int = MIN_TREE_PIXELS,
                  grow_through_leaves: bool = True) -> list[TreeRegion]:
    """Index trees by depth-first search seeded at grid-flagged pixels.

    Seeds are visited in row-major order. The search walks 8-connected
    flagged pixels and, when ``grow_through_leaves`` is set, also leaf pixels
    lying outside flagged tiles, so crown edges in sparse tiles stay
    attached. Each component keeps only its leaf pixels; components with
    fewer than ``min_pixels`` of them are dropped. Survivors are numbered
    from 1 in discovery order.
    """
    if mask.in_connected_grid is None:
        raise ValueError("run connected_grids before extract_trees")
    leaf = np.asarray(mask.is_leaf, dtype=bool)
    seeds = np.asarray(mask.in_connected_grid, dtype=bool)
    walkable = seeds | leaf if grow_through_leaves else seeds
    h, w = leaf.shape
    visited = np.zeros_like(walkable)
    trees = []
    for y0, x0 in zip(*np.nonzero(seeds)):
        if visited[y0, x0]:
            continue
        visited[y0, x0] = True
        stack = [(y0, x0)]
        members = []
        while stack:
            y, x = stack.pop()
            if leaf[y, x]:
                members.append((y, x))
            for dy, dx in _NEIGHBOURS:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and walkable[ny, nx] and not visited[ny, nx]:
                    visited[ny, nx] = True
                    stack.append((ny, nx))
        if len(members) >= min_pixels:
            members.sort()
            ys, xs = np.array(members, dtype=np.intp).T
            trees.append(TreeRegion(len(trees) + 1, xs, ys))
    return trees


def tree_label_image(trees, shape) -> np.ndarray:
    """Integer image with each tree's id on its pixels, 0 elsewhere."""
    labels = np.zeros(shape, dtype=np.int32)
    for t in trees:
        labels[t.ys, t.xs] = t.id
    return labels


def find_trees(cube: Hypercube, thresholds: LeafThresholds = LeafThresholds(), k: int = 4,
               theta_g: int = 10, min_pixels: int = MIN_TREE_PIXELS,
               grow_through_leaves: bool = True) -> list[TreeRegion]:
    """Leaf filter, grid connectivity and DFS indexing in one call."""
    mask = connected_grids(leaf_mask(cube, thresholds), k, theta_g)
    return extract_trees(mask, min_pixels, grow_through_leaves)
