"""Synthetic orchard scenes with known crowns.

Crowns are discs whose spectrum moves linearly from a centre template to an
edge template with distance from the crown centre, so most indices change
monotonically from centre to edge. Each tree also mixes in a stressed
variant of both templates by a random per-tree weight, which gives the
trees distinct index levels. Every template that should count as canopy
passes the default leaf filter, and since that filter is a set of linear
constraints on the spectrum, every mixture of the templates passes too.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hypercube import MAX_REFLECTANCE, Hypercube
from .vegindex import CATALOG, IndexOptions

_ANCHORS = (400, 445, 500, 510, 531, 550, 570, 600, 660, 670, 680, 700, 705, 715, 720,
            726, 734, 740, 747, 750, 780, 800, 900, 970, 1000)

CANOPY_CENTER = (180, 150, 260, 300, 620, 820, 660, 420, 290, 260, 230, 700, 900, 1400, 1700,
                 2100, 2700, 3100, 3500, 3650, 4300, 4500, 4650, 4000, 4200)
CANOPY_EDGE = (170, 140, 320, 370, 640, 900, 760, 520, 400, 330, 260, 950, 1150, 1650, 1900,
               2250, 2650, 2950, 3300, 3450, 4000, 4150, 4250, 3550, 3700)
STRESSED_CENTER = (200, 170, 380, 440, 760, 980, 880, 640, 480, 360, 280, 1100, 1250, 1700,
                   1950, 2300, 2750, 3050, 3350, 3500, 4200, 4500, 4700, 4200, 4300)
STRESSED_EDGE = (160, 130, 400, 470, 780, 1050, 950, 720, 560, 380, 300, 1250, 1400, 1850,
                 2050, 2350, 2700, 2950, 3200, 3350, 4050, 4300, 4450, 3850, 3950)
SOIL = (1100, 1250, 1450, 1500, 1600, 1700, 1800, 1950, 2150, 2200, 2220, 2300, 2320, 2350,
        2370, 2390, 2410, 2430, 2450, 2460, 2550, 2600, 2900, 2850, 2950)
SHADE = (80, 70, 90, 95, 120, 150, 130, 100, 80, 75, 75, 180, 230, 330, 380, 440, 520, 580,
         630, 650, 750, 790, 820, 700, 720)


class PlacementError(RuntimeError):
    pass


@dataclass(frozen=True)
class SceneSpec:
    width: int = 192
    height: int = 192
    n_trees: int = 10
    radius_range: tuple = (9.0, 13.0)
    n_channels: int = 150
    wavelength_range: tuple = (400.0, 1000.0)
    gradient_strength: float = 1.0
    tree_variation: float = 0.8
    noise: float = 0.0
    shade: bool = True
    min_gap: int = 10
    max_attempts: int = 10000
    seed: int = 0
    center_spectrum: tuple = CANOPY_CENTER
    edge_spectrum: tuple = CANOPY_EDGE
    stressed_center: tuple = STRESSED_CENTER
    stressed_edge: tuple = STRESSED_EDGE
    background_spectrum: tuple = SOIL
    shade_spectrum: tuple = SHADE

    def wavelengths(self) -> np.ndarray:
        return np.round(np.linspace(*self.wavelength_range, self.n_channels), 2)

    def resample(self, template) -> np.ndarray:
        return np.interp(self.wavelengths(), _ANCHORS, np.asarray(template, dtype=float))


@dataclass(frozen=True)
class Crown:
    id: int
    center: tuple
    radius: float
    stress: float
    xs: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)

    @property
    def pixels(self) -> set:
        return set(zip(self.xs.tolist(), self.ys.tolist()))


@dataclass(frozen=True)
class Scene:
    cube: Hypercube
    crowns: list
    spec: SceneSpec

    def label_image(self) -> np.ndarray:
        labels = np.zeros((self.cube.height, self.cube.width), dtype=np.int32)
        for c in self.crowns:
            labels[c.ys, c.xs] = c.id
        return labels


def _place(spec: SceneSpec, rng) -> list[tuple[float, float, float]]:
    # only the crown discs need separating: shade is neither leaf nor seed
    placed = []
    attempts = 0
    while len(placed) < spec.n_trees:
        attempts += 1
        if attempts > spec.max_attempts:
            raise PlacementError(
                f"placed {len(placed)} of {spec.n_trees} crowns after {spec.max_attempts} attempts")
        r = rng.uniform(*spec.radius_range)
        margin = r + 2
        if 2 * margin >= min(spec.width, spec.height):
            continue
        cx = rng.uniform(margin, spec.width - margin)
        cy = rng.uniform(margin, spec.height - margin)
        if all(np.hypot(cx - x, cy - y) >= r + q + spec.min_gap for x, y, q in placed):
            placed.append((cx, cy, r))
    return placed


def generate_scene(spec: SceneSpec = SceneSpec()) -> Scene:
    """Render a cube and the ground-truth crown pixel sets for ``spec``."""
    rng = np.random.default_rng(spec.seed)
    placed = _place(spec, rng)
    h, w = spec.height, spec.width
    yy, xx = np.mgrid[:h, :w]
    bg = spec.resample(spec.background_spectrum)
    img = np.broadcast_to(bg, (h, w, bg.size)).copy()
    # gentle soil texture so the background is not perfectly flat
    img *= rng.uniform(0.95, 1.05, size=(h, w, 1))
    c0, e0 = spec.resample(spec.center_spectrum), spec.resample(spec.edge_spectrum)
    c1, e1 = spec.resample(spec.stressed_center), spec.resample(spec.stressed_edge)
    if spec.shade:
        shade = spec.resample(spec.shade_spectrum)
        for cx, cy, r in placed:
            sx, sy = cx + 0.6 * r, cy + 0.6 * r
            img[np.hypot(xx - sx, yy - sy) <= 0.8 * r] = shade
    crowns = []
    for tid, (cx, cy, r) in enumerate(placed, 1):
        stress = float(rng.uniform(0, spec.tree_variation))
        center = (1 - stress) * c0 + stress * c1
        edge = (1 - stress) * e0 + stress * e1
        edge = center + spec.gradient_strength * (edge - center)
        dist = np.hypot(xx - cx, yy - cy)
        inside = dist <= r
        t = (dist[inside] / r)[:, None]
        img[inside] = (1 - t) * center + t * edge
        ys, xs = np.nonzero(inside)
        crowns.append(Crown(tid, (cx, cy), r, stress, xs, ys))
    if spec.noise > 0:
        img += rng.normal(0, spec.noise, size=img.shape)
    img = np.clip(np.rint(img), 0, MAX_REFLECTANCE).astype(np.uint16)
    return Scene(Hypercube(img, spec.wavelengths()), crowns, spec)


def radial_index_profile(spec: SceneSpec, stress: float, n: int = 101,
                         opts: IndexOptions | None = None) -> np.ndarray:
    """Index values along the noise-free centre-to-edge spectrum, shape (n, 21)."""
    opts = opts or IndexOptions()
    wl = spec.wavelengths()
    c = (1 - stress) * spec.resample(spec.center_spectrum) + stress * spec.resample(spec.stressed_center)
    e = (1 - stress) * spec.resample(spec.edge_spectrum) + stress * spec.resample(spec.stressed_edge)
    e = c + spec.gradient_strength * (e - c)
    t = np.linspace(0, 1, n)[:, None]
    spectra = (1 - t) * c + t * e
    out = np.empty((n, len(CATALOG)))

    class _P(dict):
        def __missing__(self, key):
            nm = opts.broadband[key] if isinstance(key, str) else key
            return spectra[:, int(np.argmin(np.abs(wl - nm)))]

    p = _P()
    with np.errstate(divide="ignore", invalid="ignore"):
        for j, ix in enumerate(CATALOG):
            out[:, j] = ix(p, opts)
    return out


def gradient_indices(scene: Scene, min_relative_change: float = 0.05,
                     opts: IndexOptions | None = None) -> list[int]:
    """Catalog positions of indices that change strictly monotonically centre to edge
    on every crown, by at least ``min_relative_change`` of their magnitude."""
    keep = []
    profiles = [radial_index_profile(scene.spec, c.stress, opts=opts) for c in scene.crowns]
    for j in range(len(CATALOG)):
        ok = True
        for prof in profiles:
            v = prof[:, j]
            if not np.all(np.isfinite(v)):
                ok = False
                break
            d = np.diff(v)
            monotone = np.all(d > 0) or np.all(d < 0)
            scale = max(abs(v[0]), abs(v[-1]), 1e-12)
            if not monotone or abs(v[-1] - v[0]) < min_relative_change * scale:
                ok = False
                break
        if ok:
            keep.append(j)
    return keep
