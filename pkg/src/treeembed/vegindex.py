"""Hyperspectral vegetation indices.

Every index is evaluated on raw scaled reflectance (0-10000) cast to float.
Narrow-band terms ``p<nm>`` resolve to the closest available channel, and the
broadband terms NIR/Red/Green/Blue resolve through a configurable wavelength
map. Arithmetic hazards (zero denominators, negative radicands) yield NaN,
which is the missing marker used throughout the package.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .hypercube import Hypercube

DEFAULT_BROADBAND = {"NIR": 800.0, "Red": 670.0, "Green": 550.0, "Blue": 445.0}


@dataclass(frozen=True)
class IndexOptions:
    broadband: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_BROADBAND))
    arvi_gamma: float = 1.0
    literature_variants: bool = False


@dataclass(frozen=True)
class VegetationIndex:
    name: str
    long_name: str
    wavelengths: tuple  # narrow-band terms, nm
    broadband: tuple    # broadband tokens used
    formula: Callable = field(repr=False, compare=False)

    def __call__(self, p, opts: IndexOptions):
        return self.formula(p, opts)


def _arvi(p, o):
    rb = p["Red"] - o.arvi_gamma * (p["Blue"] - p["Red"])
    return (p["NIR"] - rb) / (p["NIR"] + rb)


def _mcari2(p, o):
    nir, red, green = p["NIR"], p["Red"], p["Green"]
    radicand = (2 * nir + 1) ** 2 - (6 * nir - 5 * np.sqrt(red)) - 0.5
    return 1.5 * (2.5 * (nir - red) - 1.3 * (nir - green)) / np.sqrt(radicand)


def _mrenvi(p, o):
    top = p[750] - p[705] if o.literature_variants else p[700] - p[705]
    return top / (p[750] + p[705] - 2 * p[445])


def _vrei3(p, o):
    right = p[726] if o.literature_variants else p[720]
    return (p[734] - p[747]) / (p[715] + right)


def _mcari(p, o):
    return p[700] - p[670] - 0.2 * (p[700] - p[550]) * (p[700] / p[670])


CATALOG = (
    VegetationIndex("ARI1", "Anthocyanin Reflectance Index 1", (550, 700), (),
                    lambda p, o: 1 / p[550] - 1 / p[700]),
    VegetationIndex("ARI2", "Anthocyanin Reflectance Index 2", (550, 700, 800), (),
                    lambda p, o: p[800] * (1 / p[550] - 1 / p[700])),
    VegetationIndex("ARVI", "Atmospherically Resistant Vegetation Index", (),
                    ("NIR", "Red", "Blue"), _arvi),
    VegetationIndex("CRI1", "Carotenoid Reflectance Index 1", (510, 550), (),
                    lambda p, o: 1 / p[510] - 1 / p[550]),
    VegetationIndex("CRI2", "Carotenoid Reflectance Index 2", (510, 700), (),
                    lambda p, o: 1 / p[510] - 1 / p[700]),
    VegetationIndex("EVI", "Enhanced Vegetation Index", (), ("NIR", "Red", "Blue"),
                    lambda p, o: (p["NIR"] - p["Red"])
                    / (p["NIR"] + 6.0 * p["Red"] - 7.5 * p["Blue"] + 1)),
    VegetationIndex("MCARI", "Modified Chlorophyll Absorption Reflectance Index",
                    (550, 670, 700), (), _mcari),
    VegetationIndex("MCARI2", "Modified Chlorophyll Absorption Reflectance Index Improved",
                    (), ("NIR", "Red", "Green"), _mcari2),
    VegetationIndex("MRENVI", "Modified Red Edge Normalized Vegetation Index",
                    (445, 700, 705, 750), (), _mrenvi),
    VegetationIndex("MRESRI", "Modified Red Edge Simple Ratio Index", (445, 705, 750), (),
                    lambda p, o: (p[750] - p[445]) / (p[705] - p[445])),
    VegetationIndex("NDVI", "Normalized Difference Vegetation Index", (), ("NIR", "Red"),
                    lambda p, o: (p["NIR"] - p["Red"]) / (p["NIR"] + p["Red"])),
    VegetationIndex("PRI", "Photochemical Reflectance Index", (531, 570), (),
                    lambda p, o: (p[531] - p[570]) / (p[531] + p[570])),
    VegetationIndex("PSRI", "Plant Senescence Reflectance Index", (500, 680, 750), (),
                    lambda p, o: (p[680] - p[500]) / p[750]),
    VegetationIndex("RENDVI", "Red Edge Normalized Difference Vegetation Index", (705, 750), (),
                    lambda p, o: (p[750] - p[705]) / (p[750] + p[705])),
    VegetationIndex("SRI", "Simple Ratio Index", (), ("NIR", "Red"),
                    lambda p, o: p["NIR"] / p["Red"]),
    VegetationIndex("SIPI", "Structure Insensitive Pigment Index", (445, 680, 800), (),
                    lambda p, o: (p[800] - p[445]) / (p[800] + p[680])),
    VegetationIndex("TCARI", "Transformed Chlorophyll Absorption Reflectance Index",
                    (550, 670, 700), (), lambda p, o: 3 * _mcari(p, o)),
    VegetationIndex("VREI1", "Vogelmann Red Edge Index 1", (720, 740), (),
                    lambda p, o: p[740] / p[720]),
    VegetationIndex("VREI2", "Vogelmann Red Edge Index 2", (715, 726, 734, 747), (),
                    lambda p, o: (p[734] - p[747]) / (p[715] - p[726])),
    VegetationIndex("VREI3", "Vogelmann Red Edge Index 3", (715, 720, 726, 734, 747), (),
                    _vrei3),
    VegetationIndex("WBI", "Water Band Index", (900, 970), (),
                    lambda p, o: p[970] / p[900]),
)

INDEX_NAMES = tuple(ix.name for ix in CATALOG)
N_INDICES = len(CATALOG)


def catalog_index(name: str) -> int:
    """Zero-based catalog position of an index name."""
    try:
        return INDEX_NAMES.index(name)
    except ValueError:
        raise KeyError(f"unknown vegetation index {name!r}") from None


class _Resolver(dict):
    """Lazy map from wavelength / broadband token to reflectance values."""

    def __init__(self, fetch, opts: IndexOptions):
        super().__init__()
        self._fetch = fetch
        self._opts = opts

    def __missing__(self, key):
        nm = self._opts.broadband[key] if isinstance(key, str) else key
        value = np.asarray(self._fetch(float(nm)), dtype=np.float64)
        self[key] = value
        return value


def _evaluate(index: VegetationIndex, resolver, opts) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.asarray(index(resolver, opts), dtype=np.float64)
    return np.where(np.isfinite(out), out, np.nan)


def compute_index(cube: Hypercube, x: int, y: int, index, opts: IndexOptions | None = None) -> float:
    """Value of one catalog index at pixel (x, y); NaN on arithmetic hazard."""
    opts = opts or IndexOptions()
    if isinstance(index, str):
        index = CATALOG[catalog_index(index)]
    if not (0 <= x < cube.width and 0 <= y < cube.height):
        raise IndexError(f"pixel ({x}, {y}) outside cube")
    spectrum = cube.reflectance[y, x]
    resolver = _Resolver(lambda nm: spectrum[cube.nearest_channel(nm)], opts)
    return float(_evaluate(index, resolver, opts))


def index_values(cube: Hypercube, xs, ys, opts: IndexOptions | None = None) -> np.ndarray:
    """All catalog indices for the pixels (xs[i], ys[i]); shape (n, 21)."""
    opts = opts or IndexOptions()
    xs = np.asarray(xs, dtype=np.intp)
    ys = np.asarray(ys, dtype=np.intp)
    resolver = _Resolver(lambda nm: cube.reflectance[ys, xs, cube.nearest_channel(nm)], opts)
    out = np.empty((xs.size, N_INDICES))
    for j, index in enumerate(CATALOG):
        out[:, j] = _evaluate(index, resolver, opts)
    return out


def index_image(cube: Hypercube, name: str, opts: IndexOptions | None = None) -> np.ndarray:
    """One index evaluated over the whole image, shape (height, width)."""
    opts = opts or IndexOptions()
    resolver = _Resolver(cube.band, opts)
    return _evaluate(CATALOG[catalog_index(name)], resolver, opts)


@dataclass(frozen=True)
class PixelIndexRows:
    """Per-pixel index table of one tree: 21 values per pixel in catalog order."""

    tree_id: int
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # (n_pixels, 21), NaN = missing

    def __len__(self):
        return self.values.shape[0]


def compute_all(cube: Hypercube, region, opts: IndexOptions | None = None) -> PixelIndexRows:
    """Index rows for every pixel of a tree region."""
    xs, ys = region.xs, region.ys
    return PixelIndexRows(region.id, xs, ys, index_values(cube, xs, ys, opts))
