"""Hyperspectral cube container and the two-file header/payload reader.

A cube is stored on disk as a plain-text header (``<stem>.hdr``) next to a
raw band-sequential payload (``<stem>.bsq``) of little-endian unsigned
16-bit integers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_REFLECTANCE = 10000
HEADER_SUFFIX = ".hdr"
PAYLOAD_SUFFIX = ".bsq"


class HypercubeError(ValueError):
    """Raised for malformed cube files or invalid cube contents."""


@dataclass(frozen=True, eq=False)
class Hypercube:
    """Reflectance grid of shape (height, width, channels).

    ``reflectance[y, x, c]`` is the scaled surface reflectance of the pixel
    at column ``x`` and row ``y`` for channel ``c``.
    """

    reflectance: np.ndarray
    wavelengths: np.ndarray
    _lookup: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        refl = np.asarray(self.reflectance)
        wl = np.asarray(self.wavelengths, dtype=np.float64)
        if refl.ndim != 3:
            raise HypercubeError(f"reflectance must be 3-D, got shape {refl.shape}")
        if wl.ndim != 1 or wl.size != refl.shape[2]:
            raise HypercubeError(
                f"{wl.size} wavelengths for {refl.shape[2]} channels")
        if wl.size == 0:
            raise HypercubeError("cube has no spectral channels")
        if np.any(np.diff(wl) <= 0):
            raise HypercubeError("wavelengths must be strictly ascending")
        if refl.size and (refl.min() < 0 or refl.max() > MAX_REFLECTANCE):
            raise HypercubeError(
                f"reflectance outside [0, {MAX_REFLECTANCE}]")
        refl = refl.astype(np.uint16, copy=True)
        refl.flags.writeable = False
        wl = wl.copy()
        wl.flags.writeable = False
        object.__setattr__(self, "reflectance", refl)
        object.__setattr__(self, "wavelengths", wl)

    @property
    def height(self) -> int:
        return self.reflectance.shape[0]

    @property
    def width(self) -> int:
        return self.reflectance.shape[1]

    @property
    def channels(self) -> int:
        return self.reflectance.shape[2]

    def nearest_channel(self, target: float) -> int:
        return nearest_channel(self, target)

    def band(self, target: float) -> np.ndarray:
        """Float image (height, width) at the channel closest to ``target`` nm."""
        key = float(target)
        if key not in self._lookup:
            self._lookup[key] = self.reflectance[:, :, nearest_channel(self, key)].astype(np.float64)
        return self._lookup[key]

    def brightness(self, x: int, y: int, target: float) -> int:
        return brightness(self, x, y, target)

    def __eq__(self, other):
        if not isinstance(other, Hypercube):
            return NotImplemented
        return (np.array_equal(self.reflectance, other.reflectance)
                and np.array_equal(self.wavelengths, other.wavelengths))

    __hash__ = None


def nearest_channel(cube: Hypercube, target: float) -> int:
    """Index of the channel whose wavelength is closest to ``target``.

    Ties go to the lower wavelength.
    """
    # argmin returns the first minimum, which is the lower wavelength
    return int(np.argmin(np.abs(cube.wavelengths - float(target))))


def brightness(cube: Hypercube, x: int, y: int, target: float) -> int:
    """Reflectance of pixel (x, y) at the channel nearest ``target`` nm."""
    if not (0 <= x < cube.width and 0 <= y < cube.height):
        raise IndexError(f"pixel ({x}, {y}) outside {cube.width}x{cube.height} cube")
    return int(cube.reflectance[y, x, nearest_channel(cube, target)])


def _paths(path) -> tuple[Path, Path]:
    path = Path(path)
    stem = path.with_suffix("") if path.suffix in (HEADER_SUFFIX, PAYLOAD_SUFFIX) else path
    return stem.with_suffix(HEADER_SUFFIX), stem.with_suffix(PAYLOAD_SUFFIX)


def _parse_header(text: str) -> dict:
    fields = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise HypercubeError(f"header line {lineno}: expected 'key: value'")
        key, value = line.split(":", 1)
        fields[key.strip().lower()] = value.strip()
    missing = {"samples", "lines", "bands", "wavelengths"} - fields.keys()
    if missing:
        raise HypercubeError(f"header missing keys: {sorted(missing)}")
    try:
        dims = tuple(int(fields[k]) for k in ("samples", "lines", "bands"))
        wavelengths = [float(w) for w in fields["wavelengths"].split(",") if w.strip()]
    except ValueError as exc:
        raise HypercubeError(f"garbled header: {exc}") from None
    if min(dims) < 1:
        raise HypercubeError(f"non-positive dimensions {dims}")
    dtype = fields.get("data_type", "uint16").lower()
    if dtype not in ("uint16", "12"):
        raise HypercubeError(f"unsupported data_type {dtype!r}")
    interleave = fields.get("interleave", "bsq").lower()
    if interleave != "bsq":
        raise HypercubeError(f"unsupported interleave {interleave!r}")
    return {"samples": dims[0], "lines": dims[1], "bands": dims[2],
            "wavelengths": wavelengths}


def load_hypercube(path) -> Hypercube:
    """Read a cube from ``<stem>.hdr`` and ``<stem>.bsq``.

    ``path`` may name either file or the common stem.
    """
    hdr_path, raw_path = _paths(path)
    if not hdr_path.exists():
        raise HypercubeError(f"header not found: {hdr_path}")
    if not raw_path.exists():
        raise HypercubeError(f"payload not found: {raw_path}")
    meta = _parse_header(hdr_path.read_text())
    w, h, c = meta["samples"], meta["lines"], meta["bands"]
    if len(meta["wavelengths"]) != c:
        raise HypercubeError(
            f"header lists {len(meta['wavelengths'])} wavelengths for {c} bands")
    payload = np.fromfile(raw_path, dtype="<u2")
    if payload.size != w * h * c or raw_path.stat().st_size != 2 * w * h * c:
        raise HypercubeError(
            f"payload holds {raw_path.stat().st_size // 2} values, header implies {w * h * c}")
    # band-major, row-major within band
    refl = payload.reshape(c, h, w).transpose(1, 2, 0)
    return Hypercube(refl, np.array(meta["wavelengths"]))


def save_hypercube(cube: Hypercube, path) -> tuple[Path, Path]:
    """Write the header/payload pair; returns both paths."""
    hdr_path, raw_path = _paths(path)
    hdr_path.parent.mkdir(parents=True, exist_ok=True)
    wl = ", ".join(repr(float(w)) for w in cube.wavelengths)
    hdr_path.write_text(
        f"samples: {cube.width}\n"
        f"lines: {cube.height}\n"
        f"bands: {cube.channels}\n"
        "data_type: uint16\n"
        "interleave: bsq\n"
        "byte_order: little\n"
        f"wavelengths: {wl}\n")
    np.ascontiguousarray(cube.reflectance.transpose(2, 0, 1)).astype("<u2").tofile(raw_path)
    return hdr_path, raw_path
