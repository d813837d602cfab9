"""Pipeline configuration: one INI file with a section per stage."""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import DEFAULT_FRACTIONS
from .embed import EmbedConfig
from .segments import DEFAULT_SEGMENTS
from .synth import SceneSpec
from .treex import LeafThresholds, MIN_TREE_PIXELS
from .vegindex import DEFAULT_BROADBAND, IndexOptions


@dataclass
class RunSection:
    seed: int = 0
    cube: str = ""          # empty: generate a synthetic scene
    n_segments: int = DEFAULT_SEGMENTS
    paper_sentinel: bool = False


@dataclass
class SynthSection:
    width: int = 192
    height: int = 192
    n_trees: int = 10
    radius_min: float = 9.0
    radius_max: float = 13.0
    n_channels: int = 150
    wavelength_min: float = 400.0
    wavelength_max: float = 1000.0
    gradient_strength: float = 1.0
    tree_variation: float = 0.8
    noise: float = 0.0
    shade: bool = True
    min_gap: int = 10


@dataclass
class ExtractSection:
    k: int = 4
    theta_g: int = 10
    ari2: float = 0.80
    sipi: float = 0.88
    p900_max: float = 6000.0
    p780_min: float = 2500.0
    p660_max: float = 1000.0
    min_tree_pixels: int = MIN_TREE_PIXELS
    grow_through_leaves: bool = True


@dataclass
class IndicesSection:
    nir: float = DEFAULT_BROADBAND["NIR"]
    red: float = DEFAULT_BROADBAND["Red"]
    green: float = DEFAULT_BROADBAND["Green"]
    blue: float = DEFAULT_BROADBAND["Blue"]
    arvi_gamma: float = 1.0
    literature_variants: bool = False


@dataclass
class AnalysisSection:
    k: int = 4
    classifiers: tuple = ("gaussian-naive-bayes", "multinomial-logistic")
    test_fractions: tuple = DEFAULT_FRACTIONS
    repetitions: int = 100
    top_n: int = 5
    nn_tokens: tuple = ("Low EVI", "Very High MRENVI", "Very High PSRI", "Mid SRI", "Low TCARI")
    nn_n: int = 3
    nn_metric: str = "euclidean"


@dataclass
class PipelineConfig:
    run: RunSection = field(default_factory=RunSection)
    synth: SynthSection = field(default_factory=SynthSection)
    extract: ExtractSection = field(default_factory=ExtractSection)
    indices: IndicesSection = field(default_factory=IndicesSection)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)

    # typed views for the library modules

    def scene_spec(self) -> SceneSpec:
        s = self.synth
        return SceneSpec(width=s.width, height=s.height, n_trees=s.n_trees,
                         radius_range=(s.radius_min, s.radius_max), n_channels=s.n_channels,
                         wavelength_range=(s.wavelength_min, s.wavelength_max),
                         gradient_strength=s.gradient_strength, tree_variation=s.tree_variation,
                         noise=s.noise, shade=s.shade, min_gap=s.min_gap,
                         seed=derive_seed(self.run.seed, "synth"))

    def leaf_thresholds(self) -> LeafThresholds:
        e = self.extract
        return LeafThresholds(e.ari2, e.sipi, e.p900_max, e.p780_min, e.p660_max)

    def index_options(self) -> IndexOptions:
        i = self.indices
        return IndexOptions({"NIR": i.nir, "Red": i.red, "Green": i.green, "Blue": i.blue},
                            i.arvi_gamma, i.literature_variants)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


SECTIONS = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def derive_seed(root: int, stage: str) -> int:
    """Stable per-stage seed from the root seed and a stage name."""
    digest = hashlib.sha256(f"{int(root)}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def _convert(raw: str, default):
    if isinstance(default, bool):
        value = raw.strip().lower()
        if value in ("1", "true", "yes", "on"):
            return True
        if value in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if default and isinstance(default[0], float):
            return tuple(float(x) for x in items)
        return tuple(items)
    return raw.strip()


def load_config(path=None, seed: int | None = None) -> PipelineConfig:
    """Read an INI config; unknown sections or keys are errors."""
    cfg = PipelineConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        for section in parser.sections():
            if section not in SECTIONS:
                raise ValueError(f"unknown config section [{section}]")
            current = getattr(cfg, section)
            known = {f.name for f in dataclasses.fields(current)}
            updates = {}
            for key, raw in parser.items(section):
                if key not in known:
                    raise ValueError(f"unknown key {key!r} in [{section}]")
                updates[key] = _convert(raw, getattr(current, key))
            setattr(cfg, section, dataclasses.replace(current, **updates))
    if seed is not None:
        cfg.run = dataclasses.replace(cfg.run, seed=seed)
    return cfg


def dump_config(cfg: PipelineConfig, path) -> None:
    parser = configparser.ConfigParser()
    for name, values in cfg.as_dict().items():
        parser[name] = {k: ", ".join(map(str, v)) if isinstance(v, (tuple, list)) else str(v)
                        for k, v in values.items()}
    with open(Path(path), "w") as fh:
        parser.write(fh)
