import numpy as np
import pytest

from treeembed.hypercube import Hypercube
from treeembed.synth import SceneSpec, generate_scene


def spectrum_cube(values: dict, wavelengths=None, shape=(1, 1), fill=1000):
    """Cube whose every pixel has ``values[nm]`` at channel ``nm``."""
    wl = np.array(sorted(values if wavelengths is None else wavelengths), dtype=float)
    spec = np.array([values.get(w, fill) for w in wl], dtype=float)
    refl = np.broadcast_to(spec, (*shape, wl.size)).copy()
    return Hypercube(refl, wl)


@pytest.fixture(scope="session")
def scene():
    return generate_scene(SceneSpec(seed=3))


@pytest.fixture(scope="session")
def small_scene():
    return generate_scene(SceneSpec(width=112, height=112, n_trees=4, seed=11))
