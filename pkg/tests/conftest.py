import numpy as np
import pytest

from mdantenna.stack import Layer, LayerStack, OpticalMaterial


def uniform_stack(n: float = 1.5, thickness: float = 400.0) -> LayerStack:
    """Three layers of one material: optically a homogeneous medium."""
    mat = OpticalMaterial("bulk", n)
    return LayerStack([Layer(mat, None), Layer(mat, thickness), Layer(mat, None)])


def simple_stack(ns, ds) -> LayerStack:
    """ns: per-layer (n, kappa) or n; ds: interior thicknesses (len(ns) - 2)."""
    layers = []
    for i, n in enumerate(ns):
        n, kappa = n if isinstance(n, tuple) else (n, 0.0)
        thickness = None if i == 0 or i == len(ns) - 1 else float(ds[i - 1])
        layers.append(Layer(OpticalMaterial(f"m{i}", n, kappa), thickness))
    return LayerStack(layers)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
