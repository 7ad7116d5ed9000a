import numpy as np
import pytest

from relulens.network import Layer, NetworkSpec


def make_random_network(rng, dims):
    """Random net for a list of layer widths, e.g. [2, 8, 8, 1]."""
    layers = []
    for i in range(len(dims) - 1):
        layers.append(
            Layer(
                weights=rng.normal(size=(dims[i + 1], dims[i])),
                bias=rng.normal(size=dims[i + 1]),
            )
        )
    return NetworkSpec(layers=tuple(layers))


def random_architecture(rng, max_input=5, max_hidden_layers=3, max_width=8):
    input_dim = int(rng.integers(1, max_input + 1))
    n_hidden = int(rng.integers(1, max_hidden_layers + 1))
    widths = [int(rng.integers(1, max_width + 1)) for _ in range(n_hidden)]
    return [input_dim] + widths + [1]


@pytest.fixture
def passthrough_net():
    """1-1-1 identity-ish net: relu(x) on the logit scale."""
    return NetworkSpec(
        layers=(Layer(weights=[[1.0]], bias=[0.0]), Layer(weights=[[1.0]], bias=[0.0]))
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
