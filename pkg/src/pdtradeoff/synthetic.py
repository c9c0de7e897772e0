"""Small reference models used by tests, scripts and the CLI."""

from __future__ import annotations

import numpy as np

from .model import (
    Alphabet,
    ConditionalKernel,
    DegradationModel,
    DiscreteDistribution,
    Estimator,
    gaussian_noise_channel,
)


def trinary_model(p1: float = 0.45, p0: float = 0.1, sigma: float = 1.0,
                  lo: float = -7.0, hi: float = 7.0, n_bins: int = 1401) -> DegradationModel:
    """X in {-1, 0, 1} with masses (p1, p0, p1), observed through Gaussian noise."""
    return gaussian_noise_channel([-1.0, 0.0, 1.0], sigma, (lo, hi, n_bins),
                                  prior=[p1, p0, p1])


def binary_symmetric_model(flip: float = 0.1, prior=(0.5, 0.5), values=(0.0, 1.0)
                           ) -> DegradationModel:
    x = Alphabet.from_values(values)
    y = Alphabet(("y0", "y1"))
    ch = np.array([[1 - flip, flip], [flip, 1 - flip]])
    return DegradationModel(DiscreteDistribution(x, prior), ConditionalKernel(x, y, ch))


def noiseless_model(values=(-1.0, 0.0, 1.0), prior=None) -> DegradationModel:
    x = Alphabet.from_values(values)
    n = len(x)
    y = Alphabet(tuple(f"y{i}" for i in range(n)))
    prior = np.full(n, 1.0 / n) if prior is None else prior
    return DegradationModel(DiscreteDistribution(x, prior), ConditionalKernel(x, y, np.eye(n)))


def random_model(rng: np.random.Generator, n_x: int, n_y: int, values: bool = True,
                 concentration: float = 1.0, dim: int = 1) -> DegradationModel:
    """Dirichlet prior and channel rows; scalar values drawn from N(0, 1)."""
    if values:
        v = rng.normal(size=(n_x, dim))
        x = Alphabet.from_values(v[:, 0] if dim == 1 else v)
    else:
        x = Alphabet(tuple(f"x{i}" for i in range(n_x)))
    y = Alphabet(tuple(f"y{i}" for i in range(n_y)))
    prior = rng.dirichlet(np.full(n_x, concentration))
    ch = rng.dirichlet(np.full(n_y, concentration), size=n_x)
    return DegradationModel(DiscreteDistribution(x, prior), ConditionalKernel(x, y, ch))


def random_estimator(rng: np.random.Generator, model: DegradationModel,
                     outputs: Alphabet | None = None) -> Estimator:
    outputs = model.x_alphabet if outputs is None else outputs
    table = rng.dirichlet(np.ones(len(outputs)), size=len(model.y_alphabet))
    return Estimator(ConditionalKernel(model.y_alphabet, outputs, table), "random")
