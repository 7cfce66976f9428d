"""Sparse additive kernel learning with data-driven double penalisation.

Configurations are plain dicts (the same JSON the command line tool reads);
arrays are numpy.
"""

import json

import numpy as np

from . import _core
from ._core import InputError, DataError, NumericalError, block_prox, prox_objective, rademacher_sup
from ._core import regularization_floor

__version__ = _core.__version__

__all__ = [
    "InputError", "DataError", "NumericalError",
    "gen_instance", "gram", "spectrum", "gamma_hat", "eps_from_majorant", "eps_hat",
    "block_prox", "prox_objective", "rademacher_sup", "regularization_floor",
    "fit", "geometry", "run_experiment",
]


def _points(X):
    X = np.asarray(X, dtype=float)
    return X.reshape(-1, 1) if X.ndim == 1 else X


def gen_instance(**spec):
    """Synthetic sparse additive instance; returns (X, Y, truth dict)."""
    X, Y, truth = _core.gen_instance(json.dumps(spec))
    return X, Y, json.loads(truth)


def gram(kernel, X):
    return _core.gram(json.dumps(kernel), _points(X))


def spectrum(kernel, X):
    """Eigenvalues (descending, of Gram/n) and eigenvectors."""
    return _core.spectrum(json.dumps(kernel), _points(X))


def gamma_hat(eigenvalues, n, delta):
    return _core.gamma_hat(list(map(float, eigenvalues)), int(n), float(delta))


def eps_from_majorant(eigenvalues, n, floor):
    return _core.eps_from_majorant(list(map(float, eigenvalues)), int(n), float(floor))


def eps_hat(kernels, X, A=4.0, N=None):
    kernels = list(kernels)
    return _core.eps_hat(json.dumps(kernels), _points(X), float(A), int(N if N is not None else len(kernels)))


def fit(X, Y, kernels, **config):
    """Fit the doubly penalised additive model. `config` takes FitConfig keys (tau, A, loss, ...)."""
    return _core.fit(_points(X), np.asarray(Y, dtype=float), json.dumps(list(kernels)), json.dumps(config))


def geometry(blocks, J, b=1.0, d=None):
    """Geometry constants for blocks given as value matrices (rows = evaluation points)."""
    blocks = [_points(B) for B in blocks]
    return json.loads(_core.geometry(blocks, list(J), float(b), d))


def run_experiment(plan):
    """Run an experiment plan; returns (rows, summary) with rows as (config, replication, metric, value)."""
    rows, summary = _core.run_experiment(json.dumps(plan))
    return rows, json.loads(summary)
