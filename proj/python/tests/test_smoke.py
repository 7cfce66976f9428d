import numpy as np
import pytest

import smkl

SOB = {"id": "s", "kind": "sobolev_fourier", "coordinate_block": [0], "params": {"alpha": 1.0, "truncation": 16}}


def sobolev_dict(N):
    return [dict(SOB, id=f"s{j}", coordinate_block=[j]) for j in range(N)]


def test_version():
    assert smkl.__version__


def test_instance_and_gram():
    X, Y, truth = smkl.gen_instance(N=3, d=1, n=50, seed=2)
    assert X.shape == (50, 3) and Y.shape == (50,)
    assert len(truth["active_set"]) == 1
    G = smkl.gram(SOB, X[:, :1])
    assert np.allclose(G, G.T)
    assert np.max(np.diag(G)) <= 1.0 + 1e-12
    assert np.min(np.linalg.eigvalsh(G)) > -1e-10


def test_prox_soft_threshold():
    z = np.array([0.3, -1.2, 2.0])
    v = smkl.block_prox(z, 0.0, 0.5, np.ones(3))
    assert np.allclose(v, (1 - 0.5 / np.linalg.norm(z)) * z)


def test_eps_floor_and_majorant():
    eig = [1.0 / (k * k) for k in range(1, 200)]
    floor = smkl.regularization_floor(1.0, 2, 199)
    eps = smkl.eps_from_majorant(eig, 199, floor)
    for delta in np.linspace(1e-3, 1.0, 500):
        assert smkl.gamma_hat(eig, 199, delta) <= eps * delta + eps * eps + 1e-12


def test_fit_and_predict():
    X, Y, truth = smkl.gen_instance(N=4, d=2, n=200, noise_sigma=0.1, seed=3)
    model = smkl.fit(X, Y, sobolev_dict(4), tau=0.5)
    assert model.converged
    total, per_block = model.predict(X)
    assert np.allclose(total, model.fitted)
    assert per_block.shape == (200, 4)
    assert len(model.eps_hat) == 4
    assert "coefficients" in model.to_json()


def test_bad_config_raises():
    X, Y, _ = smkl.gen_instance(N=2, d=1, n=30, seed=1)
    with pytest.raises(ValueError):
        smkl.fit(X, Y, sobolev_dict(2), tau=-1.0)


def test_geometry_orthogonal():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((200, 3)))
    rep = smkl.geometry([Q[:, [0]], Q[:, [1]], Q[:, [2]]], [0], b=1.0, d=2)
    assert rep["kappa"] == pytest.approx(1.0)
    assert rep["delta_d"] < 1e-10


def test_tiny_experiment():
    rows, summary = smkl.run_experiment({
        "kind": "rate_n", "n_grid": [60, 120], "replications": 2,
        "base": {"N": 3, "d": 1, "noise_sigma": 0.2}, "fit": {"tau": 0.6},
        "kernel_truncation": 12, "mc_n": 300, "seed": 4,
    })
    assert summary["kind"] == "rate_n"
    assert len(rows) == 2 * 2 * 8
