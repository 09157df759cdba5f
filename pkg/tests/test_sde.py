import numpy as np
import pytest

from ebsvie import (DriftTerm, DiffusionTerm, FreeTerm, GeneratorTerm,
                    ProblemSpec, SimulationError, make_grid,
                    malliavin_derivative, simulate_paths)
from ebsvie.catalog import get_instance
from ebsvie.sde import save_ensemble, write_path_summary


def test_shapes_and_start():
    spec = get_instance("ou_state")
    g = make_grid(1.0, 16)
    ens = simulate_paths(spec, g, (0.0, np.array([0.3])), 50, 7)
    assert ens.dW.shape == (50, 16, 1)
    assert ens.X.shape == (50, 17, 1)
    assert ens.gradX.shape == (50, 17, 1, 1)
    assert np.all(ens.X[:, 0, 0] == 0.3)


def test_reproducible_given_seed():
    spec = get_instance("ou_state")
    g = make_grid(1.0, 10)
    a = simulate_paths(spec, g, (0.0, np.zeros(1)), 40, 5)
    b = simulate_paths(spec, g, (0.0, np.zeros(1)), 40, 5)
    c = simulate_paths(spec, g, (0.0, np.zeros(1)), 40, 6)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.dW, b.dW)
    assert not np.array_equal(a.dW, c.dW)


def test_increment_moments():
    spec = get_instance("heat_linear")
    g = make_grid(1.0, 20)
    ens = simulate_paths(spec, g, (0.0, np.zeros(1)), 20000, 11)
    assert abs(ens.dW.mean()) < 4 / np.sqrt(20000 * 20) * np.sqrt(g.dt)
    assert abs(ens.dW.var() - g.dt) < 5e-4


def test_frozen_region_exact():
    spec = get_instance("nonlocal_tanh")
    g = make_grid(1.0, 20)
    ens = simulate_paths(spec, g, (0.5, np.array([0.7])), 30, 1)
    assert ens.frozen_until == 10
    for k in range(11):
        assert np.all(ens.X[:, k, 0] == 0.7)
        assert np.all(ens.gradX[:, k] == np.eye(1))
    # strictly after the start the state actually moves
    assert ens.X[:, 11].std() > 0


def test_ou_flow_matches_exponential():
    spec = get_instance("ou_state")  # drift -x, constant noise
    g = make_grid(1.0, 400)
    ens = simulate_paths(spec, g, (0.0, np.array([1.0])), 8, 3)
    expected = np.exp(-g.nodes)
    err = np.abs(ens.gradX[:, :, 0, 0] - expected).max()
    assert err < 2e-3  # O(dt)


def test_malliavin_derivative_constant_noise():
    spec = get_instance("heat_linear")  # b = 0, sigma = 1
    g = make_grid(1.0, 12)
    ens = simulate_paths(spec, g, (0.0, np.zeros(1)), 25, 9)
    D = malliavin_derivative(ens, 4)
    assert np.all(D[:, :5] == 0.0)
    assert np.all(D[:, 5:] == 1.0)
    # differentiation time in the frozen region: derivative vanishes
    ens2 = simulate_paths(spec, g, (0.5, np.zeros(1)), 25, 9)
    assert np.all(malliavin_derivative(ens2, 2) == 0.0)


def test_malliavin_derivative_ou_closed_form():
    spec = get_instance("ou_state")
    g = make_grid(1.0, 200)
    ens = simulate_paths(spec, g, (0.0, np.array([0.5])), 16, 2)
    r = 40
    D = malliavin_derivative(ens, r)
    s = g.nodes[r + 1:]
    expected = np.exp(-(s - g.nodes[r]))
    err = np.abs(D[:, r + 1:, 0, 0] - expected).max()
    assert err < 5e-3


def test_divergent_dynamics_detected():
    spec = ProblemSpec(
        dim_state=1, dim_value=1, horizon=1.0,
        drift=DriftTerm("linear", {"rate": 1e200}),
        diffusion=DiffusionTerm("zero"),
        generator=GeneratorTerm("zero"),
        free_term=FreeTerm("constant", {"value": 1.0}),
        lipschitz_L=0.0)
    g = make_grid(1.0, 8)
    with pytest.raises(SimulationError, match="non-finite state"):
        simulate_paths(spec, g, (0.0, np.array([1.0])), 4, 0)


def test_bad_start_rejected():
    spec = get_instance("ou_state")
    g = make_grid(1.0, 8)
    with pytest.raises(ValueError):
        simulate_paths(spec, g, (2.0, np.zeros(1)), 4, 0)
    with pytest.raises(ValueError):
        simulate_paths(spec, g, (0.0, np.zeros(2)), 4, 0)
    with pytest.raises(ValueError):
        simulate_paths(spec, g, (0.0, np.zeros(1)), 0, 0)


def test_exports(tmp_path):
    spec = get_instance("ou_state")
    g = make_grid(1.0, 6)
    ens = simulate_paths(spec, g, (0.0, np.zeros(1)), 10, 4)
    save_ensemble(ens, tmp_path / "ens.npz")
    with np.load(tmp_path / "ens.npz") as data:
        assert np.array_equal(data["X"], ens.X)
        assert data["header_seed"][0] == 4
    write_path_summary(ens, tmp_path / "summary.csv")
    lines = (tmp_path / "summary.csv").read_text().strip().splitlines()
    assert lines[0].startswith("k,s,mean_x0")
    assert len(lines) == 8  # header + N+1 rows
