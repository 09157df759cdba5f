import json

import numpy as np
import pytest

from ebsvie import (SpatialMesh, cross_validate, deterministic_oracle,
                    make_grid, simulate_paths, solve_ebsvie_regression,
                    stability_probe)
from ebsvie.catalog import get_instance
from ebsvie.validate import (adaptedness_probe, calibrate_budget,
                             continuity_probe, default_sample_points)


def test_oracle_terminal_and_diagonal():
    spec = get_instance("volterra_exp")
    fld = deterministic_oracle(spec, 2000)
    # terminal equals the free term; diagonal solves y(s) = 1 + 0.5 int y
    assert abs(fld.value_at(0.3, 1.0)[0] - 1.0) < 1e-12
    s = np.linspace(0, 1, 11)
    for v in s:
        assert abs(fld.value_at(v, v)[0] - np.exp(0.5 * (1 - v))) < 1e-5


def test_oracle_requires_deterministic_data():
    with pytest.raises(ValueError):
        deterministic_oracle(get_instance("heat_quadratic"))
    with pytest.raises(ValueError):
        deterministic_oracle(get_instance("deterministic_linear"), 500)


def test_default_sample_points_inside_domain():
    g = make_grid(1.0, 50)
    mesh = SpatialMesh(-6.0, 6.0, 100)
    pts = default_sample_points(g, mesh, 20)
    assert len(pts) == 20
    for t, s, x in pts:
        assert 0 <= t <= s < 1.0
        assert -4.8 <= x <= 4.8


def test_budget_constant_frozen():
    g = make_grid(1.0, 100)
    mesh = SpatialMesh(-6.0, 6.0, 200)
    c1 = calibrate_budget(g, mesh)
    c2 = calibrate_budget(g, mesh)
    assert c1 == c2 >= 2.0


def test_cross_validate_small(tmp_path):
    spec = get_instance("heat_quadratic")
    g = make_grid(1.0, 50)
    mesh = SpatialMesh(-6.0, 6.0, 100)
    rep = cross_validate(spec, g, mesh, [(0.2, 0.5, 1.0), (0.1, 0.3, -0.5)],
                         mc_params={"n_paths": 4000, "seed": 9})
    assert rep.n_pass == 2
    for p in rep.points:
        assert p["tolerance"] >= 3 * p["se"]
    rep.to_json(tmp_path / "cv.json")
    rep.to_csv(tmp_path / "cv.csv")
    doc = json.loads((tmp_path / "cv.json").read_text())
    assert doc["n_pass"] == 2
    assert len((tmp_path / "cv.csv").read_text().strip().splitlines()) == 3


def test_cross_validate_rejects_bad_points():
    spec = get_instance("heat_quadratic")
    g = make_grid(1.0, 50)
    mesh = SpatialMesh(-6.0, 6.0, 100)
    with pytest.raises(ValueError):
        cross_validate(spec, g, mesh, [(0.6, 0.5, 0.0)])
    with pytest.raises(ValueError):
        cross_validate(spec, g, mesh, [(0.1, 0.5, 5.9)])


def test_stability_probe_linear_response():
    rep = stability_probe(get_instance("deterministic_linear"),
                          [1e-1, 1e-2, 1e-3])
    assert abs(rep["slope"] - 1.0) <= 0.1
    # zero generator: the response is the perturbation itself, exactly
    rep0 = stability_probe(get_instance("constant"), [1e-2, 1e-3])
    assert np.allclose(rep0["diff"], [1e-2, 1e-3], rtol=1e-9)


def test_continuity_probe():
    spec = get_instance("heat_quadratic")
    g = make_grid(1.0, 30)
    ens = simulate_paths(spec, g, (0.0, np.zeros(1)), 2000, 3)
    fld = solve_ebsvie_regression(spec, ens)
    rep = continuity_probe(fld)
    assert rep["label_modulus"] == 0.0  # data carry no label dependence
    assert 0 < rep["diagonal_modulus"] < 0.5


def test_diagonal_modulus_shrinks_with_dt():
    spec = get_instance("deterministic_linear")
    mods = []
    for N in (25, 100):
        g = make_grid(1.0, N)
        ens = simulate_paths(spec, g, (0.0, np.zeros(1)), 16, 1)
        fld = solve_ebsvie_regression(spec, ens)
        mods.append(continuity_probe(fld)["diagonal_modulus"])
    assert mods[1] < mods[0]


def test_adaptedness_probe_vacuous_at_zero_start():
    spec = get_instance("ou_state")
    g = make_grid(1.0, 10)
    ens = simulate_paths(spec, g, (0.0, np.array([0.2])), 200, 1)
    fld = solve_ebsvie_regression(spec, ens)
    rep = adaptedness_probe(fld, 0.0)
    assert rep["passed"] and rep["vacuous"]
