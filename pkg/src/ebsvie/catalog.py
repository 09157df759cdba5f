"""Built-in catalog of benchmark instances.

Each entry is a named ProblemSpec assembled from the coefficient families in
``model``.  These are the instances the test suite, the cross-validation
budget calibration and the demo scripts run against.
"""

from __future__ import annotations

from .model import (DiffusionTerm, DriftTerm, FreeTerm, GeneratorTerm,
                    ProblemSpec)


def _spec(name, drift, diffusion, generator, free_term, L, rho=0.0, T=1.0):
    return ProblemSpec(
        dim_state=1, dim_value=1, horizon=T,
        drift=DriftTerm(*drift), diffusion=DiffusionTerm(*diffusion),
        generator=GeneratorTerm(*generator), free_term=FreeTerm(*free_term),
        lipschitz_L=L, modulus_rho=rho, name=name,
    )


_BUILDERS = {
    # g = 0, psi = 1: every solver must return Y = 1, Z = 0 exactly
    "constant": lambda: _spec(
        "constant", ("zero", {}), ("constant", {"scale": 1.0}),
        ("zero", {}), ("constant", {"value": 1.0}), L=0.0),

    # x-free linear instance with full diagonal coupling; closed-form oracle
    "deterministic_linear": lambda: _spec(
        "deterministic_linear", ("zero", {}), ("zero", {}),
        ("linear", {"a": -0.5, "beta": 0.5}),
        ("affine_time", {"base": 1.0, "slope": 0.5}),
        L=0.5, rho=0.5),

    # pure diagonal coupling; diagonal solves y(s) = 1 + beta int_s^T y
    "volterra_exp": lambda: _spec(
        "volterra_exp", ("zero", {}), ("zero", {}),
        ("linear", {"a": 0.0, "beta": 0.5}),
        ("constant", {"value": 1.0}), L=0.5),

    # unit Brownian motion, psi = x^2: Y = x^2 + (T - s) in closed form
    "heat_quadratic": lambda: _spec(
        "heat_quadratic", ("zero", {}), ("constant", {"scale": 1.0}),
        ("zero", {}), ("quadratic_state", {"scale": 1.0}), L=0.0),

    # unit Brownian motion, psi = x: Y = x, Z = 1 exactly
    "heat_linear": lambda: _spec(
        "heat_linear", ("zero", {}), ("constant", {"scale": 1.0}),
        ("zero", {}), ("linear_state", {"scale": 1.0}), L=0.0),

    # OU dynamics with a bounded nonlinear generator touching y, y' and z
    "nonlocal_tanh": lambda: _spec(
        "nonlocal_tanh", ("linear", {"rate": -1.0}),
        ("constant", {"scale": 1.0}),
        ("tanh_mix", {"cy": 0.3, "cyp": 0.3, "cz": 0.3}),
        ("sin_time_tanh_state", {"scale": 1.0}),
        L=0.3, rho=1.0),

    # plain OU state, trivial backward part; used by the simulation tests
    "ou_state": lambda: _spec(
        "ou_state", ("linear", {"rate": -1.0}), ("constant", {"scale": 1.0}),
        ("zero", {}), ("linear_state", {"scale": 1.0}), L=0.0),
}


def catalog_names():
    return sorted(_BUILDERS)


def get_instance(name: str) -> ProblemSpec:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown catalog instance: {name!r}; "
                       f"known: {', '.join(catalog_names())}") from None
