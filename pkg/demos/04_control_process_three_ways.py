"""Three independent estimators of the control (gradient) process Z.

1. regression: increment-block coefficients of the joint least-squares fit;
2. pathwise: variational gradient of Y times the first-variation flow of
   the state, evaluated path by path;
3. finite differences: spatial gradient of the PDE value function,
   interpolated onto the simulated states.

On affine data all three are exactly one.  On the squared benchmark they
are distinct noisy estimates of 2 x and should agree in RMS.
"""

import numpy as np

from ebsvie import (SpatialMesh, make_grid, pathwise_z, simulate_paths,
                    solve_ebsvie_regression, solve_nonlocal_pde,
                    solve_variational_ebsvie)
from ebsvie.catalog import get_instance


def nrmsd(a, b):
    return float(np.sqrt(np.mean((a - b) ** 2))
                 / np.sqrt(np.mean(((a + b) / 2) ** 2)))


if __name__ == "__main__":
    mesh = SpatialMesh(-6.0, 6.0, 200)

    spec = get_instance("heat_linear")
    g = make_grid(1.0, 50)
    ens = simulate_paths(spec, g, (0.0, np.zeros(1)), 5000, 42)
    base = solve_ebsvie_regression(spec, ens)
    pw = pathwise_z(solve_variational_ebsvie(spec, ens, base), ens, spec)
    pde = solve_nonlocal_pde(spec, g, mesh)
    dev = max(float(np.abs(base.z_path(k, k) - 1.0).max()) for k in range(50))
    dev = max(dev, *(float(np.abs(pw.z_path(k, k) - 1.0).max())
                     for k in range(50)))
    print(f"affine data, all routes vs the exact value 1: dev = {dev:.2e}")

    spec = get_instance("heat_quadratic")
    g = make_grid(1.0, 100)
    ens = simulate_paths(spec, g, (0.0, np.zeros(1)), 20000, 7)
    base = solve_ebsvie_regression(spec, ens)
    pw = pathwise_z(solve_variational_ebsvie(spec, ens, base), ens, spec)
    pde = solve_nonlocal_pde(spec, g, mesh)
    reg_all, pw_all, pde_all = [], [], []
    for k in range(10, 91, 10):
        x = ens.X[:, k, 0]
        sel = np.abs(x) < 4.8
        reg_all.append(base.z_path(k, k)[sel, 0, 0])
        pw_all.append(pw.z_path(k, k)[sel, 0, 0])
        pde_all.append(np.interp(x[sel], mesh.nodes,
                                 pde.gradient_layer(k, k)[:, 0]))
    reg_all, pw_all, pde_all = map(np.concatenate, (reg_all, pw_all, pde_all))
    print("squared benchmark, pairwise RMS relative differences:")
    print(f"  regression vs pathwise: {nrmsd(reg_all, pw_all):.4f}")
    print(f"  regression vs pde:      {nrmsd(reg_all, pde_all):.4f}")
    print(f"  pathwise   vs pde:      {nrmsd(pw_all, pde_all):.4f}")
