"""Variational backward field, pathwise Z representation, gradient probes.

Differentiating the backward field in its spatial start point gives a linear
backward equation of the same triangular shape, with coefficients evaluated
along a base solution.  Its solution gradY combines with the state flow into
a pathwise control estimate Z = gradY (gradX)^{-1} sigma, an alternative to
the regression estimator that never differentiates fitted coefficients.
One-sided difference quotients with common random numbers provide the
independent check that gradY is really the spatial derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularityError
from .model import ProblemSpec, TimeGrid
from .sde import PathEnsemble, simulate_paths
from .solver_mc import (BasisSpec, TwoTimeField, _LevelProjector,
                        solve_ebsvie_regression)


@dataclass
class VariationalField:
    """gradY (and gradZ) over the triangle, pathwise, around a base solution."""

    grid: TimeGrid
    start_t: float
    n_paths: int
    dim_value: int
    dim_state: int
    t_shared: bool
    base: TwoTimeField
    ens: PathEnsemble
    mean: np.ndarray   # (N+1, N+1, m, d)
    _grad_y: dict = field(default_factory=dict)
    _grad_z: dict = field(default_factory=dict)

    def _key(self, i, k):
        N = self.grid.n_steps
        if not (0 <= i <= k <= N):
            raise IndexError(f"({i}, {k}) outside the triangle (N={N})")
        return k if self.t_shared else (i, k)

    def grad_y_path(self, i, k):
        return self._grad_y[self._key(i, k)]

    def grad_z_path(self, i, k):
        if k == self.grid.n_steps:
            raise IndexError("gradZ is not defined at the terminal level")
        return self._grad_z[self._key(i, k)]


def _linear_source(spec, t_lab, s_next, x_next, y_base, yp_base, z_base,
                   gX, gY, gYd, gZ):
    """g_x gradX + g_y gradY + g_y' gradY(diag) + sum_j g_{z_j} gradZ_j,
    evaluated along the base solution.  Shapes: gY (L,n,m,d), gZ (L,n,m,dn,d).
    """
    args = (t_lab[:, None], s_next, x_next, y_base, yp_base, z_base)
    gx = spec.generator.grad_x(*args)        # (L, n, m, d)
    gy = spec.generator.grad_y(*args)        # (L, n, m, m)
    gyp = spec.generator.grad_y_prime(*args)
    gz = spec.generator.grad_z(*args)        # (L, n, m, m, dn)
    src = np.einsum("lnmc,ncb->lnmb", gx, gX)
    src += np.einsum("lnmj,lnjb->lnmb", gy, gY)
    src += np.einsum("lnmj,lnjb->lnmb", gyp, gYd)
    src += np.einsum("lnmja,lnjab->lnmb", gz, gZ)
    return src


def solve_variational_ebsvie(spec: ProblemSpec, ens: PathEnsemble,
                             base: TwoTimeField,
                             basis: BasisSpec | None = None) -> VariationalField:
    """Backward regression sweep for the linearized field around ``base``.

    Mirrors the base sweep level by level: the linear generator coefficients
    are evaluated at exactly the arguments the base sweep used for g, and the
    diagonal coupling enters through gradY at level k+1.
    """
    basis = basis or BasisSpec()
    grid = ens.grid
    N = grid.n_steps
    nodes = grid.nodes
    dt = grid.dt
    n, m, d = ens.n_paths, spec.dim_value, spec.dim_state
    t_shared = spec.t_independent and base.t_shared

    var = VariationalField(
        grid=grid, start_t=ens.start_t, n_paths=n, dim_value=m, dim_state=d,
        t_shared=t_shared, base=base, ens=ens,
        mean=np.full((N + 1, N + 1, m, d), np.nan))

    labels_all = [0] if t_shared else list(range(N + 1))
    t_of = (lambda lab: 0.0) if t_shared else (lambda lab: nodes[lab])

    # terminal layer: psi_x(t_i, X_N) gradX_N
    XN = ens.X[:, -1]
    gXN = ens.gradX[:, -1]
    rows = {}
    for i in labels_all:
        jac = spec.free_term.jac(t_of(i), XN)          # (n, m, d)
        rows[i] = np.einsum("nmc,ncb->nmb", jac, gXN)
        var._grad_y[(i, N) if not t_shared else N] = rows[i]
        if t_shared:
            var.mean[: N + 1, N] = rows[i].mean(axis=0)
        else:
            var.mean[i, N] = rows[i].mean(axis=0)

    for k in range(N - 1, -1, -1):
        active = [i for i in labels_all if t_shared or i <= k]
        L = len(active)
        frozen = nodes[k] < ens.start_t - 1e-12
        if frozen:
            proj = None
        else:
            proj = _LevelProjector(ens.X[:, k], basis, (active[0], k))

        def project(V):
            if proj is None:
                return np.broadcast_to(V.mean(axis=0), V.shape).copy()
            return proj(V)[0]

        Gnext = np.stack([rows[i] for i in active])       # (L, n, m, d)
        q = m * d
        Vn = Gnext.transpose(1, 0, 2, 3).reshape(n, L * q)
        F = project(Vn)
        if frozen:
            gZ = np.zeros((L, n, m, d, d))
        else:
            resid = Vn - F
            ztar = resid[:, :, None] * ens.dW[:, k][:, None, :] / dt
            zf = project(ztar.reshape(n, L * q * d))
            # columns ordered (label, m, d_x, d_noise); put noise before d_x
            gZ = zf.reshape(n, L, m, d, d).transpose(1, 0, 2, 4, 3)

        # base arguments at exactly the points the base sweep used
        diag_next = base.diagonal_path(k + 1)
        y_base = np.stack([base.y_path(i, k + 1) for i in active])
        z_base = np.stack([base.z_path(i, k) for i in active])
        x_next = np.broadcast_to(ens.X[:, k + 1], (L, n, d))
        gXnext = ens.gradX[:, k + 1]
        gYd = np.broadcast_to(rows[0] if t_shared else rows[k + 1],
                              (L, n, m, d))
        t_lab = np.array([t_of(i) for i in active])
        src = _linear_source(spec, t_lab, nodes[k + 1], x_next, y_base,
                             np.broadcast_to(diag_next, (L, n, m)), z_base,
                             gXnext, Gnext, gYd, gZ)
        target = Gnext + dt * src
        Yf = project(target.transpose(1, 0, 2, 3).reshape(n, L * q))
        new_rows = {}
        for l, i in enumerate(active):
            gy = Yf[:, l * q:(l + 1) * q].reshape(n, m, d)
            new_rows[i] = gy
            key = k if t_shared else (i, k)
            var._grad_y[key] = gy
            var._grad_z[key] = gZ[l]
            if t_shared:
                var.mean[: k + 1, k] = gy.mean(axis=0)
            else:
                var.mean[i, k] = gy.mean(axis=0)
        rows = new_rows
    return var


@dataclass
class PathwiseZField:
    """Control field assembled from the flow identity, pathwise."""

    grid: TimeGrid
    t_shared: bool
    _z: dict = field(default_factory=dict)

    def z_path(self, i, k):
        N = self.grid.n_steps
        if not (0 <= i <= k <= N):
            raise IndexError(f"({i}, {k}) outside the triangle (N={N})")
        return self._z[k if self.t_shared else (i, k)]


def pathwise_z(var: VariationalField, ens: PathEnsemble,
               spec: ProblemSpec) -> PathwiseZField:
    """Z(t_i, s_k) = gradY(t_i, s_k) (gradX_k)^{-1} sigma(s_k, X_k).

    Frozen levels keep Z = 0 (the field there is deterministic).
    """
    grid = ens.grid
    N = grid.n_steps
    nodes = grid.nodes
    n, m, d = ens.n_paths, var.dim_value, var.dim_state
    out = PathwiseZField(grid=grid, t_shared=var.t_shared)

    for k in range(N + 1):
        frozen = nodes[k] < ens.start_t - 1e-12
        if not frozen:
            A = ens.gradX[:, k]
            if d == 1:
                bad = np.abs(A[:, 0, 0]) < 1e-300
                if np.any(bad):
                    p = int(np.argmax(bad))
                    raise SingularityError(
                        f"flow matrix singular at level {k} on path {p}")
            else:
                cond = np.linalg.cond(A)
                if np.any(cond > 1e12):
                    p = int(np.argmax(cond > 1e12))
                    raise SingularityError(
                        f"flow matrix at level {k} ill-conditioned on path {p} "
                        f"(cond {cond[p]:.2e})")
            sig = spec.diffusion(nodes[k], ens.X[:, k])
            B = np.linalg.solve(A, sig)  # (n, d, d)
        labels = [k] if var.t_shared else range(k + 1)
        for i in labels:
            if frozen:
                out._z[k if var.t_shared else (i, k)] = np.zeros((n, m, d))
                continue
            gy = var.grad_y_path(i, k)
            out._z[k if var.t_shared else (i, k)] = np.einsum(
                "nmc,ncb->nmb", gy, B)
    return out


def finite_diff_y(spec: ProblemSpec, grid: TimeGrid, start, h: float,
                  direction: int, n_paths: int, seed: int,
                  basis: BasisSpec | None = None, var: VariationalField = None):
    """One-sided difference quotient of the field in the start point, with
    mandatory common random numbers, compared against the variational field.

    Returns (quotient mean array over the triangle, report dict).
    """
    if h == 0:
        raise ValueError("h must be nonzero")
    basis = basis or BasisSpec()
    t0, x0 = start
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not 0 <= direction < spec.dim_state:
        raise ValueError("direction outside state dimensions")

    ens0 = simulate_paths(spec, grid, (t0, x0), n_paths, seed)
    fld0 = solve_ebsvie_regression(spec, ens0, basis)
    if var is None:
        var = solve_variational_ebsvie(spec, ens0, fld0, basis)
    xh = x0.copy()
    xh[direction] += h
    ensh = simulate_paths(spec, grid, (t0, xh), n_paths, seed)  # same seed: CRN
    fldh = solve_ebsvie_regression(spec, ensh, basis)

    N = grid.n_steps
    m = spec.dim_value
    quot_mean = np.full((N + 1, N + 1, m), np.nan)
    dev_sup = -1.0
    dev_arg = None
    dev_se = np.nan
    for k in range(N + 1):
        labels = [k] if fld0.t_shared else range(k + 1)
        for i in labels:
            q = (fldh.y_path(i, k) - fld0.y_path(i, k)) / h      # (n, m)
            gv = var.grad_y_path(i, k)[:, :, direction]
            if fld0.t_shared:
                quot_mean[: k + 1, k] = q.mean(axis=0)
            else:
                quot_mean[i, k] = q.mean(axis=0)
            diff = q - gv
            dev = float(np.abs(diff.mean(axis=0)).max())
            if dev > dev_sup:
                dev_sup = dev
                dev_arg = (i, k)
                dev_se = float((diff.std(axis=0) / math.sqrt(n_paths)).max())
    report = {
        "h": h,
        "sup_deviation": dev_sup,
        "argmax": dev_arg,
        "se_at_argmax": dev_se,
    }
    return quot_mean, report


def z_compare_csv(field: TwoTimeField, pw: PathwiseZField, pde_field,
                  ens: PathEnsemble, path) -> None:
    """CSV comparison of the three control estimators per (i, k)."""
    import csv as _csv
    spec = ens.spec
    grid = ens.grid
    N = grid.n_steps
    nodes = grid.nodes
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["i", "k", "z_regression", "z_pathwise", "z_pde",
                    "rms_reg_pw", "rms_reg_pde", "rms_pw_pde"])
        for k in range(N):
            labels = [k] if field.t_shared else range(k + 1)
            for i in labels:
                zr = field.z_path(i, k)[:, 0, 0]
                zp = pw.z_path(i, k)[:, 0, 0]
                lay = pde_field.gradient_layer(i, k)
                sig = spec.diffusion(nodes[k], ens.X[:, k])[:, 0, 0]
                zq = np.interp(np.clip(ens.X[:, k, 0], pde_field.mesh.x_min,
                                       pde_field.mesh.x_max),
                               pde_field.mesh.nodes, lay[:, 0]) * sig
                def rms(a, b):
                    return float(np.sqrt(np.mean((a - b) ** 2)))
                w.writerow([i, k, f"{zr.mean():.10g}", f"{zp.mean():.10g}",
                            f"{zq.mean():.10g}", f"{rms(zr, zp):.6g}",
                            f"{rms(zr, zq):.6g}", f"{rms(zp, zq):.6g}"])
