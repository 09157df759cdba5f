"""Finite-difference solver for the non-local backward parabolic system.

The unknown Theta(t_i, s_k, x) lives on the two-time triangle times a uniform
1-d mesh.  Each level steps backward in s with a theta-weighted scheme on the
linear part L = 1/2 sigma^2 d_xx + b d_x, while the source g is explicit and
reads the diagonal layer Theta(s_{k+1}, s_{k+1}, x), which a shared s-grid
for labels makes available.  Boundary rows linearly extrapolate the time
increment (its second difference vanishes at the edge), which is exact for
affine layers and for layers whose update is spatially uniform.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import SolverError
from .model import ProblemSpec, TimeGrid, TriangularIndex
from .sde import PathEnsemble
from .solver_mc import TwoTimeField


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform 1-d mesh with J cells on [x_min, x_max]."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be less than x_max")
        if self.n_cells < 4:
            raise ValueError("need at least 4 cells")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def nodes(self):
        return np.linspace(self.x_min, self.x_max, self.n_cells + 1)


@dataclass
class PdeField:
    grid: TimeGrid
    mesh: SpatialMesh
    dim_value: int
    theta_weight: float
    boundary: str
    theta: np.ndarray  # packed triangle: (n_entries, J+1, m)
    _index: TriangularIndex = field(default=None)

    def __post_init__(self):
        if self._index is None:
            self._index = TriangularIndex(self.grid.n_steps)

    def layer(self, i, k):
        """Theta(t_i, s_k, .) over mesh nodes, shape (J+1, m)."""
        return self.theta[self._index.offset(i, k)]

    def diagonal_layer(self, k):
        return self.layer(k, k)

    def value_at(self, i, k, x):
        """Linear interpolation of Theta(t_i, s_k, .) at states x."""
        lay = self.layer(i, k)
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (self.dim_value,))
        for j in range(self.dim_value):
            out[..., j] = np.interp(x, self.mesh.nodes, lay[:, j])
        return out

    def gradient_layer(self, i, k):
        """Central-difference d Theta/dx on mesh nodes (one-sided at edges)."""
        lay = self.layer(i, k)
        return np.gradient(lay, self.mesh.dx, axis=0)


def _operator_matrix(spec, s, mesh):
    """L = 1/2 sigma^2 d_xx + b d_x with central differences; rows for the
    boundary nodes are zero (handled by the extrapolation constraint)."""
    x = mesh.nodes[:, None]  # (J+1, d=1)
    sig = spec.diffusion(s, x)[:, 0, 0]
    b = spec.drift(s, x)[:, 0]
    dx = mesh.dx
    J = mesh.n_cells
    diff = 0.5 * sig ** 2 / dx ** 2
    adv = b / (2 * dx)
    lower = (diff - adv)[1:J]
    center = -2.0 * diff[1:J]
    upper = (diff + adv)[1:J]
    Jn = J + 1
    rows = np.repeat(np.arange(1, J), 3)
    cols = np.stack([np.arange(0, J - 1), np.arange(1, J),
                     np.arange(2, J + 1)], axis=1).ravel()
    vals = np.stack([lower, center, upper], axis=1).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(Jn, Jn))


def _implicit_factor(spec, s, mesh, dt, w):
    Jn = mesh.n_cells + 1
    A = (sp.identity(Jn, format="csr")
         - dt * w * _operator_matrix(spec, s, mesh)).tolil()
    # boundary rows: vanishing second difference
    A[0, :3] = [1.0, -2.0, 1.0]
    A[Jn - 1, Jn - 3:] = [1.0, -2.0, 1.0]
    try:
        return splu(A.tocsc())
    except RuntimeError as exc:
        raise SolverError(f"implicit step factorization failed: {exc}") from exc


def solve_nonlocal_pde(spec: ProblemSpec, grid: TimeGrid, mesh: SpatialMesh,
                       theta_weight: float = 0.5) -> PdeField:
    if spec.dim_state != 1:
        raise ValueError("only one spatial dimension is supported")
    if not 0.0 <= theta_weight <= 1.0:
        raise ValueError("theta_weight must lie in [0, 1]")
    N = grid.n_steps
    dt = grid.dt
    dx = mesh.dx
    m = spec.dim_value
    nodes = grid.nodes
    xn = mesh.nodes

    sig_max = 0.0
    for s in (0.0, grid.horizon / 2, grid.horizon):
        sig_max = max(sig_max, float(np.abs(
            spec.diffusion(s, xn[:, None])[:, 0, 0]).max()))
    cfl = sig_max ** 2 * dt / dx ** 2
    if theta_weight == 0.0 and cfl > 1.0:
        raise SolverError(
            f"explicit step unstable: sigma^2*dt/dx^2 = {cfl:.3g} > 1; "
            f"reduce dt below {dx ** 2 / max(sig_max ** 2, 1e-300):.3g} "
            "or use theta_weight > 0")

    index = TriangularIndex(N)
    theta = np.empty((len(index), mesh.n_cells + 1, m))
    fld = PdeField(grid=grid, mesh=mesh, dim_value=m,
                   theta_weight=theta_weight, boundary="second-difference-zero",
                   theta=theta, _index=index)

    # terminal layer, exact
    t_lab = nodes[: N + 1]
    psiN = spec.free_term(t_lab[:, None], np.broadcast_to(
        xn[:, None], (N + 1,) + xn[:, None].shape))  # (N+1, J+1, m)
    for i in range(N + 1):
        theta[index.offset(i, N)] = psiN[i]

    Jn = mesh.n_cells + 1
    interior = slice(1, Jn - 1)
    for k in range(N - 1, -1, -1):
        lu = _implicit_factor(spec, nodes[k], mesh, dt, theta_weight)
        Lnext = _operator_matrix(spec, nodes[k + 1], mesh)
        L = k + 1  # number of labels at this level
        lay_next = np.stack([theta[index.offset(i, k + 1)]
                             for i in range(L)])          # (L, J+1, m)
        diag_next = theta[index.offset(k + 1, k + 1)]      # (J+1, m)
        grad_next = np.gradient(lay_next, dx, axis=1)      # (L, J+1, m)
        sig_next = spec.diffusion(nodes[k + 1], xn[:, None])[:, 0, 0]
        z = (grad_next * sig_next[None, :, None])[..., None]  # (L, J+1, m, 1)
        x_arg = np.broadcast_to(xn[:, None], (L, Jn, 1))
        g = spec.generator(nodes[:L, None], nodes[k + 1], x_arg,
                           lay_next, np.broadcast_to(diag_next, (L, Jn, m)), z)
        rhs = np.zeros((Jn, L * m))
        for i in range(L):
            expl = (lay_next[i]
                    + dt * (1 - theta_weight) * (Lnext @ lay_next[i])
                    + dt * g[i])
            rhs[interior, i * m:(i + 1) * m] = expl[interior]
            # boundary rows: the time increment is linearly extrapolated, so
            # the edge second difference is carried over from the level above
            # (exact for affine layers and for spatially uniform increments)
            rhs[0, i * m:(i + 1) * m] = (lay_next[i][0] - 2 * lay_next[i][1]
                                         + lay_next[i][2])
            rhs[Jn - 1, i * m:(i + 1) * m] = (lay_next[i][Jn - 1]
                                              - 2 * lay_next[i][Jn - 2]
                                              + lay_next[i][Jn - 3])
        sol = lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise SolverError(f"non-finite values in the implicit solve at level {k}")
        for i in range(L):
            theta[index.offset(i, k)] = sol[:, i * m:(i + 1) * m]
    return fld


def pde_residual(fld: PdeField, spec: ProblemSpec):
    """Discrete residual in explicit form at interior nodes, per (i, k).

    Residual = (Theta_{k+1} - Theta_k)/dt + L Theta_{k+1} + g(level k+1);
    a field that satisfies the fully explicit scheme exactly has residual 0.
    Returns (max_norm, l2_norm) arrays of shape (N+1, N+1), NaN above the
    diagonal and at the terminal level.
    """
    grid = fld.grid
    mesh = fld.mesh
    N = grid.n_steps
    dt = grid.dt
    dx = mesh.dx
    m = fld.dim_value
    xn = mesh.nodes
    Jn = mesh.n_cells + 1
    interior = slice(1, Jn - 1)
    max_norm = np.full((N + 1, N + 1), np.nan)
    l2_norm = np.full((N + 1, N + 1), np.nan)
    for k in range(N - 1, -1, -1):
        Lnext = _operator_matrix(spec, grid.nodes[k + 1], mesh)
        sig_next = spec.diffusion(grid.nodes[k + 1], xn[:, None])[:, 0, 0]
        diag_next = fld.layer(k + 1, k + 1)
        for i in range(k + 1):
            lay_next = fld.layer(i, k + 1)
            lay = fld.layer(i, k)
            grad = np.gradient(lay_next, dx, axis=0)
            z = (grad * sig_next[:, None])[..., None]
            g = spec.generator(grid.nodes[i], grid.nodes[k + 1], xn[:, None],
                               lay_next, diag_next, z)
            r = (lay_next - lay) / dt + Lnext @ lay_next + g
            ri = r[interior]
            max_norm[i, k] = float(np.abs(ri).max())
            l2_norm[i, k] = float(np.sqrt(np.mean(ri ** 2)))
    return max_norm, l2_norm


def representation_from_pde(fld: PdeField, ens: PathEnsemble) -> TwoTimeField:
    """Pathwise field Y = Theta(t_i, s_k, X_k), Z = Theta_x sigma along the
    ensemble, by linear interpolation in x.

    Paths leaving the mesh are clamped and flagged; the frozen region keeps
    Z = 0 and a deterministic Y, consistent with the probabilistic field.
    """
    spec = ens.spec
    grid = ens.grid
    mesh = fld.mesh
    if grid.n_steps != fld.grid.n_steps or grid.horizon != fld.grid.horizon:
        raise ValueError("ensemble and field use different time grids")
    N = grid.n_steps
    n, m, d = ens.n_paths, fld.dim_value, spec.dim_state
    if d != 1:
        raise ValueError("only one spatial dimension is supported")
    nodes = grid.nodes
    xn = mesh.nodes

    inside = (ens.X[:, :, 0] >= mesh.x_min) & (ens.X[:, :, 0] <= mesh.x_max)
    frac = float(inside.mean())
    if frac < 0.99:
        warnings.warn(f"only {100 * frac:.2f}% of path steps inside the mesh; "
                      "values are clamped at the boundary", stacklevel=2)
    exit_flags = ~inside.all(axis=1)

    out = TwoTimeField(
        grid=grid, start_t=ens.start_t, n_paths=n, dim_value=m, dim_noise=d,
        t_shared=spec.t_independent,
        mean=np.full((N + 1, N + 1, m), np.nan),
        se=np.full((N + 1, N + 1, m), np.nan),
        z_mean=np.full((N + 1, N + 1, m, d), np.nan),
        diagonal_paths=np.full((N + 1, n, m), np.nan),
    )
    out.exit_flags = exit_flags

    froz = out.frozen_until
    xc = np.clip(ens.X[:, :, 0], mesh.x_min, mesh.x_max)

    def eval_layer(i, k):
        lay = fld.layer(i, k)
        grad = np.gradient(lay, mesh.dx, axis=0)
        sig = spec.diffusion(nodes[k], ens.X[:, k])[:, 0, 0]
        y = np.empty((n, m))
        zg = np.empty((n, m))
        for j in range(m):
            y[:, j] = np.interp(xc[:, k], xn, lay[:, j])
            zg[:, j] = np.interp(xc[:, k], xn, grad[:, j])
        frozen = nodes[k] < ens.start_t - 1e-12
        z = np.zeros((n, m, 1)) if frozen else (zg * sig[:, None])[..., None]
        return y, z

    if spec.t_independent:
        for k in range(N + 1):
            y, z = eval_layer(k, k)
            out._y[k] = y
            out.mean[: k + 1, k] = y.mean(axis=0)
            out.se[: k + 1, k] = y.std(axis=0) / math.sqrt(n)
            out.diagonal_paths[k] = y
            if k < N:
                out._z[k] = z
                out.z_mean[: k + 1, k] = z.mean(axis=0)
    else:
        for k in range(N + 1):
            for i in range(k + 1):
                y, z = eval_layer(i, k)
                out._y[(i, k)] = y
                out.mean[i, k] = y.mean(axis=0)
                out.se[i, k] = y.std(axis=0) / math.sqrt(n)
                if k < N:
                    out._z[(i, k)] = z
                    out.z_mean[i, k] = z.mean(axis=0)
            out.diagonal_paths[k] = out._y[(k, k)]
    return out


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------


def save_pde_field(fld: PdeField, path) -> None:
    np.savez(path,
             header=np.array([fld.grid.n_steps, fld.mesh.n_cells,
                              fld.dim_value]),
             header_bounds=np.array([fld.mesh.x_min, fld.mesh.x_max]),
             header_horizon=np.array([fld.grid.horizon]),
             header_theta_weight=np.array([fld.theta_weight]),
             theta=fld.theta)


def write_layer_csv(fld: PdeField, i: int, path) -> None:
    """CSV slice of the fixed-label layer t_i over (s, x)."""
    import csv as _csv
    N = fld.grid.n_steps
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["k", "s", "j", "x"] + [f"theta{j}" for j in range(fld.dim_value)])
        for k in range(i, N + 1):
            lay = fld.layer(i, k)
            for j, x in enumerate(fld.mesh.nodes):
                w.writerow([k, f"{fld.grid.nodes[k]:.10g}", j, f"{x:.10g}"]
                           + [f"{v:.12g}" for v in lay[j]])
