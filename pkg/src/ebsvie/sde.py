"""Forward simulation: state paths, variational flow, Malliavin derivative.

Euler stepping of X started at (t, x), with the linearized flow gradX stepped
on the same increments.  Times at or before the start label are "frozen": the
state sits at x and the flow at the identity, so backward solvers can treat
that region as deterministic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import SimulationError, SingularityError
from .model import ProblemSpec, TimeGrid

_COND_LIMIT = 1e12


@dataclass
class PathEnsemble:
    spec: ProblemSpec
    grid: TimeGrid
    start_t: float
    start_x: np.ndarray  # (d,)
    n_paths: int
    seed: int
    dW: np.ndarray     # (n_paths, N, d), units sqrt(time)
    X: np.ndarray      # (n_paths, N+1, d)
    gradX: np.ndarray  # (n_paths, N+1, d, d)

    @property
    def frozen_until(self):
        """Largest node index k with s_k <= start_t (-1 if none beyond 0)."""
        nodes = self.grid.nodes
        return int(np.searchsorted(nodes, self.start_t + 1e-12) - 1)


def simulate_paths(spec: ProblemSpec, grid: TimeGrid, start, n_paths: int,
                   seed: int) -> PathEnsemble:
    """Euler sweep of X and its variational flow from start = (t, x).

    Increments come from a counter-based Philox stream keyed by the seed, so
    the ensemble is bit-reproducible given (seed, n_paths, grid).
    """
    t0, x0 = start
    t0 = float(t0)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = spec.dim_state
    if x0.shape != (d,):
        raise ValueError(f"start state must have shape ({d},)")
    if not 0.0 <= t0 <= grid.horizon + 1e-12:
        raise ValueError(f"start time {t0} outside [0, {grid.horizon}]")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")

    N = grid.n_steps
    dt = grid.dt
    rng = np.random.Generator(np.random.Philox(key=seed))
    # increments drawn time-major (contiguous for the stepping loop and the
    # per-level regressions); dW exposes the path-major view
    dWt = rng.standard_normal((N, n_paths, d))
    dWt *= np.sqrt(dt)
    dW = dWt.transpose(1, 0, 2)

    # time-major working arrays, exposed as path-major views at the end
    Xw = np.empty((N + 1, n_paths, d))
    Xw[0] = x0
    eye = np.eye(d)
    flat_flow = spec.drift.x_free and spec.diffusion.x_free
    if flat_flow:
        Gw = None  # flow stays at the identity
    else:
        Gw = np.empty((N + 1, n_paths, d, d))
        Gw[0] = eye
    nodes = grid.nodes

    for k in range(N):
        if nodes[k + 1] <= t0 + 1e-12:
            # frozen region: increments generated but unused
            Xw[k + 1] = x0
            if Gw is not None:
                Gw[k + 1] = eye
            continue
        s_eff = max(nodes[k], t0)
        dt_eff = nodes[k + 1] - s_eff
        xk = Xw[k]
        b = spec.drift(s_eff, xk)
        sig = spec.diffusion(s_eff, xk)
        dw = dWt[k]
        if dt_eff != dt:
            dw = dw * np.sqrt(dt_eff / dt)
        if d == 1:
            xn = xk + b * dt_eff + sig[:, :, 0] * dw
        else:
            xn = xk + b * dt_eff + np.einsum("pab,pb->pa", sig, dw)
        if not np.all(np.isfinite(xn)):
            p = int(np.argmax(~np.isfinite(xn).all(axis=-1)))
            raise SimulationError(f"non-finite state at path {p}, step {k + 1}")
        Xw[k + 1] = xn
        if Gw is not None:
            bj = spec.drift.jac(s_eff, xk)            # (p, d, d)
            sj = spec.diffusion.jac(s_eff, xk)        # (p, i, d, d)
            gk = Gw[k]
            incr = np.einsum("pab,pbc->pac", bj, gk) * dt_eff
            incr += np.einsum("pi,piac,pcb->pab", dw, sj, gk)
            Gw[k + 1] = gk + incr

    X = Xw.transpose(1, 0, 2)
    if Gw is None:
        gradX = np.broadcast_to(eye, (n_paths, N + 1, d, d))
    else:
        gradX = Gw.transpose(1, 0, 2, 3)
    return PathEnsemble(spec=spec, grid=grid, start_t=t0, start_x=x0,
                        n_paths=n_paths, seed=seed, dW=dW, X=X, gradX=gradX)


def malliavin_derivative(ens: PathEnsemble, r_index: int) -> np.ndarray:
    """D_r X over the grid via the flow product formula.

    Zero outside the active region (nodes at or before r, or r at or before
    the start time); elsewhere gradX(s) gradX(r)^{-1} sigma(r, X_r).
    """
    N = ens.grid.n_steps
    if not 0 <= r_index <= N:
        raise ValueError(f"r_index {r_index} outside 0..{N}")
    d = ens.spec.dim_state
    out = np.zeros((ens.n_paths, N + 1, d, d))
    s_r = ens.grid.nodes[r_index]
    if s_r <= ens.start_t + 1e-12:
        return out

    A = ens.gradX[:, r_index]
    cond = np.linalg.cond(A)
    if np.any(cond > _COND_LIMIT):
        p = int(np.argmax(cond > _COND_LIMIT))
        raise SingularityError(
            f"flow matrix at step {r_index} ill-conditioned on path {p} "
            f"(cond {cond[p]:.2e})")
    sig = ens.spec.diffusion(s_r, ens.X[:, r_index])
    B = np.linalg.solve(A, sig)  # (p, d, d)
    for k in range(r_index + 1, N + 1):
        out[:, k] = np.einsum("pab,pbc->pac", ens.gradX[:, k], B)
    return out


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------


def save_ensemble(ens: PathEnsemble, path) -> None:
    """Binary dump: row-major arrays plus a small header."""
    np.savez(path,
             header_dims=np.array([ens.n_paths, ens.grid.n_steps,
                                   ens.spec.dim_state]),
             header_seed=np.array([ens.seed]),
             header_start_t=np.array([ens.start_t]),
             header_start_x=ens.start_x,
             header_horizon=np.array([ens.grid.horizon]),
             dW=ens.dW, X=ens.X, gradX=ens.gradX)


def write_path_summary(ens: PathEnsemble, path) -> None:
    """CSV of per-step cross-path mean and variance of each X component."""
    nodes = ens.grid.nodes
    d = ens.spec.dim_state
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "s"] + [f"mean_x{a}" for a in range(d)]
                   + [f"var_x{a}" for a in range(d)])
        mean = ens.X.mean(axis=0)
        var = ens.X.var(axis=0)
        for k in range(len(nodes)):
            w.writerow([k, f"{nodes[k]:.10g}"]
                       + [f"{mean[k, a]:.10g}" for a in range(d)]
                       + [f"{var[k, a]:.10g}" for a in range(d)])
