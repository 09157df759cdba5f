"""Backward regression Monte Carlo on the two-time triangle.

The unknown is a field Y(t_i, s_k) on pairs i <= k, with a control Z(t_i, s_k)
and a diagonal process Y(s_k, s_k) that feeds back into the generator.  The
sweep runs levels k = N-1 .. 0; the diagonal argument is taken at level k+1,
which is already available, so the scheme is explicit and well ordered.
Conditional expectations are least-squares projections on polynomial basis
functions of the current state.

A windowed Picard iteration over short sub-intervals reproduces the same
fixed point and exposes the contraction diagnostics; windows glue right to
left into the global field.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigvalsh

from .errors import SolverError, NonContractionError
from .model import ProblemSpec, TimeGrid
from .sde import PathEnsemble

_DEGENERATE_VAR = 1e-20


@dataclass
class BasisSpec:
    """Global polynomial regression basis: monomials of total degree <= degree."""
    degree: int = 4


def _monomial_powers(d, degree):
    powers = [()]
    out = []

    def rec(prefix, remaining, budget):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for p in range(budget + 1):
            rec(prefix + [p], remaining - 1, budget - p)

    rec([], d, degree)
    out.sort(key=lambda t: (sum(t), t))
    return out


def _design(xs, degree):
    """Basis-major design matrix (B, n): rows are monomials of the columns
    of xs, built by successive multiplication."""
    n, d = xs.shape
    pows = []
    for a in range(d):
        tab = np.empty((degree + 1, n))
        tab[0] = 1.0
        col = np.ascontiguousarray(xs[:, a])
        for p in range(1, degree + 1):
            np.multiply(tab[p - 1], col, out=tab[p])
        pows.append(tab)
    if d == 1:
        return pows[0]
    powers = _monomial_powers(d, degree)
    PhiT = np.empty((len(powers), n))
    for j, pw in enumerate(powers):
        nz = [(a, p) for a, p in enumerate(pw) if p]
        if not nz:
            PhiT[j] = 1.0
        else:
            a0, p0 = nz[0]
            row = pows[a0][p0]
            for a, p in nz[1:]:
                row = row * pows[a][p]
            PhiT[j] = row
    return PhiT


class _LevelProjector:
    """Conditional expectation given X_k: ridge least squares, or a plain
    cross-path average when the state carries no information (zero variance).

    Targets are centered before projection, so constant targets are
    reproduced exactly.
    """

    def __init__(self, xk, basis: BasisSpec, where):
        n = xk.shape[0]
        mu = xk.mean(axis=0)
        xc = xk - mu
        var_cols = np.mean(xc * xc, axis=0) if n > 1 else np.zeros(xk.shape[1])
        if float(var_cols.max()) < _DEGENERATE_VAR:
            self.degenerate = True
            return
        self.degenerate = False
        sd = np.sqrt(var_cols)
        sd[sd < 1e-30] = 1.0
        PhiT = _design(xc / sd, basis.degree)   # (B, n)
        B = PhiT.shape[0]
        G = PhiT @ PhiT.T / n
        eig = eigvalsh(G, check_finite=False)
        if n < B or eig[0] <= 1e-12 * max(eig[-1], 1e-300):
            i, k = where
            raise SolverError(f"regression design rank-deficient at (i={i}, k={k})")
        lam = 1e-8 * np.trace(G) / B
        self._PhiT = PhiT
        self._chol = cho_factor(G + lam * np.eye(B), check_finite=False)
        self._n = n

    def __call__(self, V):
        """Project targets V (n, q) -> fitted values (n, q) and coefficients."""
        vbar = V.mean(axis=0)
        if self.degenerate:
            return np.broadcast_to(vbar, V.shape).copy(), None
        coef = cho_solve(self._chol, self._PhiT @ (V - vbar) / self._n,
                         check_finite=False)
        return vbar + self._PhiT.T @ coef, (vbar, coef)

    def attach_increments(self, w, dt):
        """Extend the design with basis-times-normalized-increment columns
        and factor the joint Gram once; joint_fit then splits any target into
        a state part (conditional expectation) and an increment part whose
        coefficients recover E[V dW^T | X_k]/dt.

        The joint split is a martingale control variate for the state part,
        and it is exact up to roundoff whenever the target is an exact
        function in the joint span -- e.g. an affine function of (X_k, dW),
        which a separate residual regression never reproduces exactly.
        """
        self._rt = math.sqrt(dt)
        ws = w / self._rt  # unit variance
        self._d = ws.shape[1]
        if self.degenerate:
            # state carries no information: regress on the centered increment
            # alone (centering both sides keeps the intercept implicit)
            self._wbar = ws.mean(axis=0)
            wsc = ws - self._wbar
            self._DT = wsc
            G = wsc.T @ wsc / wsc.shape[0]
            self._jchol = cho_factor(G, check_finite=False)
            return
        PhiT = self._PhiT
        B = PhiT.shape[0]
        D = np.empty((B * (1 + self._d), self._n))
        D[:B] = PhiT
        for j in range(self._d):
            np.multiply(PhiT, ws[:, j], out=D[B * (j + 1):B * (j + 2)])
        self._DT = D
        G = D @ D.T / self._n
        try:
            # unregularized: the x-block rank check already ran, and any
            # shrinkage would spoil the exact-recovery property
            self._jchol = cho_factor(G, check_finite=False)
        except np.linalg.LinAlgError:
            self._jchol = cho_factor(
                G + 1e-12 * (np.trace(G) / G.shape[0]) * np.eye(G.shape[0]),
                check_finite=False)

    def joint_fit(self, V, want_z=True):
        """Split targets V (n, q) into fitted conditional expectation (n, q)
        and increment coefficients; returns (F, Z (n, q, d) or None, model)."""
        n, q = V.shape
        vbar = V.mean(axis=0)
        Vc = V - vbar
        if self.degenerate:
            wsc = self._DT
            gam = cho_solve(self._jchol, wsc.T @ Vc / n, check_finite=False)
            # average with the increment-explained part removed (control
            # variate); at a collapsed state this is still X_k-measurable
            F = np.broadcast_to(vbar - self._wbar @ gam, V.shape).copy()
            Z = (np.broadcast_to(gam.T / self._rt, (n, q, self._d)).copy()
                 if want_z else None)
            return F, Z, (vbar, gam)
        D = self._DT
        B = self._PhiT.shape[0]
        coef = cho_solve(self._jchol, D @ Vc / n, check_finite=False)
        F = vbar + self._PhiT.T @ coef[:B]
        Z = None
        if want_z:
            gam = coef[B:].reshape(self._d, B, q)
            Z = np.einsum("jbq,bn->nqj", gam, self._PhiT) / self._rt
        return F, Z, (vbar, coef)


def _step_level(spec, ens, basis, k, labels, t_lab, rows_next, diag_next,
                force_average=False, compute_z=True):
    """One backward step at level k for the given labels.

    rows_next maps each label to its pathwise values at level k+1; diag_next
    is the pathwise diagonal at level k+1.  Returns (rows, z, se, models).
    In the frozen region (level strictly before the start label) projections
    degrade to plain averages and Z is pinned to zero.
    """
    grid = ens.grid
    dt = grid.dt
    nodes = grid.nodes
    n = ens.n_paths
    m = spec.dim_value
    d = spec.dim_state
    L = len(labels)
    frozen = force_average or nodes[k] < ens.start_t - 1e-12

    if frozen:
        proj = None
    else:
        proj = _LevelProjector(ens.X[:, k], basis, (labels[0], k))
        proj.attach_increments(ens.dW[:, k], dt)

    Ynext = np.stack([rows_next[i] for i in labels])            # (L, n, m)
    Vn = Ynext.transpose(1, 0, 2).reshape(n, L * m)

    model_z = None
    if frozen:
        F = np.broadcast_to(Vn.mean(axis=0), Vn.shape).copy()
        model_f = None
        Z = np.zeros((L, n, m, d))
    else:
        F, Zf, model_f = proj.joint_fit(Vn, want_z=compute_z)
        if Zf is None:
            Z = np.zeros((L, n, m, d))
        else:
            Z = Zf.reshape(n, L, m, d).transpose(1, 0, 2, 3)
            model_z = model_f

    if spec.generator.family == "zero":
        # no source: the projection of Y_{k+1} is already the step
        Yf, model_y = F, model_f
        Vt = Vn
    else:
        x_next = np.broadcast_to(ens.X[:, k + 1], (L, n, d))
        yp = np.broadcast_to(diag_next, (L, n, m))
        g = spec.generator(t_lab[:, None], nodes[k + 1], x_next, Ynext, yp, Z)
        target = Ynext + dt * g
        Vt = target.transpose(1, 0, 2).reshape(n, L * m)
        if frozen:
            Yf = np.broadcast_to(Vt.mean(axis=0), Vt.shape).copy()
            model_y = None
        else:
            Yf, _, model_y = proj.joint_fit(Vt, want_z=False)
    if not np.all(np.isfinite(Yf)):
        raise SolverError(
            f"non-finite solution values at level {k}; "
            f"dt*lipschitz_L = {dt * spec.lipschitz_L:.3g} may be too large")
    se = Vt.std(axis=0).reshape(L, m) / math.sqrt(n)

    rows = {}
    z = {}
    models = {}
    for l, i in enumerate(labels):
        rows[i] = Yf[:, l * m:(l + 1) * m]
        z[i] = Z[l]
        models[i] = {
            "y": None if model_y is None else
                 (model_y[0][l * m:(l + 1) * m], model_y[1][:, l * m:(l + 1) * m]),
            "z": None if model_z is None else
                 (model_z[0][l * m:(l + 1) * m],
                  model_z[1][:, l * m:(l + 1) * m]),
        }
    return rows, z, se, models


# ---------------------------------------------------------------------------
# field container
# ---------------------------------------------------------------------------


@dataclass
class TwoTimeField:
    """Triangular field of pathwise values, diagonal and summary statistics.

    When the data do not depend on the label time, all label rows coincide
    with the diagonal row and a single row per level is stored (t_shared).
    """

    grid: TimeGrid
    start_t: float
    n_paths: int
    dim_value: int
    dim_noise: int
    t_shared: bool
    mean: np.ndarray            # (N+1, N+1, m), NaN where not computed
    se: np.ndarray              # (N+1, N+1, m)
    z_mean: np.ndarray          # (N+1, N+1, m, d)
    diagonal_paths: np.ndarray  # (N+1, n_paths, m), NaN where not computed
    _y: dict = field(default_factory=dict)
    _z: dict = field(default_factory=dict)
    regression_models: dict = field(default_factory=dict)

    def _check(self, i, k):
        N = self.grid.n_steps
        if not (0 <= i <= k <= N):
            raise IndexError(f"({i}, {k}) outside the triangle (N={N})")

    def _key(self, i, k):
        return k if self.t_shared else (i, k)

    def has_paths(self, i, k):
        self._check(i, k)
        return self._key(i, k) in self._y

    def y_path(self, i, k):
        self._check(i, k)
        key = self._key(i, k)
        if key not in self._y:
            raise KeyError(f"pathwise Y not stored at ({i}, {k})")
        return self._y[key]

    def z_path(self, i, k):
        self._check(i, k)
        if k == self.grid.n_steps:
            raise IndexError("Z is not defined at the terminal level")
        key = self._key(i, k)
        if key not in self._z:
            raise KeyError(f"pathwise Z not stored at ({i}, {k})")
        return self._z[key]

    def diagonal_path(self, k):
        if not 0 <= k <= self.grid.n_steps:
            raise IndexError(f"level {k} outside the grid")
        return self.diagonal_paths[k]

    @property
    def frozen_until(self):
        nodes = self.grid.nodes
        return int(np.searchsorted(nodes, self.start_t + 1e-12) - 1)


def evaluate_field_at(fld: TwoTimeField, t_index: int, s_index: int):
    """Per-path values, sample mean and standard error at one triangle index."""
    vals = fld.y_path(t_index, s_index)
    mean = vals.mean(axis=0)
    se = vals.std(axis=0) / math.sqrt(fld.n_paths)
    return vals, mean, se


# ---------------------------------------------------------------------------
# direct sweep
# ---------------------------------------------------------------------------


def _terminal_rows(spec, ens, labels):
    nodes = ens.grid.nodes
    t_lab = nodes[np.asarray(labels)]
    XN = ens.X[:, -1]
    vals = spec.free_term(t_lab[:, None], np.broadcast_to(XN, (len(labels),) + XN.shape))
    return {i: vals[l].copy() for l, i in enumerate(labels)}


def _warn_stiff(spec, grid):
    if grid.dt * spec.lipschitz_L >= 1.0:
        warnings.warn(
            f"dt*lipschitz_L = {grid.dt * spec.lipschitz_L:.3g} >= 1; "
            "the explicit sweep may be inaccurate, increase N", stacklevel=3)


def solve_ebsvie_regression(spec: ProblemSpec, ens: PathEnsemble,
                            basis: BasisSpec | None = None,
                            labels=None, stop_level: int = 0,
                            keep_paths: bool = True) -> TwoTimeField:
    """Backward sweep over levels N-1 .. stop_level.

    ``labels`` restricts which label rows are requested (None = all); rows
    needed to carry the diagonal are swept regardless.  ``keep_paths=False``
    drops pathwise storage and keeps summary statistics only.
    """
    basis = basis or BasisSpec()
    grid = ens.grid
    N = grid.n_steps
    nodes = grid.nodes
    n, m, d = ens.n_paths, spec.dim_value, spec.dim_state
    if not 0 <= stop_level <= N:
        raise ValueError(f"stop_level {stop_level} outside 0..{N}")
    _warn_stiff(spec, grid)

    fld = TwoTimeField(
        grid=grid, start_t=ens.start_t, n_paths=n, dim_value=m, dim_noise=d,
        t_shared=spec.t_independent,
        mean=np.full((N + 1, N + 1, m), np.nan),
        se=np.full((N + 1, N + 1, m), np.nan),
        z_mean=np.full((N + 1, N + 1, m, d), np.nan),
        diagonal_paths=np.full((N + 1, n, m), np.nan),
    )

    if spec.t_independent:
        _solve_shared(spec, ens, basis, stop_level, keep_paths, fld)
        return fld

    requested = set(range(N + 1)) if labels is None else set(int(i) for i in labels)
    if any(i < 0 or i > N for i in requested):
        raise ValueError("labels outside 0..N")
    needed = requested | set(range(stop_level, N + 1))

    rows = _terminal_rows(spec, ens, sorted(i for i in needed))
    for i, v in rows.items():
        fld.mean[i, N] = v.mean(axis=0)
        fld.se[i, N] = v.std(axis=0) / math.sqrt(n)
        if keep_paths and i in requested:
            fld._y[(i, N)] = v
    fld.diagonal_paths[N] = rows[N]

    want_z = keep_paths or spec.generator.depends_z
    for k in range(N - 1, stop_level - 1, -1):
        active = sorted(i for i in needed if i <= k)
        t_lab = nodes[np.asarray(active)]
        cur, zcur, se, models = _step_level(
            spec, ens, basis, k, active, t_lab, rows, rows[k + 1],
            compute_z=want_z)
        for l, i in enumerate(active):
            fld.mean[i, k] = cur[i].mean(axis=0)
            fld.se[i, k] = se[l]
            if want_z:
                fld.z_mean[i, k] = zcur[i].mean(axis=0)
            if keep_paths and i in requested:
                fld._y[(i, k)] = cur[i]
                fld._z[(i, k)] = zcur[i]
                fld.regression_models[(i, k)] = models[i]
        if k in active:
            fld.diagonal_paths[k] = cur[k]
        rows = cur
    return fld


def _solve_shared(spec, ens, basis, stop_level, keep_paths, fld):
    """Fast path for label-independent data: one row per level serves all
    labels, since Y(t, s) then coincides with the diagonal Y(s, s)."""
    grid = ens.grid
    N = grid.n_steps
    n, m = ens.n_paths, spec.dim_value
    cur = spec.free_term(0.0, ens.X[:, -1])
    fld.mean[: N + 1, N] = cur.mean(axis=0)
    fld.se[: N + 1, N] = cur.std(axis=0) / math.sqrt(n)
    fld.diagonal_paths[N] = cur
    if keep_paths:
        fld._y[N] = cur
    want_z = keep_paths or spec.generator.depends_z
    for k in range(N - 1, stop_level - 1, -1):
        rows, z, se, models = _step_level(
            spec, ens, basis, k, [0], np.array([0.0]), {0: cur}, cur,
            compute_z=want_z)
        cur = rows[0]
        fld.mean[: k + 1, k] = cur.mean(axis=0)
        fld.se[: k + 1, k] = se[0]
        if want_z:
            fld.z_mean[: k + 1, k] = z[0].mean(axis=0)
        fld.diagonal_paths[k] = cur
        if keep_paths:
            fld._y[k] = cur
            fld._z[k] = z[0]
            fld.regression_models[k] = models[0]


# ---------------------------------------------------------------------------
# windowed Picard iteration
# ---------------------------------------------------------------------------


def _picard_window(spec, ens, k_lo, k_hi, tol, max_iter, basis,
                   terminal_rows, init_diag=None, init_y=None, init_z=None):
    """Fixed-point iteration on the window [s_{k_lo}, s_{k_hi}].

    Inner labels (those inside the window) are iterated with the previous
    iterate's diagonal frozen in the y'-slot; once converged, outer labels
    (left of the window) are swept once against the settled diagonal.
    Returns (y, z, diag, diagnostics) with dict storage keyed by (i, k).
    """
    grid = ens.grid
    nodes = grid.nodes
    n, m = ens.n_paths, spec.dim_value
    inner = list(range(k_lo, k_hi + 1))
    diag_prev = {}
    for k in range(k_lo + 1, k_hi):
        diag_prev[k] = (np.zeros((n, m)) if init_diag is None
                        else init_diag[k])

    residuals = []
    ratios = []
    bad_streak = 0
    prev_y = init_y
    prev_z = init_z
    converged = False
    n_iter = 0
    y = z = diag = None

    for it in range(1, max_iter + 1):
        n_iter = it
        y = {}
        z = {}
        rows = {i: terminal_rows[i] for i in inner if i <= k_hi}
        for k in range(k_hi - 1, k_lo - 1, -1):
            active = [i for i in inner if i <= k]
            t_lab = nodes[np.asarray(active)]
            diag_next = terminal_rows[k_hi] if k + 1 == k_hi else diag_prev[k + 1]
            cur, zcur, _, _ = _step_level(
                spec, ens, basis, k, active, t_lab, rows, diag_next)
            for i in active:
                y[(i, k)] = cur[i]
                z[(i, k)] = zcur[i]
            rows = cur
        diag = {k: y[(k, k)] for k in range(k_lo, k_hi)}
        diag[k_hi] = terminal_rows[k_hi]

        res = 0.0
        for key, v in y.items():
            old = prev_y.get(key, 0.0) if prev_y is not None else 0.0
            res = max(res, float(np.sqrt(np.mean((v - old) ** 2))))
        for key, v in z.items():
            old = prev_z.get(key, 0.0) if prev_z is not None else 0.0
            res = max(res, float(np.sqrt(np.mean((v - old) ** 2))))
        residuals.append(res)
        if len(residuals) >= 2 and residuals[-2] > 0:
            ratio = residuals[-1] / residuals[-2]
            ratios.append(ratio)
            bad_streak = bad_streak + 1 if ratio >= 1.0 else 0
            if bad_streak >= 3:
                raise NonContractionError(
                    f"no contraction on window [{nodes[k_lo]:.4g}, "
                    f"{nodes[k_hi]:.4g}] (residual ratio >= 1 for 3 "
                    "iterations); use a shorter window")
        prev_y = y
        prev_z = z
        diag_prev = diag
        if res <= tol:
            converged = True
            break

    # outer labels: single sweep against the settled diagonal
    outer = list(range(0, k_lo))
    if outer:
        rows = {i: terminal_rows[i] for i in outer}
        for k in range(k_hi - 1, k_lo - 1, -1):
            t_lab = nodes[np.asarray(outer)]
            cur, zcur, _, _ = _step_level(
                spec, ens, basis, k, outer, t_lab, rows, diag[k + 1])
            for i in outer:
                y[(i, k)] = cur[i]
                z[(i, k)] = zcur[i]
            rows = cur

    # geometric-mean contraction factor over the strictly positive ratios
    # (the final ratio is exactly zero once the sweep has converged)
    pos = [r for r in ratios if r > 0.0]
    fit = float(np.exp(np.mean(np.log(pos)))) if pos else 0.0
    diagnostics = {
        "residuals": residuals,
        "ratios": ratios,
        "contraction_ratio": fit,
        "iterations": n_iter,
        "converged": converged,
    }
    return y, z, diag, diagnostics


def _field_from_dicts(spec, ens, y, z, diag, k_lo, k_hi, terminal_rows):
    grid = ens.grid
    N = grid.n_steps
    n, m, d = ens.n_paths, spec.dim_value, spec.dim_state
    fld = TwoTimeField(
        grid=grid, start_t=ens.start_t, n_paths=n, dim_value=m, dim_noise=d,
        t_shared=False,
        mean=np.full((N + 1, N + 1, m), np.nan),
        se=np.full((N + 1, N + 1, m), np.nan),
        z_mean=np.full((N + 1, N + 1, m, d), np.nan),
        diagonal_paths=np.full((N + 1, n, m), np.nan),
    )
    for i in range(k_hi + 1):
        v = terminal_rows[i]
        fld._y[(i, k_hi)] = v
        fld.mean[i, k_hi] = v.mean(axis=0)
        fld.se[i, k_hi] = v.std(axis=0) / math.sqrt(n)
    for (i, k), v in y.items():
        fld._y[(i, k)] = v
        fld.mean[i, k] = v.mean(axis=0)
        fld.se[i, k] = v.std(axis=0) / math.sqrt(n)
    for (i, k), v in z.items():
        fld._z[(i, k)] = v
        fld.z_mean[i, k] = v.mean(axis=0)
    for k, v in diag.items():
        fld.diagonal_paths[k] = v
    return fld


def picard_solve(spec: ProblemSpec, ens: PathEnsemble, window, tol: float,
                 max_iter: int, basis: BasisSpec | None = None,
                 terminal_rows=None, init_field: TwoTimeField | None = None):
    """Picard iteration on one window (S, T'); returns (field, diagnostics).

    If the window does not end at the horizon, per-label terminal data at T'
    must be supplied in ``terminal_rows``.
    """
    basis = basis or BasisSpec()
    grid = ens.grid
    S, Tp = window
    k_lo = grid.index_of(S)
    k_hi = grid.index_of(Tp)
    if not k_lo < k_hi:
        raise ValueError("window must satisfy S < T' with both on grid nodes")
    _warn_stiff(spec, grid)
    if terminal_rows is None:
        if k_hi != grid.n_steps:
            raise ValueError("terminal data required when the window does not "
                             "end at the horizon")
        terminal_rows = _terminal_rows(spec, ens, list(range(k_hi + 1)))
    init_diag = init_y = init_z = None
    if init_field is not None:
        init_diag = {k: init_field.diagonal_path(k)
                     for k in range(k_lo + 1, k_hi)}
        init_y = {}
        init_z = {}
        for k in range(k_lo, k_hi):
            for i in range(k_lo, k + 1):
                if init_field.has_paths(i, k):
                    init_y[(i, k)] = init_field.y_path(i, k)
                    init_z[(i, k)] = init_field.z_path(i, k)
    y, z, diag, diagnostics = _picard_window(
        spec, ens, k_lo, k_hi, tol, max_iter, basis, terminal_rows,
        init_diag, init_y, init_z)
    fld = _field_from_dicts(spec, ens, y, z, diag, k_lo, k_hi, terminal_rows)
    return fld, diagnostics


def glue_windows(spec: ProblemSpec, ens: PathEnsemble, window_count: int,
                 tol: float, max_iter: int,
                 basis: BasisSpec | None = None) -> TwoTimeField:
    """Solve right-to-left on window_count equal windows and assemble the
    global field; the result matches the direct sweep (same fixed point)."""
    basis = basis or BasisSpec()
    grid = ens.grid
    N = grid.n_steps
    if window_count < 1 or N % window_count != 0:
        raise ValueError(f"window_count must divide N={N}")
    width = N // window_count
    nodes = grid.nodes
    _warn_stiff(spec, grid)

    boundary = _terminal_rows(spec, ens, list(range(N + 1)))
    all_y = {}
    all_z = {}
    all_diag = {N: boundary[N]}
    for w in reversed(range(window_count)):
        k_lo, k_hi = w * width, (w + 1) * width
        terminal = {i: boundary[i] for i in range(k_hi + 1)}
        y, z, diag, _ = _picard_window(
            spec, ens, k_lo, k_hi, tol, max_iter, basis, terminal)
        all_y.update(y)
        all_z.update(z)
        for k in range(k_lo, k_hi):
            all_diag[k] = diag[k]
        boundary = {i: y[(i, k_lo)] for i in range(k_lo + 1)}
        boundary[k_lo] = y[(k_lo, k_lo)]
    top = _terminal_rows(spec, ens, list(range(N + 1)))
    return _field_from_dicts(spec, ens, all_y, all_z, all_diag, 0, N, top)


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------


def field_to_csv(fld: TwoTimeField, path) -> None:
    """CSV rows (i, k, Y mean, Y se, Z mean) over all computed entries."""
    N = fld.grid.n_steps
    m = fld.dim_value
    d = fld.dim_noise
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "k"] + [f"y_mean{j}" for j in range(m)]
                   + [f"y_se{j}" for j in range(m)]
                   + [f"z_mean{j}_{a}" for j in range(m) for a in range(d)])
        for i in range(N + 1):
            for k in range(i, N + 1):
                if not np.all(np.isfinite(fld.mean[i, k])):
                    continue
                zrow = (fld.z_mean[i, k].ravel() if k < N
                        else np.full(m * d, np.nan))
                w.writerow([i, k]
                           + [f"{v:.12g}" for v in fld.mean[i, k]]
                           + [f"{v:.12g}" for v in fld.se[i, k]]
                           + [f"{v:.12g}" for v in zrow])
