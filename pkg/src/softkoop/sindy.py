"""Discrete-time SINDy baseline: LASSO over a fixed candidate library.

The library is ``[1, X, X**2, sin(X), cos(X)]`` on ``X = (state, input)``
and the regression target is the next state, so the fitted model is a
one-step predictor directly comparable with the Koopman model.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numba
import numpy as np

from .core import InsufficientDataError

DEFAULT_LAMBDA = 1e-3
DEFAULT_MAX_ITER = 1000
DEFAULT_TOL = 1e-8


def sindy_library(state, u=None) -> np.ndarray:
    """Evaluate the candidate library; batched over leading axes.

    For the gripper ``X`` has 11 components, giving ``1 + 4 * 11 = 45`` features.
    """
    x = np.asarray(state, dtype=float)
    if u is not None:
        u = np.asarray(u, dtype=float)
        batch = np.broadcast_shapes(x.shape[:-1], u.shape[:-1])
        x = np.concatenate([np.broadcast_to(x, batch + x.shape[-1:]),
                            np.broadcast_to(u, batch + u.shape[-1:])], axis=-1)
    ones = np.ones(x.shape[:-1] + (1,))
    return np.concatenate([ones, x, x**2, np.sin(x), np.cos(x)], axis=-1)


def library_names(variables) -> list[str]:
    names = ["1"] + list(variables)
    names += [f"{v}^2" for v in variables]
    names += [f"sin({v})" for v in variables]
    names += [f"cos({v})" for v in variables]
    return names


def soft_threshold(x, lam):
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


@dataclass(frozen=True)
class SindyModel:
    """Sparse next-state model ``next = library(state, u) @ coefficients``.

    Attributes
    ----------
    coefficients : ndarray, shape (L, n_state)
    lasso_lambda : float
    fit_time : float
    n_iter : int
        Coordinate-descent sweeps performed.
    objective_history : ndarray, shape (n_iter + 1, n_state)
        Per-target LASSO objective (in the scaled problem) before the first
        sweep and after each sweep.
    """

    coefficients: np.ndarray
    lasso_lambda: float
    fit_time: float = 0.0
    n_iter: int = 0
    objective_history: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)),
                                          repr=False)

    @property
    def sparsity(self) -> float:
        """Fraction of coefficients with magnitude below 1e-12."""
        return float(np.mean(np.abs(self.coefficients) < 1e-12))


@numba.njit(cache=True)
def _cd_sweeps(gram, corr, yy, pen, max_iter, tol):
    p, k = corr.shape
    w = np.zeros((p, k))
    gw = np.zeros((p, k))  # gram @ w, kept current
    history = np.empty((max_iter + 1, k))

    def objective(out):
        for c in range(k):
            acc = 0.5 * yy[c]
            for j in range(p):
                acc += w[j, c] * (0.5 * gw[j, c] - corr[j, c]) + pen[j] * abs(w[j, c])
            out[c] = acc

    objective(history[0])
    n_iter = 0
    for it in range(max_iter):
        n_iter = it + 1
        max_delta = 0.0
        for j in range(p):
            d = gram[j, j]
            if d <= 0.0:
                continue
            for c in range(k):
                old = w[j, c]
                rho = corr[j, c] - gw[j, c] + d * old
                mag = abs(rho) - pen[j]
                new = 0.0
                if mag > 0.0:
                    new = (mag if rho > 0 else -mag) / d
                delta = new - old
                if delta != 0.0:
                    w[j, c] = new
                    for i in range(p):
                        gw[i, c] += gram[i, j] * delta
                    if abs(delta) > max_delta:
                        max_delta = abs(delta)
        objective(history[n_iter])
        if max_delta < tol:
            break
    return w, n_iter, history[: n_iter + 1].copy()


def _lasso_cd(gram, corr, yy, lam, max_iter, tol, unpenalized=()):
    """Cyclic coordinate descent on ``0.5 w'Gw - w'c + 0.5 yy + lam |w|_1``.

    Every target column runs its own cyclic descent; columns share no
    variables so they are swept together.
    """
    pen = np.full(corr.shape[0], float(lam))
    pen[list(unpenalized)] = 0.0
    return _cd_sweeps(np.ascontiguousarray(gram), np.ascontiguousarray(corr),
                      np.ascontiguousarray(yy, dtype=float), pen, int(max_iter), float(tol))


def lasso_fit(features, targets, lam: float = DEFAULT_LAMBDA,
              max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL,
              standardize: bool = True) -> SindyModel:
    """Minimize ``(1/2M)||targets - features W||^2 + lam ||W||_1`` column by column.

    With ``standardize`` the non-constant feature columns are centered and
    scaled to unit variance before descent and the coefficients are mapped
    back afterwards. A column of identical nonzero values, when present,
    carries the unpenalized intercept; without one, columns are only
    scaled (by their root mean square) so no implicit intercept appears.
    Zero-variance columns other than that one get coefficient 0.
    """
    t0 = time.perf_counter()
    X = np.atleast_2d(np.asarray(features, dtype=float))
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    m, p = X.shape
    if m < 1:
        raise InsufficientDataError("LASSO needs at least one sample")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")

    coef = np.zeros((p, Y.shape[1]))
    if not standardize:
        gram = X.T @ X / m
        corr = X.T @ Y / m
        yy = np.einsum("ij,ij->j", Y, Y) / m
        coef, n_iter, hist = _lasso_cd(gram, corr, yy, lam, max_iter, tol)
    else:
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        flat = sd <= 1e-12 * np.maximum(1.0, np.abs(mu))
        const_cols = np.flatnonzero(flat & (np.abs(mu) > 0))
        active = np.flatnonzero(~flat)
        if const_cols.size:
            icol = const_cols[0]
            Xs = (X[:, active] - mu[active]) / sd[active]
            y_mean = Y.mean(axis=0)
            Yc = Y - y_mean
            scale = sd[active]
        else:
            icol = None
            scale = np.sqrt(np.mean(X[:, active] ** 2, axis=0))
            Xs = X[:, active] / scale
            Yc = Y
        gram = Xs.T @ Xs / m
        corr = Xs.T @ Yc / m
        yy = np.einsum("ij,ij->j", Yc, Yc) / m
        w, n_iter, hist = _lasso_cd(gram, corr, yy, lam, max_iter, tol)
        coef[active] = w / scale[:, None]
        if icol is not None:
            coef[icol] = (y_mean - mu[active] @ coef[active]) / mu[icol]
    return SindyModel(coef, float(lam), time.perf_counter() - t0, n_iter, hist)


def fit_sindy(states, inputs, next_states, lam: float = DEFAULT_LAMBDA,
              max_iter: int = DEFAULT_MAX_ITER, tol: float = DEFAULT_TOL,
              standardize: bool = True) -> SindyModel:
    """Regress ``next_states`` on the library of ``(states, inputs)``; timed end to end."""
    t0 = time.perf_counter()
    theta = sindy_library(states, inputs)
    model = lasso_fit(theta, next_states, lam, max_iter, tol, standardize)
    return SindyModel(model.coefficients, model.lasso_lambda,
                      time.perf_counter() - t0, model.n_iter, model.objective_history)


def sindy_predict(model: SindyModel, state, u=None) -> np.ndarray:
    return sindy_library(state, u) @ model.coefficients


def export_coefficients(model: SindyModel, path, variables, targets) -> None:
    """Write the coefficient matrix as CSV: one row per library term."""
    names = library_names(variables)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["term", *targets])
        writer.writerow(["# lambda", repr(model.lasso_lambda)] + [""] * (len(targets) - 1))
        for name, row in zip(names, model.coefficients):
            writer.writerow([name, *(repr(float(v)) for v in row)])


def load_coefficients(path) -> SindyModel:
    """Read a file written by :func:`export_coefficients`."""
    lam = 0.0
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            if row[0] == "# lambda":
                lam = float(row[1])
            elif row:
                rows.append([float(v) for v in row[1:]])
    return SindyModel(np.array(rows), lam)
