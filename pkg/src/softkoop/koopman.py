"""Finite Koopman approximation by extended dynamic mode decomposition.

Snapshots are lifted as row vectors, so one step of the lifted model reads
``psi_next = psi @ K`` and the state is recovered as ``state = psi @ B``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import InsufficientDataError, NumericError, SoftKoopError
from .dictionary import Dictionary

DEFAULT_SVD_TOL = 1e-8
MAX_EIGVEC_COND = 1e12


class DecompositionUnavailableError(SoftKoopError):
    def __init__(self, residual: float) -> None:
        super().__init__(f"K is not diagonalizable within tolerance (residual {residual:.3e})")
        self.residual = residual


def _pinv_rank(mx, tol):
    mx = np.asarray(mx, dtype=float)
    if mx.size == 0:
        return np.zeros(mx.shape[::-1]), 0
    u, s, vt = np.linalg.svd(mx, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros(mx.shape[::-1]), 0
    keep = s >= tol * s[0]
    return (vt[keep].T / s[keep]) @ u[:, keep].T, int(keep.sum())


def pinv_truncated(mx, tol: float = DEFAULT_SVD_TOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse discarding singular values below ``tol * s_max``."""
    return _pinv_rank(mx, tol)[0]


@dataclass(frozen=True)
class KoopmanModel:
    """Fitted lifted-space transition matrix.

    Attributes
    ----------
    K : ndarray, shape (N, N)
        Lifted transition, acting on row vectors.
    dictionary : Dictionary
    B : ndarray, shape (N, n_state)
        State-recovery selection matrix.
    fit_time : float
        Wall-clock seconds spent in the estimator.
    n_snapshots : int
    rank : int
        Numerical rank retained by the truncated pseudoinverse.
    """

    K: np.ndarray
    dictionary: Dictionary
    B: np.ndarray
    fit_time: float = 0.0
    n_snapshots: int = 0
    rank: int = 0

    def __post_init__(self) -> None:
        n = self.dictionary.dim
        if self.K.shape != (n, n):
            raise ValueError(f"K has shape {self.K.shape}, dictionary dim is {n}")
        if self.B.shape != (n, self.dictionary.n_state):
            raise ValueError("B does not match the dictionary")

    @classmethod
    def from_matrix(cls, K, dictionary: Dictionary, **kw) -> "KoopmanModel":
        return cls(np.asarray(K, dtype=float), dictionary,
                   dictionary.selection_matrix(), **kw)

    @property
    def readout(self) -> np.ndarray:
        """``K @ B``: maps a lifted row straight to the next state."""
        return self.K @ self.B


def fit_edmd_pairs(states, inputs, next_states, dictionary: Dictionary,
                   svd_tol: float = DEFAULT_SVD_TOL) -> KoopmanModel:
    """EDMD over arbitrary snapshot pairs ``(states[m], inputs[m]) -> next_states[m]``.

    The successor is lifted with the same input as its predecessor.
    """
    t0 = time.perf_counter()
    states = np.atleast_2d(np.asarray(states, dtype=float))
    next_states = np.atleast_2d(np.asarray(next_states, dtype=float))
    m = states.shape[0]
    if m == 0:
        raise InsufficientDataError("EDMD needs at least one snapshot pair")
    if dictionary.n_input:
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        psi = dictionary.evaluate(states, inputs)
        psi_next = dictionary.evaluate(next_states, inputs)
    else:
        psi = dictionary.evaluate(states)
        psi_next = dictionary.evaluate(next_states)
    if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(psi_next))):
        raise NumericError("non-finite lifted values")
    G = psi.T @ psi / m
    A = psi.T @ psi_next / m
    G_pinv, rank = _pinv_rank(G, svd_tol)
    K = G_pinv @ A
    fit_time = time.perf_counter() - t0
    return KoopmanModel(K, dictionary, dictionary.selection_matrix(),
                        fit_time=fit_time, n_snapshots=m, rank=rank)


def fit_edmd(states, inputs, dictionary: Dictionary,
             svd_tol: float = DEFAULT_SVD_TOL) -> KoopmanModel:
    """Fit ``K = G^+ A`` from a trajectory of ``M + 1`` states and ``M`` inputs.

    ``inputs[m]`` drives ``states[m] -> states[m + 1]``.

    Examples
    --------
    >>> from softkoop.dictionary import build_linear_dictionary
    >>> d = build_linear_dictionary(1)
    >>> fit_edmd([[1.0], [0.5], [0.25]], None, d).K
    array([[0.5]])
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[0] < 2:
        raise InsufficientDataError("EDMD needs at least two states")
    if dictionary.n_input:
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        if inputs.shape[0] != states.shape[0] - 1:
            raise ValueError("need exactly one input per transition")
    return fit_edmd_pairs(states[:-1], inputs, states[1:], dictionary, svd_tol)


def fit_edmd_trajectories(trajectories, dictionary: Dictionary,
                          svd_tol: float = DEFAULT_SVD_TOL) -> KoopmanModel:
    """Pool the transitions of several ``(states, inputs)`` trajectories."""
    s, u, s1 = [], [], []
    for states, inputs in trajectories:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        s.append(states[:-1])
        s1.append(states[1:])
        if dictionary.n_input:
            u.append(np.atleast_2d(np.asarray(inputs, dtype=float))[: len(states) - 1])
    return fit_edmd_pairs(np.vstack(s), np.vstack(u) if u else None,
                          np.vstack(s1), dictionary, svd_tol)


def predict_one_step(model: KoopmanModel, state, u=None) -> np.ndarray:
    """Lift, advance once, read out the state. Batched over leading axes."""
    psi = model.dictionary.evaluate(state, u)
    return psi @ model.readout


def predict_rollout(model: KoopmanModel, state, inputs) -> np.ndarray:
    """Iterate :func:`predict_one_step`, re-lifting the predicted state each step.

    ``inputs`` has shape ``(H, m)`` or, for many candidate plans at once,
    ``(C, H, m)``; the result has shape ``(H, n)`` or ``(C, H, n)``.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    horizon = inputs.shape[-2]
    if horizon < 1:
        raise ValueError("rollout horizon must be at least 1")
    readout = model.readout
    x = np.broadcast_to(np.asarray(state, dtype=float),
                        inputs.shape[:-2] + (model.dictionary.n_state,))
    out = np.empty(inputs.shape[:-2] + (horizon, model.dictionary.n_state))
    for i in range(horizon):
        u_i = inputs[..., i, :] if model.dictionary.n_input else None
        x = model.dictionary.evaluate(x, u_i) @ readout
        out[..., i, :] = x
    return out


@dataclass(frozen=True)
class KoopmanDecomposition:
    """Spectral data of ``K``.

    ``eigenvectors[:, n]`` is ``eta_n`` with ``K eta_n = lambda_n eta_n``;
    ``left[n]`` is ``w_n`` with ``w_n^T K = lambda_n w_n^T`` and
    ``w_n^T eta_n = 1``; ``modes[n] = (w_n^T B)^T``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    left: np.ndarray
    modes: np.ndarray

    def eigenfunctions(self, psi) -> np.ndarray:
        """``phi_n = psi @ eta_n`` for lifted rows ``psi``."""
        return np.asarray(psi) @ self.eigenvectors

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.left


def decompose(model: KoopmanModel, tol: float = 1e-8) -> KoopmanDecomposition:
    """Eigen-decompose ``K``; raise if the eigenvector basis is numerically singular."""
    K = model.K
    lam, eta = scipy.linalg.eig(K)
    scale = max(np.linalg.norm(K), 1.0)
    try:
        cond = np.linalg.cond(eta)
        if not np.isfinite(cond) or cond > MAX_EIGVEC_COND:
            raise np.linalg.LinAlgError
        W = np.linalg.inv(eta)
    except np.linalg.LinAlgError:
        raise DecompositionUnavailableError(float("inf")) from None
    residual = np.linalg.norm((eta * lam) @ W - K) / scale
    if residual > tol:
        raise DecompositionUnavailableError(float(residual))
    modes = W @ model.B
    return KoopmanDecomposition(lam, eta, W, modes)


def predict_mode_sum(model: KoopmanModel, decomposition: KoopmanDecomposition,
                     state, u=None) -> np.ndarray:
    """One-step prediction as ``sum_n v_n lambda_n phi_n(state, u)``."""
    psi = model.dictionary.evaluate(state, u)
    phi = decomposition.eigenfunctions(psi)
    pred = (phi * decomposition.eigenvalues) @ decomposition.modes
    return pred.real


def model_to_text(model: KoopmanModel) -> str:
    """Header ``rows cols`` followed by row-major values of ``K``, one row per line."""
    K = model.K
    lines = [f"{K.shape[0]} {K.shape[1]}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in K]
    return "\n".join(lines) + "\n"


def model_from_text(text: str, dictionary: Dictionary) -> KoopmanModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    rows, cols = map(int, lines[0].split())
    K = np.array([[float(v) for v in ln.split()] for ln in lines[1:]])
    if K.shape != (rows, cols):
        raise ValueError(f"header says {rows}x{cols}, body is {K.shape}")
    return KoopmanModel.from_matrix(K, dictionary)
