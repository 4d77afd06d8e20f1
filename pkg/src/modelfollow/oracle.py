"""Independent ground-truth machinery for validating the online learner.

Everything here is sampled-data linear-quadratic bookkeeping: exact
zero-order-hold discretization, a fixed-point Riccati solver, assembly of
the quadratic action-value kernel, policy-evaluation kernels for a given
gain, and a batch least-squares counterpart of the projection iteration.
None of it shares code with the learner module.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, solve_discrete_lyapunov


class NoConvergenceError(RuntimeError):
    """Riccati fixed-point iteration failed to settle within max_iter."""


class UnderExcitationError(RuntimeError):
    """Logged regressors do not span the parameter space."""

    def __init__(self, rank, needed):
        super().__init__(f"regressor rank {rank} < {needed}; data under-excited")
        self.rank = rank
        self.needed = needed


@dataclass
class DiscreteModel:
    """ZOH-discretized system with its sampled-data stage costs."""

    A_d: np.ndarray
    B_d: np.ndarray
    Q_bar: np.ndarray
    R_bar: np.ndarray
    delta: float


def zoh_discretize(A, B, delta):
    """Exact zero-order-hold discretization via the augmented exponential.

    Returns (A_d, B_d) with A_d = exp(A delta) and B_d the held-input map.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    n, m = A.shape[0], B.shape[1]
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = expm(M * delta)
    return E[:n, :n], E[:n, n:]


def stage_cost(Q, R, delta):
    """First-order sampled-data costs (1/2 Q delta, 1/2 R delta)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    return 0.5 * Q * delta, 0.5 * R * delta


def integrated_stage_cost(A, B, Q, R, delta):
    """Exact integral of the running cost over one held-input interval.

    Returns the symmetric matrix G with

        integral_0^delta 1/2 (x(tau)' Q x(tau) + u' R u) dtau = z' G z,

    z = [x; u], computed with the block-exponential quadrature
    G = F22' F12 where F = expm([[-M', C], [0, M]] delta), M the augmented
    drift and C = blkdiag(Q, R)/2.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n, m = A.shape[0], B.shape[1]
    d = n + m
    M = np.zeros((d, d))
    M[:n, :n] = A
    M[:n, n:] = B
    Cc = np.zeros((d, d))
    Cc[:n, :n] = 0.5 * Q
    Cc[n:, n:] = 0.5 * R
    H = np.zeros((2 * d, 2 * d))
    H[:d, :d] = -M.T
    H[:d, d:] = Cc
    H[d:, d:] = M
    F = expm(H * delta)
    G = F[d:, d:].T @ F[:d, d:]
    return 0.5 * (G + G.T)


def solve_dare(A_d, B_d, Q_bar, R_bar, tol=1e-13, max_iter=200000):
    """Discrete Riccati fixed point by plain iteration from P0 = Q_bar."""
    A_d = np.atleast_2d(np.asarray(A_d, dtype=float))
    B_d = np.asarray(B_d, dtype=float)
    if B_d.ndim == 1:
        B_d = B_d.reshape(-1, 1)
    Q_bar = np.atleast_2d(np.asarray(Q_bar, dtype=float))
    R_bar = np.atleast_2d(np.asarray(R_bar, dtype=float))
    P = Q_bar.copy()
    for _ in range(max_iter):
        BtP = B_d.T @ P
        gain_term = np.linalg.solve(R_bar + BtP @ B_d, BtP @ A_d)
        Pn = Q_bar + A_d.T @ P @ A_d - (A_d.T @ P @ B_d) @ gain_term
        Pn = 0.5 * (Pn + Pn.T)
        if np.linalg.norm(Pn - P) < tol:
            return Pn
        P = Pn
    raise NoConvergenceError(
        f"Riccati iteration did not converge in {max_iter} steps")


def qfun_kernel(P, model):
    """Action-value kernel blocks from the state cost matrix P.

    S = [[Q_bar + A_d' P A_d, A_d' P B_d], [B_d' P A_d, R_bar + B_d' P B_d]];
    its greedy policy equals the discrete LQR gain.
    """
    A_d = np.atleast_2d(np.asarray(model.A_d, dtype=float))
    B_d = np.asarray(model.B_d, dtype=float)
    if B_d.ndim == 1:
        B_d = B_d.reshape(-1, 1)
    n, m = A_d.shape[0], B_d.shape[1]
    S = np.zeros((n + m, n + m))
    S[:n, :n] = model.Q_bar + A_d.T @ P @ A_d
    S[:n, n:] = A_d.T @ P @ B_d
    S[n:, :n] = B_d.T @ P @ A_d
    S[n:, n:] = model.R_bar + B_d.T @ P @ B_d
    return 0.5 * (S + S.T)


def policy_value_kernel(A, B, gain, Q, R, delta):
    """Action-value kernel of a fixed stabilizing gain (policy evaluation).

    Solves the sampled-data Bellman identity 1/2 Z'SZ = Z'GZ + 1/2 Z_+'SZ_+
    with Z_+ = [x_+; gain x_+] and G the exact integrated stage cost, via a
    discrete Lyapunov equation on the closed-loop lift.
    """
    A_d, B_d = zoh_discretize(A, B, delta)
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    n, m = A_d.shape[0], B_d.shape[1]
    G = integrated_stage_cost(A, B, Q, R, delta)
    T = np.zeros((n + m, n + m))
    T[:n, :n] = A_d
    T[:n, n:] = B_d
    T[n:, :] = gain @ T[:n, :]
    S = solve_discrete_lyapunov(T.T, 2.0 * G)
    return 0.5 * (S + S.T)


def batch_bellman_solve(dataset):
    """Least-squares theta from logged (z_tilde, phi) pairs.

    Raises UnderExcitationError when the regressor matrix is rank
    deficient; otherwise returns the minimum-residual theta.
    """
    Z = np.array([np.asarray(z, dtype=float) for (z, _) in dataset])
    phi = np.array([p for (_, p) in dataset], dtype=float)
    needed = Z.shape[1] if Z.ndim == 2 else 0
    if Z.shape[0] < needed:
        raise UnderExcitationError(Z.shape[0], needed)
    theta, _, rank, _ = np.linalg.lstsq(Z, phi, rcond=None)
    if rank < needed:
        raise UnderExcitationError(rank, needed)
    return theta


def bellman_residual(theta, dataset):
    """Relative residual ||Z theta - phi|| / ||phi|| over a regressor log."""
    Z = np.array([np.asarray(z, dtype=float) for (z, _) in dataset])
    phi = np.array([p for (_, p) in dataset], dtype=float)
    return float(np.linalg.norm(Z @ theta - phi) / np.linalg.norm(phi))
