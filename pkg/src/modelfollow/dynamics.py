"""Continuous-time LTI simulation and linear-algebra utilities.

The plant and the desired (observed) model are both advanced on a fine
substep grid with the control held constant between learner updates
(zero-order hold).  A scaling-and-squaring matrix exponential is kept here
as an integration oracle that shares no code with the Runge-Kutta stepper.
"""

from dataclasses import dataclass, field

import numpy as np


class IntegrationDivergedError(RuntimeError):
    """Raised when the state leaves the finite range during integration."""

    def __init__(self, t):
        super().__init__(f"state became non-finite at t = {t:.6g} s")
        self.t = t


@dataclass
class StateVector:
    """Plant or model state at a given time."""

    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if not np.all(np.isfinite(self.x)):
            raise IntegrationDivergedError(self.t)


@dataclass
class ProcessModel:
    """The exact process (A, B, C) together with the desired model (A_hat, B_hat).

    The desired model shares the output map C.  Construction checks the
    standing assumptions: (A_hat, C) observable and (A_hat, B_hat)
    stabilizable.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    A_hat: np.ndarray
    B_hat: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.asarray(self.B, dtype=float)
        if self.B.ndim == 1:
            self.B = self.B.reshape(-1, 1)
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.A_hat = np.atleast_2d(np.asarray(self.A_hat, dtype=float))
        self.B_hat = np.asarray(self.B_hat, dtype=float)
        if self.B_hat.ndim == 1:
            self.B_hat = self.B_hat.reshape(-1, 1)

        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.A_hat.shape != (n, n):
            raise ValueError("A and A_hat must be square and the same size")
        if self.B.shape[0] != n or self.B_hat.shape != self.B.shape:
            raise ValueError("B/B_hat rows must match the state dimension")
        if self.C.shape[1] != n:
            raise ValueError("C columns must match the state dimension")

        if not is_observable(self.A_hat, self.C):
            raise ValueError("(A_hat, C) is not observable")
        if not is_stabilizable(self.A_hat, self.B_hat):
            raise ValueError("(A_hat, B_hat) is not stabilizable")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]


def rk4_step(A, B, x, u, h):
    """One classical Runge-Kutta step of x' = A x + B u with u held constant."""
    def f(xv):
        return A @ xv + B @ u

    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_lti(model_part, state, u, h):
    """Advance an LTI subsystem one substep.

    Args:
        model_part: pair (A, B) of the subsystem to advance.
        state: StateVector at time t.
        u: control vector, held constant over the substep.
        h: substep length in seconds, > 0.

    Returns:
        StateVector at t + h.  Raises IntegrationDivergedError if the
        result is non-finite.
    """
    if h <= 0:
        raise ValueError("substep h must be positive")
    A, B = model_part
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    xn = rk4_step(A, B, state.x, u, h)
    if not np.all(np.isfinite(xn)):
        raise IntegrationDivergedError(state.t + h)
    return StateVector(xn, state.t + h)


def output(model, x):
    """Measured output Y = C x."""
    return model.C @ np.asarray(x, dtype=float)


def eigenvalues(M):
    """Eigenvalues of a square matrix, sorted by real part then imaginary part."""
    M = np.asarray(M, dtype=float)
    ev = np.linalg.eigvals(M)
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


def expm_ss(M, tol=1e-16):
    """Matrix exponential by scaling and squaring of a truncated series.

    Independent of the RK4 stepper; used as a test oracle only.  The matrix
    is scaled by 2**-s so its norm is below 0.5, the series is summed until
    the term norm falls below tol, and the result is squared s times.
    """
    M = np.asarray(M, dtype=float)
    norm = np.linalg.norm(M, ord=np.inf)
    s = 0
    if norm > 0.5:
        s = int(np.ceil(np.log2(norm / 0.5)))
    Ms = M / (2.0 ** s)
    n = M.shape[0]
    E = np.eye(n)
    term = np.eye(n)
    for k in range(1, 60):
        term = term @ Ms / k
        E = E + term
        if np.linalg.norm(term, ord=np.inf) < tol:
            break
    for _ in range(s):
        E = E @ E
    return E


def observability_matrix(A, C):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    blocks = [C]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def is_observable(A, C):
    n = np.atleast_2d(A).shape[0]
    return np.linalg.matrix_rank(observability_matrix(A, C)) == n


def is_stabilizable(A, B, tol=1e-9):
    """PBH test: every eigenvalue with nonnegative real part must be controllable."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if lam.real < -tol:
            continue
        pencil = np.hstack([A - lam * np.eye(n), B])
        if np.linalg.matrix_rank(pencil, tol=1e-8) < n:
            return False
    return True
