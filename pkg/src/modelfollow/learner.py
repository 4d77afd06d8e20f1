"""Online learning core: quadratic value kernels and projection updates.

Value functions are quadratic forms V = 1/2 Z' S Z over the joint vector
Z = [F; mu].  The kernel S is estimated through its flattened parameter
vector theta (upper-triangular entries, diagonal monomials carrying the
1/2 factor so theta stores S entries directly), and the policy is read out
of the kernel blocks.  Critic and actor both use normalized-projection
updates that contract for pace 0 < sigma < 2.
"""

from dataclasses import dataclass, field

import numpy as np


class SingularKernelError(RuntimeError):
    """Control block S_mumu of a kernel is numerically singular."""


def tri_indices(d):
    """Upper-triangular index pairs (i, j), i <= j, row-major."""
    return [(i, j) for i in range(d) for j in range(i, d)]


def qmonomials(Z):
    """Quadratic monomials of Z matching the theta layout.

    Diagonal slots hold 1/2 Z_i^2 and off-diagonal slots Z_i Z_j, so that
    theta' qmonomials(Z) = 1/2 Z' S Z when theta stores S entrywise.
    """
    Z = np.asarray(Z, dtype=float)
    d = Z.shape[0]
    out = np.empty(d * (d + 1) // 2)
    k = 0
    for i in range(d):
        out[k] = 0.5 * Z[i] * Z[i]
        k += 1
        for j in range(i + 1, d):
            out[k] = Z[i] * Z[j]
            k += 1
    return out


def theta_to_S(theta):
    """Unflatten theta into the symmetric kernel matrix."""
    theta = np.asarray(theta, dtype=float)
    # d(d+1)/2 = len  =>  d = (sqrt(8 len + 1) - 1) / 2
    d = int(round((np.sqrt(8 * theta.size + 1) - 1) / 2))
    if d * (d + 1) // 2 != theta.size:
        raise ValueError(f"theta length {theta.size} is not triangular")
    S = np.zeros((d, d))
    k = 0
    for i in range(d):
        for j in range(i, d):
            S[i, j] = theta[k]
            S[j, i] = theta[k]
            k += 1
    return S


def S_to_theta(S):
    """Flatten a symmetric kernel into its theta vector."""
    S = np.asarray(S, dtype=float)
    d = S.shape[0]
    return np.array([S[i, j] for (i, j) in tri_indices(d)])


def utility(F, mu, Q, R):
    """Stage utility U = 1/2 (F' Q F + mu' R mu)."""
    F = np.atleast_1d(np.asarray(F, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    return 0.5 * float(F @ Q @ F + mu @ R @ mu)


def integrate_utility(samples):
    """Composite trapezoid over (t, U) samples spanning one learning interval.

    Exact for integrands linear in t.  Times must be strictly increasing.
    """
    ts = np.array([t for (t, _) in samples], dtype=float)
    us = np.array([u for (_, u) in samples], dtype=float)
    if ts.size < 2:
        raise ValueError("need at least two samples to integrate")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("sample times must be strictly increasing")
    return float(np.trapezoid(us, ts))


def quadratic_value(S, Z):
    """V = 1/2 Z' S Z."""
    Z = np.asarray(Z, dtype=float)
    return 0.5 * float(Z @ np.asarray(S, dtype=float) @ Z)


def bellman_regressor(Z_t, Z_next):
    """Regressor z_tilde with theta' z_tilde = V(Z_t) - V(Z_next)."""
    return qmonomials(Z_t) - qmonomials(Z_next)


def policy_from_kernel(S, n_features=None, eps_sing=1e-8):
    """Greedy linear gain -S_mumu^{-1} S_muF from the kernel blocks.

    n_features gives the size of the F partition; by default the control
    block is taken to be the last row/column (m = 1).
    """
    S = np.asarray(S, dtype=float)
    d = S.shape[0]
    if n_features is None:
        n_features = d - 1
    S_mumu = S[n_features:, n_features:]
    S_muF = S[n_features:, :n_features]
    if abs(np.linalg.det(S_mumu)) < eps_sing:
        raise SingularKernelError(
            f"|det S_mumu| = {abs(np.linalg.det(S_mumu)):.3g} below {eps_sing:.3g}")
    return -np.linalg.solve(S_mumu, S_muF)


def critic_update(theta, z_tilde, phi, sigma_c, alpha_c):
    """Normalized-projection critic step toward theta' z_tilde = phi."""
    theta = np.asarray(theta, dtype=float)
    z_tilde = np.asarray(z_tilde, dtype=float)
    residual = float(theta @ z_tilde) - phi
    return theta - sigma_c * z_tilde / (alpha_c + z_tilde @ z_tilde) * residual


def actor_update(pi, F, phi_target, sigma_a, alpha_a, rate_limit=None):
    """Normalized-projection actor step toward pi F = phi_target.

    rate_limit, when set, clamps the residual magnitude before the step;
    near-singular kernels make the greedy target hypersensitive to critic
    noise and an unclamped step can destabilize the loop.
    """
    pi = np.atleast_2d(np.asarray(pi, dtype=float))
    F = np.asarray(F, dtype=float)
    phi_target = np.atleast_1d(np.asarray(phi_target, dtype=float))
    residual = pi @ F - phi_target
    if rate_limit is not None:
        residual = np.clip(residual, -rate_limit, rate_limit)
    return pi - sigma_a * np.outer(residual, F) / (alpha_a + F @ F)


def kernel_converged(S_prev, S_next, tol_conv):
    """True when the Frobenius distance between kernels is below tol_conv."""
    diff = np.asarray(S_next, dtype=float) - np.asarray(S_prev, dtype=float)
    return float(np.linalg.norm(diff)) < tol_conv


@dataclass
class ProbeSpec:
    """Exploration signal: a sum of sinusoids added to each control increment
    during the first t_probe seconds.  Frequencies have irrational mutual
    ratios so the probe never repeats; each strategy gets its own phases."""

    amplitude: float = 0.1
    frequencies: tuple = (7.0, 9.899, 15.652)
    t_probe: float = 5.0
    phases: dict = field(default_factory=lambda: {
        "ob": (0.0, 1.0, 2.0),
        "cl": (0.5, 1.5, 2.5),
        "mf": (1.0, 2.0, 3.0),
    })

    def value(self, t, strategy):
        if t >= self.t_probe:
            return 0.0
        ph = self.phases[strategy]
        return self.amplitude * sum(
            np.sin(w * t + p) for w, p in zip(self.frequencies, ph))


@dataclass
class LearningConfig:
    """Weights, paces, and guards shared by the three strategies.

    The same Q/R pair is applied to every strategy (the benchmark uses
    identical weights).  Beyond the basic paces this carries the practical
    guards that keep online adaptation admissible: an actor rate limit, a
    kernel gain-ratio guard, and the convergence-freeze window that stops
    adaptation once the kernel has settled.
    """

    Q: np.ndarray = None
    R: float = 0.01
    delta: float = 0.01
    sigma_c: float = 0.5
    alpha_c: float = 1.8
    sigma_a: float = 0.5
    alpha_a: float = 1.8
    eps_sing: float = 1e-8
    tol_conv: float = 1e-4
    probe: ProbeSpec = field(default_factory=ProbeSpec)

    # adaptation guards / termination
    actor_rate_limit: float = 0.002
    actor_gain_guard: float = 1e4
    conv_window: int = 50
    conv_check_start: float = 1.0

    # initial strategies; 'stabilizing' uses the prior gains below,
    # 'identity' starts from S = I with zero gains
    init: str = "stabilizing"
    pi_cl0: tuple = (-3.5711, -0.2329, 0.2986)
    pi_ob0: tuple = (5.0, -30.0, 26.0)
    pi_mf0: tuple = (20.0, -120.0, 104.0)
    kernel_beta: float = 0.3
    kernel_smax: float = 2e-5

    def __post_init__(self):
        if self.Q is None:
            self.Q = 0.05 * np.eye(3)
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if not (0.0 < self.sigma_c < 2.0):
            raise ValueError("sigma_c must satisfy 0 < sigma_c < 2")
        if not (0.0 < self.sigma_a < 2.0):
            raise ValueError("sigma_a must satisfy 0 < sigma_a < 2")
        if self.alpha_c <= 0 or self.alpha_a <= 0:
            raise ValueError("alpha_c and alpha_a must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if float(self.R) <= 0:
            raise ValueError("R must be positive definite")
        ew = np.linalg.eigvalsh(0.5 * (self.Q + self.Q.T))
        if ew.min() < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if self.init not in ("stabilizing", "identity"):
            raise ValueError("init must be 'stabilizing' or 'identity'")
