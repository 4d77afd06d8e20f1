"""Episode orchestration: plant, desired model, reference, three learners.

One learner tick covers an interval of length delta: controls are composed
and held, both systems are integrated on a substep grid, tracking errors
are sampled into the feature stacks, and each strategy performs one critic
and one actor projection step.  The observer and model-following signals
are incremental (u <- u + mu); the closed-loop term is direct feedback on
the observed state.  Adaptation of a strategy stops once its kernel has
remained settled for a configured window (convergence freeze).
"""

from dataclasses import dataclass, field

import numpy as np

from modelfollow import learner as ln
from modelfollow import oracle
from modelfollow.dynamics import rk4_step
from modelfollow.error_stack import ErrorStack
from modelfollow.learner import (
    SingularKernelError, theta_to_S, S_to_theta, qmonomials,
    bellman_regressor, policy_from_kernel, critic_update, actor_update,
    kernel_converged, utility,
)
from modelfollow.reference import eval_reference

STRATEGIES = ("ob", "cl", "mf")


@dataclass
class ControlState:
    """Composed control signals at a learner tick."""

    u_ob: float = 0.0
    u_mf: float = 0.0
    mu_cl: float = 0.0

    @property
    def u_total(self):
        return self.mu_cl + self.u_mf


def compose_control(mu_cl, u_mf):
    """Main control u = mu_cl + u_mf."""
    return mu_cl + u_mf


def observer_input(u_ob, u_total):
    """Input seen by the desired model: the observer signal plus the main control."""
    return u_ob + u_total


@dataclass
class StrategyState:
    theta: np.ndarray
    pi: np.ndarray
    frozen: bool = False
    conv_count: int = 0
    t_converged: float = None


@dataclass
class EpisodeLog:
    """Uniformly sampled trajectories plus learner internals for one episode."""

    t: list = field(default_factory=list)
    x: list = field(default_factory=list)
    xhat: list = field(default_factory=list)
    y: list = field(default_factory=list)
    yhat: list = field(default_factory=list)
    yref: list = field(default_factory=list)
    e_ob: list = field(default_factory=list)
    e_mf: list = field(default_factory=list)
    u_total: list = field(default_factory=list)
    mu_cl: list = field(default_factory=list)
    u_ob: list = field(default_factory=list)
    u_mf: list = field(default_factory=list)
    theta_hist: dict = field(default_factory=lambda: {s: [] for s in STRATEGIES})
    pi_hist: dict = field(default_factory=lambda: {s: [] for s in STRATEGIES})
    regressors: dict = field(default_factory=lambda: {s: [] for s in STRATEGIES})
    residuals: dict = field(default_factory=lambda: {s: [] for s in STRATEGIES})
    t_converged: dict = field(default_factory=lambda: {s: None for s in STRATEGIES})
    pi_final: dict = field(default_factory=dict)
    theta_final: dict = field(default_factory=dict)
    diverged: float = None

    def window(self, t_lo, t_hi):
        """Boolean mask over ticks with t_lo <= t <= t_hi."""
        ts = np.asarray(self.t)
        return (ts >= t_lo) & (ts <= t_hi)


def embedded_gain_kernel(pi, beta, s_max):
    """Positive-definite kernel whose greedy policy equals the given gain.

    Uses the bordered form [[beta I, -s pi'], [-s pi, s]]; choosing
    s < beta / ||pi||^2 keeps the Schur complement positive definite.
    """
    pi = np.asarray(pi, dtype=float).reshape(-1)
    nf = pi.size
    s = min(s_max, 0.5 * beta / float(pi @ pi))
    S = np.eye(nf + 1) * beta
    S[nf, nf] = s
    S[nf, :nf] = -s * pi
    S[:nf, nf] = -s * pi
    return S


def initial_strategies(model, cfg):
    """Initial kernels and gains for the three strategies.

    'stabilizing' evaluates the configured prior gains: the closed-loop
    kernel is the policy-evaluation kernel of its prior gain on the desired
    model, and the error-feature kernels embed their prior gains in a
    bordered positive-definite form.  'identity' starts every kernel at I
    with zero gains.
    """
    states = {}
    if cfg.init == "identity":
        for s in STRATEGIES:
            d = (model.n if s == "cl" else 3) + 1
            states[s] = StrategyState(S_to_theta(np.eye(d)), np.zeros(d - 1))
        return states

    priors = {"ob": np.asarray(cfg.pi_ob0, dtype=float),
              "cl": np.asarray(cfg.pi_cl0, dtype=float),
              "mf": np.asarray(cfg.pi_mf0, dtype=float)}
    S_cl = oracle.policy_value_kernel(
        model.A_hat, model.B_hat, priors["cl"], cfg.Q, cfg.R, cfg.delta)
    states["cl"] = StrategyState(S_to_theta(S_cl), priors["cl"].copy())
    for s in ("ob", "mf"):
        S = embedded_gain_kernel(priors[s], cfg.kernel_beta, cfg.kernel_smax)
        states[s] = StrategyState(S_to_theta(S), priors[s].copy())
    return states


def _learn_step(state, F, F_next, mu, phi, cfg, t):
    """One critic + actor projection step for a single strategy."""
    Z_t = np.concatenate([F, [mu]])
    Z_next = np.concatenate([F_next, [float(state.pi @ F_next)]])
    z_tilde = bellman_regressor(Z_t, Z_next)
    residual = float(state.theta @ z_tilde) - phi
    if state.frozen:
        return z_tilde, residual

    theta_next = critic_update(state.theta, z_tilde, phi, cfg.sigma_c, cfg.alpha_c)
    settled = kernel_converged(
        theta_to_S(state.theta), theta_to_S(theta_next), cfg.tol_conv)
    state.theta = theta_next
    S = 0.5 * (theta_to_S(state.theta) + theta_to_S(state.theta).T)

    nf = F.size
    try:
        gain_row = policy_from_kernel(S, n_features=nf, eps_sing=cfg.eps_sing)
        gain_ratio = np.linalg.norm(S[nf:, :nf]) / abs(S[nf, nf])
        if gain_ratio <= cfg.actor_gain_guard:
            target = gain_row @ F
            pi_next = actor_update(state.pi, F, target, cfg.sigma_a, cfg.alpha_a,
                                   rate_limit=cfg.actor_rate_limit)
            state.pi = np.asarray(pi_next).reshape(-1)
    except SingularKernelError:
        pass  # keep the previous actor this cycle

    if t >= cfg.conv_check_start:
        state.conv_count = state.conv_count + 1 if settled else 0
        if state.conv_count >= cfg.conv_window and not state.frozen:
            state.frozen = True
    return z_tilde, residual


def run_episode(model, ref_spec, cfg, horizon=20.0, substeps=10,
                learning_enabled=True, initial=None, x0=None, xhat0=None):
    """Simulate one episode and return its log.

    Args:
        model: ProcessModel with the exact and desired systems.
        ref_spec: ReferenceSpec for the command generator.
        cfg: LearningConfig.
        horizon: episode length in seconds.
        substeps: integration substeps per learner tick.
        learning_enabled: when False the critic/actor updates are skipped
            and the initial gains act as fixed controllers.
        initial: optional dict of StrategyState overriding the defaults.

    Returns:
        EpisodeLog.  Divergence stops the episode early and is recorded in
        log.diverged; the partial log is still returned.
    """
    if model.m != 1 or model.p != 1:
        raise NotImplementedError("single-input single-output plants only")

    states = initial if initial is not None else initial_strategies(model, cfg)
    delta = cfg.delta
    h = delta / substeps
    n_ticks = int(round(horizon / delta))
    A, B = model.A, model.B[:, 0]
    Ah, Bh = model.A_hat, model.B_hat[:, 0]
    Crow = model.C[0]

    x = np.zeros(model.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    xh = np.zeros(model.n) if xhat0 is None else np.asarray(xhat0, dtype=float).copy()
    u_ob = 0.0
    u_mf = 0.0
    stack_ob = ErrorStack(depth=3, dim=1)
    stack_mf = ErrorStack(depth=3, dim=1)

    log = EpisodeLog()

    def record(t, mu_cl, u_tot):
        log.t.append(t)
        log.x.append(x.copy())
        log.xhat.append(xh.copy())
        y = float(Crow @ x)
        yh = float(Crow @ xh)
        yr = float(eval_reference(ref_spec, t)[0])
        log.y.append(y)
        log.yhat.append(yh)
        log.yref.append(yr)
        log.e_ob.append(y - yh)
        log.e_mf.append(yr - y)
        log.u_total.append(u_tot)
        log.mu_cl.append(mu_cl)
        log.u_ob.append(u_ob)
        log.u_mf.append(u_mf)
        for s in STRATEGIES:
            log.theta_hist[s].append(states[s].theta.copy())
            log.pi_hist[s].append(states[s].pi.copy())
        return y, yh, yr

    # initial record and first error samples at t = 0
    y0, yh0, yr0 = record(0.0, 0.0, 0.0)
    stack_ob.push(y0 - yh0)
    stack_mf.push(yr0 - y0)

    for k in range(n_ticks):
        t = k * delta

        F = {"cl": xh.copy(),
             "ob": stack_ob.as_vector() if stack_ob.ready else None,
             "mf": stack_mf.as_vector() if stack_mf.ready else None}

        mu_cl = float(states["cl"].pi @ F["cl"]) + cfg.probe.value(t, "cl")
        mu_ob = (float(states["ob"].pi @ F["ob"]) + cfg.probe.value(t, "ob")) \
            if F["ob"] is not None else 0.0
        mu_mf = (float(states["mf"].pi @ F["mf"]) + cfg.probe.value(t, "mf")) \
            if F["mf"] is not None else 0.0

        u_ob += mu_ob
        u_mf += mu_mf
        u_tot = compose_control(mu_cl, u_mf)
        v = observer_input(u_ob, u_tot)

        # the closed-loop learner prices the full input seen by the desired
        # model, which is what keeps its logged data Bellman-consistent
        a_cl = v

        phi_cl = 0.0
        u_prev = utility(xh, a_cl, cfg.Q, cfg.R)
        for _ in range(substeps):
            x = rk4_step(np.atleast_2d(A), B.reshape(-1, 1), x, np.array([u_tot]), h)
            xh = rk4_step(np.atleast_2d(Ah), Bh.reshape(-1, 1), xh, np.array([v]), h)
            u_new = utility(xh, a_cl, cfg.Q, cfg.R)
            phi_cl += 0.5 * h * (u_prev + u_new)
            u_prev = u_new
        t_next = t + delta

        if not np.all(np.isfinite(x)) or np.abs(x).max() > 1e7:
            log.diverged = t_next
            break

        y, yh, yr = record(t_next, mu_cl, u_tot)
        was_ready = {"ob": F["ob"] is not None, "mf": F["mf"] is not None}
        stack_ob.push(y - yh)
        stack_mf.push(yr - y)

        F_next = {"cl": xh.copy(),
                  "ob": stack_ob.as_vector() if was_ready["ob"] else None,
                  "mf": stack_mf.as_vector() if was_ready["mf"] else None}
        mu = {"cl": a_cl, "ob": mu_ob, "mf": mu_mf}
        phi = {"cl": phi_cl}
        for s, Fv, mv in (("ob", F["ob"], mu_ob), ("mf", F["mf"], mu_mf)):
            phi[s] = delta * utility(Fv, mv, cfg.Q, cfg.R) if Fv is not None else None

        for s in STRATEGIES:
            if F[s] is None or F_next[s] is None:
                continue
            if not learning_enabled:
                continue
            z_tilde, residual = _learn_step(
                states[s], F[s], F_next[s], mu[s], phi[s], cfg, t)
            log.regressors[s].append((z_tilde, phi[s]))
            log.residuals[s].append(residual)
            if states[s].frozen and log.t_converged[s] is None:
                log.t_converged[s] = t_next

    for s in STRATEGIES:
        log.pi_final[s] = states[s].pi.copy()
        log.theta_final[s] = states[s].theta.copy()
    return log
