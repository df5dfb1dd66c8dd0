"""Optimistic value iteration with Catoni next-state estimates, plus LSVI-UCB.

Episodes are numbered ``k = 1..K`` and steps ``h = 0..H-1``. During episode
``k`` the agent holds ``k - 1`` records per step. A record is the visited
feature ``phi``, the observed next state and its variance bound ``vbar^2``.
The bound of record ``k - 1`` is set at the start of episode ``k``, from the
previous episode's value tables and the design that excludes that record.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from force_rl.errors import ConfigError
from force_rl.linmdp import exact_optimal_values, policy_value
from force_rl.regression import (
    WeightedDesign,
    default_direction_net,
    design_update,
    directional_catoni,
    eigenbasis,
    summarize_linear_exact,
)
from force_rl.catoni import DEFAULT_ROOT

VARIANTS = ("exact", "efficient")
THEORY_C = 16.0


@dataclass(frozen=True)
class ForceConfig:
    """Parameters of one FORCE run.

    ``beta`` already includes ``practical_scale``. Use :meth:`create` to
    derive the defaults from problem sizes.
    """

    delta: float
    K: int
    H: int
    d: int
    lam: float
    v_min: float
    alpha_max: float
    k_init: int
    beta: float
    variant: str = "efficient"
    practical_scale: float = 1.0
    d_T_constant: float = 1.0
    net_random: int = 64
    net_seed: int = 0
    stride: int = 1

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.K < 1 or self.H < 1 or self.d < 1:
            raise ConfigError("K, H and d must be positive")
        if not 1 <= self.k_init <= self.K:
            raise ConfigError(f"k_init must lie in [1, K={self.K}], got {self.k_init}")
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not (self.lam > 0 and self.v_min > 0 and self.alpha_max >= 1):
            raise ConfigError("lam and v_min must be positive and alpha_max at least 1")
        if self.stride < 1:
            raise ConfigError("stride must be a positive integer")

    @staticmethod
    def log_terms(d, K, H, v_min, delta, c):
        return c * d * d * math.log(max(d, 1.0 / v_min, K, H)) + math.log(2 * H * K / delta)

    @classmethod
    def create(cls, d, H, K, delta=0.05, variant="efficient", practical_scale=1.0,
               d_T_constant=1.0, k_init=None, lam=None, v_min=None, alpha_max=None, **kw):
        """Defaults: ``lam = 1/H^2``, ``v_min = 1/K``, ``alpha_max = K / v_min``.

        The warm-start length uses the same constant as the bonus. When it
        reaches ``K`` the run would never leave warm start, so a
        :class:`ConfigError` asks for an explicit ``k_init``.
        """
        lam = 1.0 / H**2 if lam is None else lam
        v_min = 1.0 / K if v_min is None else v_min
        alpha_max = K / v_min if alpha_max is None else alpha_max
        L = cls.log_terms(d, K, H, v_min, delta, d_T_constant)
        if k_init is None:
            k_init = int(math.ceil(L))
            if k_init >= K:
                raise ConfigError(
                    f"derived k_init={k_init} is not below K={K}; pass k_init explicitly"
                )
        beta = practical_scale * 6.0 * math.sqrt(L)
        return cls(delta=delta, K=K, H=H, d=d, lam=lam, v_min=v_min, alpha_max=alpha_max,
                   k_init=int(k_init), beta=beta, variant=variant, practical_scale=practical_scale,
                   d_T_constant=d_T_constant, **kw)

    @classmethod
    def theory(cls, d, H, K, delta=0.05, variant="efficient", **kw):
        return cls.create(d, H, K, delta=delta, variant=variant, d_T_constant=THEORY_C, **kw)

    @property
    def bonus_coef(self):
        if self.variant == "exact":
            return 6.0
        return 3.0 * (math.sqrt(self.d) + 2)

    @property
    def beta_tilde(self):
        return 2 * self.beta if self.variant == "exact" else (math.sqrt(self.d) + 2) * self.beta

    def tail(self, k):
        c = 12.0 if self.variant == "exact" else 3.0 * (math.sqrt(self.d) + 2) ** 2
        return c * self.v_min * self.beta**2 / k**2


@dataclass
class StepHistory:
    """Records of one step ``h``, preallocated for ``K`` episodes."""

    phis: np.ndarray
    next_states: np.ndarray
    vbar_sq: np.ndarray
    design: WeightedDesign
    n: int = 0

    @classmethod
    def empty(cls, K, d, lam):
        return cls(np.zeros((K, d)), np.zeros(K, dtype=np.int64), np.zeros(K), WeightedDesign.empty(d, lam))


@dataclass
class OptimisticValueFn:
    """Per-step weights, designs and bonus settings realizing ``Q^k`` and ``V^k``."""

    w_hat: np.ndarray
    designs: list
    bonus_scale: float
    tail: float
    cap: float
    Q: np.ndarray
    V: np.ndarray
    clipped_low: int = 0

    def q_layer(self, h):
        return self.Q[h]


def q_values(phi, rewards_h, w, design, bonus_scale, tail, cap):
    """``clip(r + <phi, w> + bonus_scale * ||phi||_{Lambda^{-1}} + tail, 0, cap)``.

    ``phi`` has shape (S, A, d). Returns the clipped table and the number of
    entries raised to zero.
    """
    S, A, d = phi.shape
    flat = phi.reshape(S * A, d)
    raw = rewards_h.reshape(-1) + flat @ w + bonus_scale * design.inv_norm(flat) + tail
    q = np.minimum(raw, cap)
    low = int(np.count_nonzero(q < 0))
    return np.maximum(q, 0.0).reshape(S, A), low


def select_action(q_row):
    """Greedy action; ``argmax`` keeps the lowest index on ties."""
    return int(np.argmax(q_row))


def vbar_update(phis, targets, vbar_sq, design_prev, phi_new, cfg, k, root_cfg=DEFAULT_ROOT):
    """Variance bound of record ``k - 1``, set at the start of episode ``k``.

    ``phis``, ``targets`` and ``vbar_sq`` hold the ``k - 2`` earlier records;
    ``targets`` are next-state values under the episode ``k - 1`` tables and
    ``design_prev`` is the design built from those earlier records.
    """
    H = cfg.H
    if k <= cfg.k_init:
        return 2.0 * H * H
    phi_new = np.asarray(phi_new, dtype=np.float64)
    if phis.shape[0] == 0:
        cat = 0.0
    else:
        cat = float(directional_catoni(phis, targets, vbar_sq, design_prev, phi_new[None, :],
                                       cfg.beta, cfg.alpha_max, root_cfg)[0])
    b = cfg.beta
    first = 20 * H * cat + 20 * H * b * (design_prev.inv_norm(phi_new) + cfg.v_min * b / (k - 1) ** 2)
    return max(first, cfg.v_min**2)


def summary_weights(cfg, hist, targets, net_extra=None, root_cfg=DEFAULT_ROOT):
    """Linear summary ``w_hat`` of the directional estimates for one step.

    Returns ``(w_hat, residual)`` where ``residual`` is the largest
    ``|<u_i, w_hat> - est(u_i)|`` over eigen directions (0 for the exact variant).
    """
    n = hist.n
    design = hist.design
    if n == 0:
        return np.zeros(cfg.d), 0.0
    phis, vb = hist.phis[:n], hist.vbar_sq[:n]
    if cfg.variant == "efficient":
        U = eigenbasis(design)
        est = directional_catoni(phis, targets, vb, design, U.T, cfg.beta, cfg.alpha_max, root_cfg)
        w = U @ est
        return w, float(np.max(np.abs(U.T @ w - est)))
    net = default_direction_net(cfg.d, cfg.net_random, cfg.net_seed)
    if net_extra is not None:
        net = np.vstack([net, net_extra])
    est = directional_catoni(phis, targets, vb, design, net, cfg.beta, cfg.alpha_max, root_cfg)
    return summarize_linear_exact(net, est, design), 0.0


def build_q(cfg, hist, V_next, rewards_h, phi_tab, k, w_prev=None, root_cfg=DEFAULT_ROOT):
    """One optimistic layer ``Q_h^k`` from the step history and ``V_{h+1}^k``.

    Returns ``(Q_h, w_hat, clipped_low, eigen_residual)``. With ``w_prev``
    the summary is reused and only the bonus is refreshed.
    """
    if w_prev is None:
        targets = V_next[hist.next_states[:hist.n]]
        extra = phi_tab.reshape(-1, phi_tab.shape[-1]) if cfg.variant == "exact" else None
        w, resid = summary_weights(cfg, hist, targets, extra, root_cfg)
    else:
        w, resid = w_prev, 0.0
    q, low = q_values(phi_tab, rewards_h, w, hist.design, cfg.bonus_coef * cfg.beta, cfg.tail(k), cfg.H)
    return q, w, low, resid


@dataclass
class EpisodeTrace:
    """Per-step rollout data of one episode plus its episode-level values."""

    episode: int
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    features: np.ndarray
    vbar_sq: np.ndarray
    bonuses: np.ndarray
    v_optimistic: float
    v_pi: float
    v_star: float

    @property
    def bonus_sum(self):
        return float(self.bonuses.sum())


@dataclass
class RunDiagnostics:
    """Counters collected during a run."""

    clipped_low: int = 0
    optimism_violations: int = 0
    post_init_episodes: int = 0
    validity_checks: int = 0
    validity_violations: int = 0
    eigen_residual: float = 0.0
    max_tail: float = 0.0
    beta: float = 0.0
    k_init: int = 0
    net_size: int = 0
    extra: dict = field(default_factory=dict)


def _rollout(mdp, Q, rng, k):
    H = mdp.H
    s = mdp.initial_state
    out = np.zeros((4, H), dtype=np.float64)
    for h in range(H):
        a = select_action(Q[h, s])
        s_next, r = mdp.step(h, s, a, rng, episode_k=k)
        out[:, h] = (s, a, r, s_next)
        s = s_next
    return out


def _check_mdp(mdp, cfg_H, cfg_d=None):
    if cfg_H != mdp.H:
        raise ConfigError(f"config horizon {cfg_H} does not match the MDP horizon {mdp.H}")
    if cfg_d is not None and cfg_d != mdp.d:
        raise ConfigError(f"config dimension {cfg_d} does not match the MDP dimension {mdp.d}")


def run(mdp, cfg, seed, root_cfg=DEFAULT_ROOT, keep_values=False):
    """Run FORCE for ``cfg.K`` episodes.

    Returns ``(traces, report)``. With ``keep_values=True`` the report's
    ``diagnostics.extra["V"]`` holds every episode's optimistic value table.
    """
    from force_rl.report import RegretReport

    _check_mdp(mdp, cfg.H, cfg.d)
    H, S, A, d, K = mdp.H, mdp.S, mdp.A, mdp.d, cfg.K
    rng = np.random.default_rng(seed)
    phi_tab = mdp.phi_table()
    hists = [StepHistory.empty(K, d, cfg.lam) for _ in range(H)]
    diag = RunDiagnostics(beta=cfg.beta, k_init=cfg.k_init)
    if cfg.variant == "exact":
        diag.net_size = 2 * d + max(cfg.net_random, 0) + S * A
    else:
        diag.net_size = d
    v_star_cache = {}
    traces = []
    prev_V = None
    w_hat = np.zeros((H, d))
    Q = np.zeros((H, S, A))
    V = np.zeros((H + 1, S))
    stored_V = []
    for k in range(1, K + 1):
        vbar_this = np.zeros(H)
        if k >= 2:
            for h in range(H):
                hist = hists[h]
                i = hist.n  # index of record k-1
                phi = hist.phis[i]
                targets = prev_V[h + 1][hist.next_states[:i]]
                vb = vbar_update(hist.phis[:i], targets, hist.vbar_sq[:i], hist.design, phi, cfg, k, root_cfg)
                s_prev, a_prev = int(traces[-1].states[h]), int(traces[-1].actions[h])
                second = float(mdp.P[h, s_prev, a_prev] @ prev_V[h + 1] ** 2)
                diag.validity_checks += 1
                if second > 0.5 * vb * (1 + 1e-12):
                    diag.validity_violations += 1
                hist.vbar_sq[i] = vb
                hist.design = design_update(hist.design, phi, vb)
                hist.n += 1
                vbar_this[h] = vb
        else:
            vbar_this[:] = 2.0 * H * H
        tail = cfg.tail(k)
        diag.max_tail = max(diag.max_tail, tail)
        rewards = mdp.reward_table(k)
        recompute = (k - 1) % cfg.stride == 0
        V = np.zeros((H + 1, S))
        for h in range(H - 1, -1, -1):
            hist = hists[h]
            Q[h], w_hat[h], low, resid = build_q(
                cfg, hist, V[h + 1], rewards[h], phi_tab, k, w_prev=None if recompute else w_hat[h],
                root_cfg=root_cfg)
            diag.eigen_residual = max(diag.eigen_residual, resid)
            diag.clipped_low += low
            V[h] = Q[h].max(axis=1)
        roll = _rollout(mdp, Q, rng, k)
        states, actions = roll[0].astype(np.int64), roll[1].astype(np.int64)
        for h in range(H):
            hist = hists[h]
            hist.phis[hist.n] = mdp.phi(states[h], actions[h])
            hist.next_states[hist.n] = int(roll[3, h])
        key = None if mdp.reward_schedule is None else min(k, mdp.reward_schedule.shape[0])
        if key not in v_star_cache:
            v_star_cache[key] = float(exact_optimal_values(mdp, k).V[0, mdp.initial_state])
        v_star = v_star_cache[key]
        v_pi = policy_value(mdp, np.argmax(Q, axis=2), k)
        v_opt = float(V[0, mdp.initial_state])
        if k > cfg.k_init:
            diag.post_init_episodes += 1
            if v_opt < v_star - 1e-12:
                diag.optimism_violations += 1
        bon = np.array([
            cfg.bonus_coef * cfg.beta * hists[h].design.inv_norm(mdp.phi(states[h], actions[h]))
            for h in range(H)
        ])
        traces.append(EpisodeTrace(
            episode=k, states=states, actions=actions, rewards=roll[2].copy(),
            next_states=roll[3].astype(np.int64), features=np.vstack([mdp.phi(s, a) for s, a in zip(states, actions)]),
            vbar_sq=vbar_this, bonuses=bon, v_optimistic=v_opt, v_pi=v_pi, v_star=v_star,
        ))
        prev_V = V
        if keep_values:
            stored_V.append(V.copy())
    if keep_values:
        diag.extra["V"] = stored_V
    diag.extra["value_fn"] = OptimisticValueFn(
        w_hat=w_hat.copy(), designs=[hist.design for hist in hists], bonus_scale=cfg.bonus_coef * cfg.beta,
        tail=cfg.tail(K), cap=float(H), Q=Q.copy(), V=V.copy(), clipped_low=diag.clipped_low)
    report = RegretReport.from_traces(traces, seed=seed, beta=cfg.beta, diagnostics=diag)
    return traces, report


@dataclass(frozen=True)
class LsviConfig:
    """Unweighted ridge regression with a Hoeffding-style bonus."""

    delta: float
    K: int
    H: int
    d: int
    lam: float = 1.0
    c_b: float = 1.0
    practical_scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigError("delta must lie in (0, 1)")
        if self.K < 1 or self.H < 1 or self.d < 1 or not self.lam > 0:
            raise ConfigError("K, H, d and lam must be positive")

    @property
    def bonus_scale(self):
        return self.practical_scale * self.c_b * self.d * self.H * math.sqrt(
            math.log(self.d * self.K * self.H / self.delta))


def run_lsvi_ucb(mdp, cfg, seed):
    from force_rl.report import RegretReport

    _check_mdp(mdp, cfg.H, cfg.d)
    H, S, A, d, K = mdp.H, mdp.S, mdp.A, mdp.d, cfg.K
    rng = np.random.default_rng(seed)
    phi_tab = mdp.phi_table()
    designs = [WeightedDesign.empty(d, cfg.lam) for _ in range(H)]
    phis = np.zeros((H, K, d))
    nexts = np.zeros((H, K), dtype=np.int64)
    diag = RunDiagnostics(beta=cfg.bonus_scale)
    v_star_cache = {}
    traces = []
    Q = np.zeros((H, S, A))
    for k in range(1, K + 1):
        n = k - 1
        rewards = mdp.reward_table(k)
        V = np.zeros((H + 1, S))
        for h in range(H - 1, -1, -1):
            if n:
                rhs = phis[h, :n].T @ V[h + 1][nexts[h, :n]]
                w = designs[h].solve(rhs)
            else:
                w = np.zeros(d)
            Q[h], low = q_values(phi_tab, rewards[h], w, designs[h], cfg.bonus_scale, 0.0, H)
            diag.clipped_low += low
            V[h] = Q[h].max(axis=1)
        roll = _rollout(mdp, Q, rng, k)
        states, actions = roll[0].astype(np.int64), roll[1].astype(np.int64)
        bon = np.zeros(H)
        feats = np.vstack([mdp.phi(s, a) for s, a in zip(states, actions)])
        for h in range(H):
            bon[h] = cfg.bonus_scale * designs[h].inv_norm(feats[h])
            phis[h, n] = feats[h]
            nexts[h, n] = int(roll[3, h])
            designs[h] = design_update(designs[h], feats[h], 1.0)
        key = None if mdp.reward_schedule is None else min(k, mdp.reward_schedule.shape[0])
        if key not in v_star_cache:
            v_star_cache[key] = float(exact_optimal_values(mdp, k).V[0, mdp.initial_state])
        v_star = v_star_cache[key]
        v_pi = policy_value(mdp, np.argmax(Q, axis=2), k)
        traces.append(EpisodeTrace(
            episode=k, states=states, actions=actions, rewards=roll[2].copy(),
            next_states=roll[3].astype(np.int64), features=feats, vbar_sq=np.ones(H),
            bonuses=bon, v_optimistic=float(V[0, mdp.initial_state]), v_pi=v_pi, v_star=v_star,
        ))
    report = RegretReport.from_traces(traces, seed=seed, beta=cfg.bonus_scale, diagnostics=diag)
    return traces, report
