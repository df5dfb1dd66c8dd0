"""Tabular-backed linear MDPs with exact dynamic-programming oracles.

Steps are zero-based: ``h = 0`` is the first step and ``V[H] = 0``. A state
action pair ``(s, a)`` owns the feature row ``s * A + a``. The transition
``P_h(s' | s, a)`` is ``<phi(s, a), M_h[s']>`` where ``M_h`` has one row
per next state.
"""

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from force_rl.errors import (
    FeatureNormViolation,
    InvalidInstance,
    InvalidKernel,
    InvalidReward,
    OracleUnavailable,
)

SCHEMA_VERSION = 1
PROB_TOL = 1e-10


@dataclass(frozen=True)
class ValueTables:
    """Values ``V`` of shape (H+1, S) and action values ``Q`` of shape (H, S, A)."""

    V: np.ndarray
    Q: np.ndarray

    @property
    def H(self):
        return self.Q.shape[0]

    def greedy_policy(self):
        # argmax returns the lowest index on ties
        return np.argmax(self.Q, axis=2)


@dataclass(frozen=True, eq=False)
class LinearMDP:
    """A finite linear MDP with explicit features and next-state measures.

    Parameters
    ----------
    features : ndarray, shape (S*A, d)
        Row ``s*A + a`` is ``phi(s, a)``.
    measures : ndarray, shape (H, S, d)
        ``measures[h, s']`` is the measure vector ``mu_h(s')``.
    rewards : ndarray, shape (H, S, A)
        Deterministic rewards in ``[0, 1]``.
    initial_state : int
    reward_schedule : ndarray, shape (K', H, S, A), optional
        Per-episode rewards, non-increasing in the episode index. Episode
        ``k`` (one-based) uses entry ``min(k, K') - 1``.
    tabular : bool
        Whether exact DP oracles may be used on this instance.
    """

    features: np.ndarray
    measures: np.ndarray
    rewards: np.ndarray
    initial_state: int = 0
    reward_schedule: Optional[np.ndarray] = None
    tabular: bool = True
    name: str = "custom"
    seed: Optional[int] = None

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64)
        meas = np.array(self.measures, dtype=np.float64)
        rew = np.array(self.rewards, dtype=np.float64)
        if feats.ndim != 2 or meas.ndim != 3 or rew.ndim != 3:
            raise InvalidInstance("features must be 2-d, measures and rewards 3-d")
        H, S, A = rew.shape
        if feats.shape[0] != S * A:
            raise InvalidInstance(f"expected {S * A} feature rows, got {feats.shape[0]}")
        if meas.shape != (H, S, feats.shape[1]):
            raise InvalidInstance(f"measures must have shape {(H, S, feats.shape[1])}, got {meas.shape}")
        if not 0 <= int(self.initial_state) < S:
            raise InvalidInstance("initial state out of range")
        norms = np.linalg.norm(feats, axis=1)
        if np.any(norms > 1 + 1e-12):
            raise FeatureNormViolation(f"feature norm {norms.max():.17g} exceeds 1")
        if np.any(norms == 0):
            raise InvalidInstance("zero feature vector")
        _check_rewards(rew)
        sched = None
        if self.reward_schedule is not None:
            sched = np.array(self.reward_schedule, dtype=np.float64)
            if sched.ndim != 4 or sched.shape[1:] != rew.shape:
                raise InvalidInstance("reward schedule must have shape (K', H, S, A)")
            _check_rewards(sched)
            if np.any(np.diff(sched, axis=0) > 0):
                raise InvalidReward("reward schedule must be non-increasing across episodes")
        d = feats.shape[1]
        mass = np.abs(meas).sum(axis=1)  # (H, d) total variation per coordinate
        worst = float(np.linalg.norm(mass, axis=1).max())
        if worst > math.sqrt(d) * (1 + 1e-9):
            raise InvalidInstance(f"measure mass norm {worst:.6g} exceeds sqrt(d) = {math.sqrt(d):.6g}")
        P = np.einsum("xd,hsd->hxs", feats, meas).reshape(H, S, A, S)
        if np.any(P < -PROB_TOL):
            raise InvalidKernel(f"negative transition probability {P.min():.3g}")
        if np.any(np.abs(P.sum(axis=3) - 1) > PROB_TOL):
            raise InvalidKernel("transition rows must sum to 1")
        for arr in (feats, meas, rew):
            arr.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "measures", meas)
        object.__setattr__(self, "rewards", rew)
        object.__setattr__(self, "reward_schedule", sched)
        object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def H(self):
        return self.rewards.shape[0]

    @property
    def S(self):
        return self.rewards.shape[1]

    @property
    def A(self):
        return self.rewards.shape[2]

    @property
    def d(self):
        return self.features.shape[1]

    def phi(self, s, a):
        return self.features[s * self.A + a]

    def phi_table(self):
        """Features as an (S, A, d) view."""
        return self.features.reshape(self.S, self.A, self.d)

    @cached_property
    def P(self):
        """Transition tensor of shape (H, S, A, S), clipped to be nonnegative."""
        P = np.einsum("xd,hsd->hxs", self.features, self.measures).reshape(self.H, self.S, self.A, self.S)
        P = np.maximum(P, 0.0)
        P.setflags(write=False)
        return P

    @cached_property
    def _cdf(self):
        c = np.cumsum(self.P, axis=3)
        c[..., -1] = np.inf
        return c

    def reward_table(self, episode_k=None):
        if self.reward_schedule is None or episode_k is None:
            return self.rewards
        idx = min(int(episode_k), self.reward_schedule.shape[0]) - 1
        if idx < 0:
            raise ValueError("episodes are numbered from 1")
        return self.reward_schedule[idx]

    def step(self, h, s, a, rng, episode_k=None):
        """Sample ``(next_state, reward)`` by inverse CDF on one uniform draw."""
        if not (0 <= h < self.H and 0 <= s < self.S and 0 <= a < self.A):
            raise IndexError(f"invalid (h, s, a) = ({h}, {s}, {a})")
        u = rng.random()
        nxt = int(np.searchsorted(self._cdf[h, s, a], u, side="right"))
        return min(nxt, self.S - 1), float(self.reward_table(episode_k)[h, s, a])

    def _require_oracle(self):
        if not self.tabular:
            raise OracleUnavailable("exact oracles need a tabular-backed instance")


def _check_rewards(r):
    if not np.all(np.isfinite(r)) or np.any(r < 0) or np.any(r > 1):
        raise InvalidReward("rewards must lie in [0, 1]")


def from_tabular(P, r, s1=0, name="tabular", seed=None):
    """Indicator (simplex) embedding of a tabular MDP with ``d = S*A``."""
    P = np.asarray(P, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if P.ndim != 4 or P.shape[1] != P.shape[3] or P.shape[:3] != r.shape:
        raise InvalidInstance("expected P of shape (H, S, A, S) and r of shape (H, S, A)")
    H, S, A, _ = P.shape
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=3) - 1) > PROB_TOL):
        raise InvalidKernel("each P_h(.|s,a) must be a probability vector")
    _check_rewards(r)
    features = np.eye(S * A)
    # mu_h(s')[s*A + a] = P_h(s'|s,a)
    measures = P.reshape(H, S * A, S).transpose(0, 2, 1).copy()
    return LinearMDP(features, measures, r, initial_state=s1, name=name, seed=seed)


def exact_optimal_values(mdp, episode_k=None):
    """Backward induction for ``Q*`` and ``V*``."""
    mdp._require_oracle()
    H, S, A = mdp.H, mdp.S, mdp.A
    r = mdp.reward_table(episode_k)
    V = np.zeros((H + 1, S))
    Q = np.zeros((H, S, A))
    for h in range(H - 1, -1, -1):
        Q[h] = r[h] + mdp.P[h] @ V[h + 1]
        V[h] = Q[h].max(axis=1)
    return ValueTables(V=V, Q=Q)


def policy_tables(mdp, policy, episode_k=None):
    """Backward evaluation of a deterministic (H, S) policy table."""
    mdp._require_oracle()
    policy = np.asarray(policy, dtype=np.int64)
    if policy.shape != (mdp.H, mdp.S):
        raise ValueError(f"policy must have shape {(mdp.H, mdp.S)}")
    r = mdp.reward_table(episode_k)
    V = np.zeros((mdp.H + 1, mdp.S))
    Q = np.zeros((mdp.H, mdp.S, mdp.A))
    idx = np.arange(mdp.S)
    for h in range(mdp.H - 1, -1, -1):
        Q[h] = r[h] + mdp.P[h] @ V[h + 1]
        V[h] = Q[h][idx, policy[h]]
    return ValueTables(V=V, Q=Q)


def policy_value(mdp, policy, episode_k=None):
    return float(policy_tables(mdp, policy, episode_k).V[0, mdp.initial_state])


def hard_instance(p, S=4, A=2, H=3, seed=0):
    """Chain where reward is only collected after a reach event of probability ``p``.

    From the start state the correct action reaches an absorbing goal with
    probability ``p`` and falls into an absorbing zero-reward sink otherwise.
    Wrong actions lead to distractor states that drain into the sink. The
    goal pays 1 per step, so ``V*_1 = p (H - 1)``. The seed only permutes
    state and action labels.
    """
    if not 0 < p <= 1:
        raise ValueError("reach probability must lie in (0, 1]")
    if S < 3 or A < 1 or H < 2:
        raise ValueError("need S >= 3, A >= 1 and H >= 2")
    start, goal, sink = 0, 1, 2
    distractors = list(range(3, S)) or [sink]
    P = np.zeros((H, S, A, S))
    r = np.zeros((H, S, A))
    P[:, :, :, sink] = 1.0
    P[:, goal, :, :] = 0.0
    P[:, goal, :, goal] = 1.0
    r[:, goal, :] = 1.0
    P[:, start, :, :] = 0.0
    P[:, start, 0, goal] = p
    P[:, start, 0, sink] += 1 - p
    for a in range(1, A):
        P[:, start, a, distractors] = 1.0 / len(distractors)
    rng = np.random.default_rng(seed)
    sp = rng.permutation(S)  # new label of old state
    ap = rng.permutation(A)
    P2 = np.zeros_like(P)
    r2 = np.zeros_like(r)
    P2[:, sp[:, None], ap[None, :], :] = P[:, :, :, np.argsort(sp)]
    r2[:, sp[:, None], ap[None, :]] = r
    return from_tabular(P2, r2, s1=int(sp[start]), name=f"hard(p={p:.17g})", seed=seed)


def random_tabular(S=5, A=2, H=3, seed=0, reward_sparsity=0.0):
    """Dirichlet(1) kernels with uniform rewards; a fraction of rewards is zeroed."""
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(S), size=(H, S, A))
    r = rng.random((H, S, A))
    if reward_sparsity > 0:
        r *= rng.random((H, S, A)) >= reward_sparsity
    return from_tabular(P, r, s1=0, name=f"random(S={S},A={A},H={H})", seed=seed)


def simplex_instance(S=6, A=2, H=3, d=3, seed=0, rotate=False):
    """Low-rank linear MDP with simplex features over ``d`` latent next-state laws.

    With ``rotate=True`` features and measures are rotated by one random
    orthogonal matrix. Transitions are unchanged, but the measure mass bound
    must be checked again; violating instances raise
    :class:`~force_rl.errors.InvalidInstance`.
    """
    rng = np.random.default_rng(seed)
    feats = rng.dirichlet(np.ones(d), size=S * A)
    meas = rng.dirichlet(np.ones(S), size=(H, d)).transpose(0, 2, 1)  # (H, S, d)
    r = rng.random((H, S, A))
    if rotate:
        R, _ = np.linalg.qr(rng.standard_normal((d, d)))
        feats = feats @ R
        meas = meas @ R
        mass = np.linalg.norm(np.abs(meas).sum(axis=1), axis=1).max()
        if mass > math.sqrt(d) * (1 + 1e-9):
            raise InvalidInstance(
                f"rotated measure mass norm {mass:.6g} exceeds sqrt(d) = {math.sqrt(d):.6g} (seed {seed})"
            )
    return LinearMDP(feats, meas, r, initial_state=0, name=f"simplex(d={d},rotate={rotate})", seed=seed)


def small_suite(seed=0):
    """A handful of small instances used by optimism and validity checks."""
    return [
        random_tabular(S=3, A=2, H=2, seed=seed),
        hard_instance(0.5, S=3, A=2, H=2, seed=seed),
        random_tabular(S=2, A=2, H=3, seed=seed + 1),
    ]


def save_mdp(mdp, path):
    with open(path, "w") as fh:
        fh.write(dumps_mdp(mdp))


def dumps_mdp(mdp):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": mdp.name,
        "seed": mdp.seed,
        "H": mdp.H,
        "S": mdp.S,
        "A": mdp.A,
        "d": mdp.d,
        "initial_state": mdp.initial_state,
        "tabular": mdp.tabular,
        "features": mdp.features.tolist(),
        "measures": mdp.measures.tolist(),
        "rewards": mdp.rewards.tolist(),
        "reward_schedule": None if mdp.reward_schedule is None else mdp.reward_schedule.tolist(),
    }
    return json.dumps(doc, indent=1) + "\n"


def loads_mdp(text):
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise InvalidInstance(f"unsupported schema_version {doc.get('schema_version')!r}")
    mdp = LinearMDP(
        features=np.asarray(doc["features"], dtype=np.float64).reshape(doc["S"] * doc["A"], doc["d"]),
        measures=np.asarray(doc["measures"], dtype=np.float64).reshape(doc["H"], doc["S"], doc["d"]),
        rewards=np.asarray(doc["rewards"], dtype=np.float64).reshape(doc["H"], doc["S"], doc["A"]),
        initial_state=doc["initial_state"],
        reward_schedule=None if doc["reward_schedule"] is None else np.asarray(doc["reward_schedule"]),
        tabular=doc["tabular"],
        name=doc["name"],
        seed=doc["seed"],
    )
    return mdp


def load_mdp(path):
    with open(path) as fh:
        return loads_mdp(fh.read())
