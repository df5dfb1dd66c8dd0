"""Heteroscedastic martingale linear regression with Catoni estimates.

A stream holds triples ``(phi_t, y_t, sigma_t^2)``. The variance-weighted
design is ``Lambda = lam * I + sum_t phi_t phi_t^T / sigma_t^2``. A
directional estimate of ``<v, theta*>`` is the Catoni root of
``X_t = T * v^T Lambda^{-1} phi_t * y_t / sigma_t^2``, with scale
``alpha = min(width / ||T Lambda^{-1} v||_Sigma, alpha_max)``.

Directional estimates are summarized into a single weight vector either by
a min-max fit over a finite direction net (solved as a linear program) or by
reading the estimates along the eigenvectors of ``Lambda``.
"""

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
import scipy.optimize

from force_rl.catoni import DEFAULT_ROOT, catoni_roots
from force_rl.errors import (
    EmptyData,
    EmptyNet,
    FeatureNormViolation,
    NumericalFailure,
    ZeroDirection,
)

NORM_SLACK = 1e-12
THEORY_D_T_CONSTANT = 16.0


def logs(*xs):
    """Sum of ``log(e + x)``: at most logarithmic in every argument."""
    return float(sum(math.log(math.e + x) for x in xs))


def _check_phi(phi):
    norm = float(np.linalg.norm(phi))
    if norm > 1 + NORM_SLACK:
        raise FeatureNormViolation(f"feature norm {norm:.17g} exceeds 1")


@dataclass
class RegressionStream:
    """Time-ordered regression records with a stream-level variance floor."""

    dim: int
    sigma_min: float = 0.0
    _phis: list = field(default_factory=list, repr=False)
    _ys: list = field(default_factory=list, repr=False)
    _sigma_sqs: list = field(default_factory=list, repr=False)

    def append(self, phi, y, sigma_sq):
        phi = np.asarray(phi, dtype=np.float64).reshape(self.dim)
        _check_phi(phi)
        if not sigma_sq > 0:
            raise ValueError("sigma_sq must be positive")
        if sigma_sq < self.sigma_min**2 * (1 - 1e-12):
            raise ValueError(f"sigma_sq {sigma_sq} below the stream floor {self.sigma_min}^2")
        self._phis.append(phi)
        self._ys.append(float(y))
        self._sigma_sqs.append(float(sigma_sq))

    @classmethod
    def from_arrays(cls, phis, ys, sigma_sqs, sigma_min=0.0):
        phis = np.atleast_2d(np.asarray(phis, dtype=np.float64))
        stream = cls(dim=phis.shape[1], sigma_min=sigma_min)
        for phi, y, s in zip(phis, ys, sigma_sqs):
            stream.append(phi, y, s)
        return stream

    def __len__(self):
        return len(self._ys)

    @property
    def phis(self):
        if not self._phis:
            return np.zeros((0, self.dim))
        return np.vstack(self._phis)

    @property
    def ys(self):
        return np.asarray(self._ys, dtype=np.float64)

    @property
    def sigma_sqs(self):
        return np.asarray(self._sigma_sqs, dtype=np.float64)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"phi_{i}" for i in range(self.dim)] + ["y", "sigma_sq"])
            for phi, y, s in zip(self._phis, self._ys, self._sigma_sqs):
                w.writerow([format(v, ".17g") for v in (*phi, y, s)])

    @classmethod
    def from_csv(cls, path, sigma_min=0.0):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        dim = len(rows[0]) - 2
        stream = cls(dim=dim, sigma_min=sigma_min)
        for row in rows[1:]:
            vals = [float(v) for v in row]
            stream.append(vals[:dim], vals[dim], vals[dim + 1])
        return stream


@dataclass(frozen=True)
class WeightedDesign:
    """Regularized variance-weighted design ``Lambda = lam * I + Sigma``.

    Immutable; :func:`design_update` returns a new design. The Cholesky
    factor of ``Lambda`` is computed lazily and cached per instance.
    """

    lam: float
    Sigma: np.ndarray
    Lambda: np.ndarray
    count: int = 0

    @classmethod
    def empty(cls, dim, lam):
        if not lam > 0:
            raise ValueError("regularizer must be positive")
        return cls(lam=float(lam), Sigma=np.zeros((dim, dim)), Lambda=lam * np.eye(dim), count=0)

    @classmethod
    def from_stream(cls, stream, lam):
        phis, s = stream.phis, stream.sigma_sqs
        Sigma = (phis / s[:, None]).T @ phis
        Sigma = 0.5 * (Sigma + Sigma.T)
        return cls(lam=float(lam), Sigma=Sigma, Lambda=lam * np.eye(stream.dim) + Sigma, count=len(stream))

    @property
    def dim(self):
        return self.Sigma.shape[0]

    @cached_property
    def _chol(self):
        try:
            return scipy.linalg.cho_factor(self.Lambda, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailure(f"design is not positive definite: {exc}") from exc

    def solve(self, v):
        """``Lambda^{-1} v`` for a vector or a (d, m) matrix of columns."""
        return scipy.linalg.cho_solve(self._chol, np.asarray(v, dtype=np.float64), check_finite=False)

    def inv_norm(self, v):
        """``||v||_{Lambda^{-1}}``; row-wise for a 2-d array of directions."""
        v = np.asarray(v, dtype=np.float64)
        if v.ndim == 1:
            return float(math.sqrt(max(float(v @ self.solve(v)), 0.0)))
        g = self.solve(v.T)
        return np.sqrt(np.maximum(np.einsum("ij,ji->i", v, g), 0.0))

    def sigma_norm(self, v):
        v = np.asarray(v, dtype=np.float64)
        if v.ndim == 1:
            return float(math.sqrt(max(float(v @ self.Sigma @ v), 0.0)))
        return np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", v, self.Sigma, v), 0.0))


def design_update(design, phi, sigma_sq):
    phi = np.asarray(phi, dtype=np.float64)
    _check_phi(phi)
    if not sigma_sq > 0:
        raise ValueError("sigma_sq must be positive")
    Sigma = design.Sigma + np.outer(phi, phi) / sigma_sq
    Lambda = design.lam * np.eye(design.dim) + Sigma
    return WeightedDesign(lam=design.lam, Sigma=Sigma, Lambda=Lambda, count=design.count + 1)


@dataclass(frozen=True)
class ConfidenceSchedule:
    """Confidence parameters for self-normalized directional estimates.

    ``effective_dim`` is ``d_T_constant * d * logs(...)``; the Catoni scale
    uses ``width = sqrt(effective_dim + log(1/delta))``.
    """

    delta: float
    alpha_max: float
    effective_dim: float
    d_T_constant: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.alpha_max < 1:
            raise ValueError("alpha_max must be at least 1")
        if self.effective_dim < 1:
            raise ValueError("effective dimension must be at least 1")

    @classmethod
    def build(cls, delta, d, T, alpha_max, lam, sigma_min_sq, noise_bound, theta_norm, d_T_constant=1.0):
        eff = d_T_constant * d * logs(T, alpha_max**2, 1.0 / lam, 1.0 / sigma_min_sq, noise_bound, theta_norm)
        return cls(delta=delta, alpha_max=float(alpha_max), effective_dim=max(eff, 1.0), d_T_constant=d_T_constant)

    @property
    def log_term(self):
        return math.log(1.0 / self.delta) + self.effective_dim

    @property
    def width(self):
        return math.sqrt(self.log_term)

    def bound(self, design, v, lam, theta_norm, T):
        """Right-hand side of the uniform self-normalized error bound at ``v``."""
        return (
            5 * design.inv_norm(v) * (self.width + math.sqrt(lam) * theta_norm)
            + 3 * self.log_term / (self.alpha_max * T)
        )


def directional_catoni(phis, ys, sigma_sqs, design, directions, width, alpha_max, root_cfg=DEFAULT_ROOT):
    """Catoni estimates of ``<v, theta*>`` for each row ``v`` of ``directions``.

    Rows with ``||T Lambda^{-1} v||_Sigma = 0`` have all-zero data; they get
    scale ``alpha_max`` and estimate 0. With no records every estimate is 0.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    m = directions.shape[0]
    T = phis.shape[0]
    if T == 0:
        return np.zeros(m)
    G = T * design.solve(directions.T)            # (d, m): T Lambda^{-1} v
    proj = phis @ G                               # (T, m)
    X = (proj * (ys / sigma_sqs)[:, None]).T      # (m, T)
    snorm = np.sqrt(np.maximum(np.einsum("jm,jk,km->m", G, design.Sigma, G), 0.0))
    out = np.zeros(m)
    live = snorm > 0
    if not np.any(live):
        return out
    alphas = np.full(m, float(alpha_max))
    with np.errstate(divide="ignore"):
        alphas[live] = np.minimum(width / snorm[live], alpha_max)
    out[live] = catoni_roots(X[live], alphas[live], root_cfg)
    return out


def directional_estimate(stream, design, v, sched, root_cfg=DEFAULT_ROOT):
    v = np.asarray(v, dtype=np.float64)
    if not np.any(v):
        raise ZeroDirection("direction must be nonzero")
    if len(stream) == 0:
        raise EmptyData("stream has no records")
    est = directional_catoni(stream.phis, stream.ys, stream.sigma_sqs, design, v[None, :],
                             sched.width, sched.alpha_max, root_cfg)
    return float(est[0])


def default_direction_net(dim, n_random=64, seed=0):
    """The 2*dim signed axes followed by seeded uniform unit vectors."""
    axes = np.vstack([np.eye(dim), -np.eye(dim)])
    if n_random <= 0:
        return axes
    g = np.random.default_rng(seed).standard_normal((n_random, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.vstack([axes, g])


def summary_objective(w, directions, estimates, design):
    directions = np.atleast_2d(directions)
    resid = np.abs(directions @ w - np.asarray(estimates))
    return float(np.max(resid / design.inv_norm(directions)))


def summarize_linear_exact(directions, estimates, design):
    """Min-max linear fit of directional estimates over a direction net.

    Minimizes ``max_v |<v, w> - est(v)| / ||v||_{Lambda^{-1}}`` as the linear
    program ``min t`` subject to ``+-(<v, w> - est(v)) <= t ||v||``.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    estimates = np.asarray(estimates, dtype=np.float64).ravel()
    if directions.shape[0] == 0 or directions.size == 0:
        raise EmptyNet("direction net is empty")
    if np.any(~np.any(directions, axis=1)):
        raise ZeroDirection("net directions must be nonzero")
    m, d = directions.shape
    norms = design.inv_norm(directions)
    # row scaling keeps the program well conditioned when norms are tiny
    A = directions / norms[:, None]
    b = estimates / norms
    A_ub = np.block([[A, -np.ones((m, 1))], [-A, -np.ones((m, 1))]])
    b_ub = np.concatenate([b, -b])
    c = np.zeros(d + 1)
    c[-1] = 1.0
    res = scipy.optimize.linprog(
        c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * d + [(0, None)], method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise NumericalFailure(f"min-max summary failed: {res.message}")
    return np.asarray(res.x[:d])


def eigenbasis(design, ortho_tol=1e-8):
    """Orthonormal eigenvectors of the symmetrized design, as columns."""
    L = 0.5 * (design.Lambda + design.Lambda.T)
    try:
        _, U = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    if not np.allclose(U.T @ U, np.eye(U.shape[1]), atol=ortho_tol, rtol=0):
        raise NumericalFailure("eigenvectors are not orthonormal")
    return U


def summarize_linear_eigen(estimate_fn, design, batched=False):
    """``w = sum_i est(u_i) u_i`` over the eigenvectors ``u_i`` of ``Lambda``.

    With ``batched=True`` the callable receives all eigenvectors as rows of a
    matrix and returns one estimate per row.
    """
    U = eigenbasis(design)
    if batched:
        est = np.asarray(estimate_fn(U.T), dtype=np.float64)
    else:
        est = np.array([estimate_fn(U[:, i]) for i in range(U.shape[1])], dtype=np.float64)
    return U @ est


def weighted_least_squares(stream, lam):
    if len(stream) == 0:
        raise EmptyData("stream has no records")
    design = WeightedDesign.from_stream(stream, lam)
    rhs = stream.phis.T @ (stream.ys / stream.sigma_sqs)
    return design.solve(rhs)


def elliptic_exceedance_count(vectors, lam, b):
    """Number of ``t`` with ``||x_t||_{V_{t-1}^{-1}} > b``, ``V_t = lam I + sum x x^T``."""
    X = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if X.size == 0:
        return 0
    d = X.shape[1]
    Vinv = np.eye(d) / lam
    count = 0
    for x in X:
        g = Vinv @ x
        q = float(x @ g)
        if math.sqrt(max(q, 0.0)) > b:
            count += 1
        # Sherman-Morrison rank-one update of the inverse
        Vinv = Vinv - np.outer(g, g) / (1.0 + q)
        Vinv = 0.5 * (Vinv + Vinv.T)
    return count


def elliptic_count_bound(d, a, T, lam, b):
    """Count bound with ``log(1 + b)`` in the denominator; valid for ``b >= 1``."""
    return d * math.log(1 + a * a * T / lam) / math.log(1 + b)


def elliptic_count_bound_squared(d, a, T, lam, b):
    """Count bound valid for every ``b > 0``.

    An exceedance multiplies ``det V`` by more than ``1 + b^2``, which gives
    ``log(1 + b^2)`` in the denominator. For ``b < 1`` this is weaker than
    :func:`elliptic_count_bound`, which can then fail: with ``d = lam = 1``,
    unit ``x_t``, ``b = 0.1`` and ``T = 99`` there are 99 exceedances
    against a bound of about 48.
    """
    return d * math.log(1 + a * a * T / lam) / math.log(1 + b * b)
