"""Scalar Catoni robust mean estimation.

The estimate is the root of the influence sum
``f(z) = sum_t psi(alpha * (X_t - z))`` with the soft-truncation
``psi(y) = sign(y) * log(1 + |y| + y**2)``. ``f`` is continuous and strictly
decreasing, and its root always lies in ``[min X, max X]``, so every root is
found by bisection on a padded bracket.
"""

import math
from dataclasses import dataclass

import numpy as np

from force_rl._backend import kernels
from force_rl.errors import EmptyData, InsufficientSamples, NoConvergence


@dataclass(frozen=True)
class RootConfig:
    abs_tolerance: float = 1e-10
    max_iterations: int = 200

    def __post_init__(self):
        if not self.abs_tolerance > 0:
            raise ValueError("abs_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")


DEFAULT_ROOT = RootConfig()


@dataclass(frozen=True)
class CatoniProblem:
    """A batch of observations and the influence scale ``alpha``.

    Observations are copied into a read-only float array; construction
    rejects empty or non-finite data and non-positive ``alpha``.
    """

    observations: np.ndarray
    alpha: float

    def __post_init__(self):
        obs = np.array(self.observations, dtype=np.float64).ravel()
        if obs.size == 0:
            raise EmptyData("Catoni problem needs at least one observation")
        if not np.all(np.isfinite(obs)):
            raise ValueError("observations must be finite")
        alpha = float(self.alpha)
        if not (alpha > 0 and math.isfinite(alpha)):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha!r}")
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "alpha", alpha)

    @property
    def size(self):
        return self.observations.shape[0]


def psi(y):
    """Catoni influence function; accepts scalars or arrays."""
    if np.ndim(y) == 0:
        y = float(y)
        if y >= 0:
            return math.log1p(y + y * y)
        return -math.log1p(-y + y * y)
    arr = np.ascontiguousarray(y, dtype=np.float64)
    return kernels.psi(arr.ravel()).reshape(arr.shape)


def influence_sum(problem, z):
    x = problem.observations
    return float(kernels.weighted_influence(x, np.ones_like(x), problem.alpha, float(z)))


def catoni_root(problem, cfg=DEFAULT_ROOT):
    """Root of the influence sum, to within ``cfg.abs_tolerance``."""
    x = problem.observations
    if x.shape[0] == 1:
        return float(x[0])
    xs = np.sort(x)
    if xs[0] == xs[-1]:
        return float(xs[0])
    root, iters = kernels.root_sorted(xs, problem.alpha, cfg.abs_tolerance, cfg.max_iterations)
    if iters < 0:
        raise NoConvergence(f"bisection did not converge in {cfg.max_iterations} iterations")
    return float(root)


def catoni_roots(observations, alphas, cfg=DEFAULT_ROOT):
    """Batched roots: row ``i`` of ``observations`` with scale ``alphas[i]``.

    Equivalent to calling :func:`catoni_root` per row, without building a
    :class:`CatoniProblem` for each.
    """
    x = np.asarray(observations, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("observations must be a 2-d array (rows are problems)")
    if x.shape[1] == 0:
        raise EmptyData("Catoni problems need at least one observation")
    alphas = np.ascontiguousarray(alphas, dtype=np.float64).ravel()
    if alphas.shape[0] != x.shape[0]:
        raise ValueError("one alpha per row is required")
    if x.shape[0] == 0:
        return np.empty(0)
    if not np.all(alphas > 0):
        raise ValueError("alpha must be positive")
    xs = np.ascontiguousarray(np.sort(x, axis=1))
    roots, iters = kernels.roots_sorted(xs, alphas, cfg.abs_tolerance, cfg.max_iterations)
    if np.any(iters < 0):
        raise NoConvergence(f"bisection did not converge in {cfg.max_iterations} iterations")
    return np.asarray(roots)


def catoni_estimate(observations, alpha, cfg=DEFAULT_ROOT):
    return catoni_root(CatoniProblem(observations, alpha), cfg)


def iid_alpha(T, variance, delta):
    """Influence scale for ``T`` i.i.d. draws with the given variance bound.

    Requires ``T > 2 log(1/delta)``; at equality the formula divides by zero.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not variance > 0:
        raise ValueError("variance must be positive")
    L = math.log(1.0 / delta)
    if not T > 2 * L:
        raise InsufficientSamples(f"need T > 2 log(1/delta) = {2 * L:.6g}, got T={T}")
    return math.sqrt(2 * L / (T * variance * (1 + 2 * L / (T - 2 * L))))


def iid_deviation_bound(T, variance, delta):
    """Deviation radius that the i.i.d. estimate exceeds with probability <= 2*delta."""
    L = math.log(1.0 / delta)
    if not T > 2 * L:
        raise InsufficientSamples(f"need T > 2 log(1/delta) = {2 * L:.6g}, got T={T}")
    return math.sqrt(2 * variance * L / (T - 2 * L))


def perturbation_epsilon(x, x_tilde, alpha, alpha_tilde, gamma):
    """Size of a data/scale perturbation, in the form the root-shift bound uses."""
    x = np.asarray(x, dtype=np.float64)
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    return float(alpha * np.mean(np.abs(x - x_tilde)) + 3 * gamma * abs(alpha - alpha_tilde))


def perturbation_admissible(eps, alpha, gamma):
    return eps <= min(1.0, (alpha * gamma) ** 2) / 18.0


def perturbation_bound(eps, alpha, gamma):
    """Worst-case root shift for data bounded by ``gamma`` under perturbation ``eps``.

    Only meaningful when :func:`perturbation_admissible` holds.
    """
    return (1 + 2 * alpha * gamma) / alpha * eps + math.sqrt(2 * eps / alpha**2)
