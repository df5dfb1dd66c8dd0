"""Seeded Monte-Carlo coverage suites for the Catoni and regression bounds."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from force_rl.catoni import catoni_roots, iid_alpha, iid_deviation_bound
from force_rl.regression import (
    ConfidenceSchedule,
    WeightedDesign,
    directional_catoni,
    elliptic_count_bound,
    elliptic_count_bound_squared,
    elliptic_exceedance_count,
)
from force_rl.report import fmt


@dataclass(frozen=True)
class Distribution:
    """A sampler with known mean and variance (or variance proxy)."""

    name: str
    mean: float
    variance: float

    def sample(self, rng, size):
        if self.name == "normal":
            return rng.standard_normal(size)
        if self.name == "lognormal":
            return rng.lognormal(0.0, 1.0, size) - math.exp(0.5)
        if self.name == "student3":
            return rng.standard_t(3.0, size) / math.sqrt(3.0)
        if self.name == "student2.5":
            return rng.standard_t(2.5, size) / math.sqrt(5.0)
        if self.name == "point":
            return np.zeros(size)
        raise ValueError(f"unknown distribution {self.name!r}")


DISTRIBUTIONS = {
    "normal": Distribution("normal", 0.0, 1.0),
    "lognormal": Distribution("lognormal", 0.0, (math.e - 1) * math.e),
    "student3": Distribution("student3", 0.0, 1.0),
    "student2.5": Distribution("student2.5", 0.0, 1.0),
    "point": Distribution("point", 0.0, 1.0),
}

CATONI_HEADER = ["distribution", "trials", "T", "delta", "bound", "catoni_violation_rate",
                 "mean_violation_rate", "catoni_q95", "mean_q95"]


def catoni_coverage_suite(trials=2000, T=200, distributions=("normal", "lognormal", "student3"),
                          delta=0.05, seed=0):
    """Violation rates of the i.i.d. deviation bound for Catoni and the sample mean.

    Each distribution gets its own generator seeded from ``(seed, index)``.
    Returns a list of dict rows keyed by :data:`CATONI_HEADER`.
    """
    rows = []
    for i, name in enumerate(distributions):
        dist = DISTRIBUTIONS[name]
        rng = np.random.default_rng([seed, i])
        X = dist.sample(rng, (trials, T))
        alpha = iid_alpha(T, dist.variance, delta)
        bound = iid_deviation_bound(T, dist.variance, delta)
        cat_err = np.abs(catoni_roots(X, np.full(trials, alpha)) - dist.mean)
        mean_err = np.abs(X.mean(axis=1) - dist.mean)
        rows.append({
            "distribution": name, "trials": trials, "T": T, "delta": delta, "bound": bound,
            "catoni_violation_rate": float(np.mean(cat_err >= bound)),
            "mean_violation_rate": float(np.mean(mean_err >= bound)),
            "catoni_q95": float(np.quantile(cat_err, 0.95)),
            "mean_q95": float(np.quantile(mean_err, 0.95)),
        })
    return rows


SELFNORM_HEADER = ["trials", "T", "d", "noise", "delta", "d_T_constant", "directions",
                   "violations", "checks", "violation_rate", "mean_bound"]


def selfnorm_stream(rng, T, d, noise, theta=None):
    """Realizable heteroscedastic stream with bounded uniform noise.

    Features are uniform in the unit ball and ``theta`` is a random unit
    vector unless given. Noise is uniform with standard deviation ``noise``.
    The variance bound ``2 (<phi, theta>^2 + noise^2)`` dominates twice the
    conditional second moment of ``y``. A floor of ``1/T^2`` keeps it
    positive when both terms vanish.
    """
    if theta is None:
        theta = rng.standard_normal(d)
        theta /= np.linalg.norm(theta)
    g = rng.standard_normal((T, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    phis = g * rng.random((T, 1)) ** (1.0 / d)
    half = math.sqrt(3.0) * noise
    eta = rng.uniform(-half, half, T) if noise > 0 else np.zeros(T)
    mean = phis @ theta
    ys = mean + eta
    sig = np.maximum(2 * (mean**2 + noise**2), 1.0 / T**2)
    return phis, ys, sig, theta


def selfnorm_coverage_suite(trials=500, T=500, d=3, noise=0.1, delta=0.05, d_T_constant=1.0,
                            directions=16, lam=1.0, seed=0, zero_theta=False):
    """Violation rate of the uniform self-normalized bound over trials and directions."""
    viol = 0
    checks = 0
    bounds = []
    alpha_max = float(T)
    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        theta = np.zeros(d) if zero_theta else None
        phis, ys, sig, theta = selfnorm_stream(rng, T, d, noise, theta)
        design = WeightedDesign(lam=lam, Sigma=(phis / sig[:, None]).T @ phis,
                                Lambda=lam * np.eye(d) + (phis / sig[:, None]).T @ phis, count=T)
        sched = ConfidenceSchedule.build(delta, d, T, alpha_max, lam, float(sig.min()),
                                         math.sqrt(3.0) * noise, float(np.linalg.norm(theta)),
                                         d_T_constant=d_T_constant)
        V = rng.standard_normal((directions, d))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        est = directional_catoni(phis, ys, sig, design, V, sched.width, alpha_max)
        rhs = (5 * design.inv_norm(V) * (sched.width + math.sqrt(lam) * np.linalg.norm(theta))
               + 3 * sched.log_term / (alpha_max * T))
        viol += int(np.count_nonzero(np.abs(est - V @ theta) > rhs))
        checks += directions
        bounds.append(float(rhs.mean()))
    return [{
        "trials": trials, "T": T, "d": d, "noise": noise, "delta": delta, "d_T_constant": d_T_constant,
        "directions": directions, "violations": viol, "checks": checks,
        "violation_rate": viol / checks if checks else 0.0,
        "mean_bound": float(np.mean(bounds)) if bounds else 0.0,
    }]


ELLIPTIC_HEADER = ["kind", "index", "d", "T", "lam", "b", "a", "count", "bound", "holds",
                   "bound_squared", "holds_squared"]


def elliptic_suite(n_random=200, n_adversarial=10, seed=0, max_d=8, max_T=2000, b_range=(1.0, 3.0)):
    """Exceedance counts against their deterministic bounds on seeded sequences.

    Random sequences draw points in the unit ball with random ``lam``;
    adversarial sequences cycle through the scaled standard basis. ``b`` is
    log-uniform on ``b_range``. ``holds`` checks the ``log(1 + b)`` form,
    which is guaranteed only for ``b >= 1``; ``holds_squared`` checks the
    ``log(1 + b^2)`` form.
    """
    rows = []
    rng = np.random.default_rng(seed)
    for i in range(n_random + n_adversarial):
        d = int(rng.integers(1, max_d + 1))
        T = int(rng.integers(1, max_T + 1))
        lam = float(10 ** rng.uniform(-2, 1))
        b = float(math.exp(rng.uniform(math.log(b_range[0]), math.log(b_range[1]))))
        if i < n_random:
            kind = "random"
            X = rng.standard_normal((T, d))
            X *= (rng.random((T, 1)) / np.linalg.norm(X, axis=1, keepdims=True))
        else:
            kind = "adversarial"
            X = np.eye(d)[np.arange(T) % d] * float(rng.uniform(0.5, 1.0))
        a = float(np.linalg.norm(X, axis=1).max())
        count = elliptic_exceedance_count(X, lam, b)
        bound = elliptic_count_bound(d, a, T, lam, b)
        bound_sq = elliptic_count_bound_squared(d, a, T, lam, b)
        rows.append({"kind": kind, "index": i, "d": d, "T": T, "lam": lam, "b": b, "a": a,
                     "count": count, "bound": bound, "holds": int(count <= bound),
                     "bound_squared": bound_sq, "holds_squared": int(count <= bound_sq)})
    return rows


def write_rows(rows, header, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(row[k]) if isinstance(row[k], float) else row[k] for k in header])
