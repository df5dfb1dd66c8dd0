"""Regret reports and CSV emission for runs."""

import csv
import hashlib
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

REGRET_HEADER = ["episode", "v_star", "v_pi", "inst_regret", "cum_regret"]


def fmt(x):
    """Round-trip safe, locale independent formatting."""
    return format(float(x), ".17g")


@dataclass
class RegretReport:
    """Per-episode oracle values and regret for one run."""

    v_star: np.ndarray
    v_pi: np.ndarray
    seed: Optional[int] = None
    beta: float = float("nan")
    config_hash: str = ""
    diagnostics: object = None

    def __post_init__(self):
        self.v_star = np.asarray(self.v_star, dtype=np.float64)
        self.v_pi = np.asarray(self.v_pi, dtype=np.float64)
        if self.v_star.shape != self.v_pi.shape:
            raise ValueError("v_star and v_pi must have equal length")

    @classmethod
    def from_traces(cls, traces, seed=None, beta=float("nan"), diagnostics=None):
        return cls(
            v_star=np.array([t.v_star for t in traces]),
            v_pi=np.array([t.v_pi for t in traces]),
            seed=seed, beta=beta, diagnostics=diagnostics,
        )

    @property
    def K(self):
        return self.v_star.shape[0]

    @property
    def inst_regret(self):
        return self.v_star - self.v_pi

    @property
    def cum_regret(self):
        return np.cumsum(self.inst_regret)

    @property
    def total_regret(self):
        return float(self.cum_regret[-1]) if self.K else 0.0

    def window_mean(self, start, stop):
        """Mean instantaneous regret over one-based episodes ``start..stop``."""
        return float(np.mean(self.inst_regret[start - 1:stop]))


def write_regret_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REGRET_HEADER)
        inst = report.inst_regret
        cum = report.cum_regret
        for k in range(report.K):
            w.writerow([k + 1, fmt(report.v_star[k]), fmt(report.v_pi[k]), fmt(inst[k]), fmt(cum[k])])


def read_regret_csv(path):
    """Parse a regret CSV; returns a report plus the stored columns for checks."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != REGRET_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None}")
    data = np.array([[float(v) for v in row] for row in rows[1:]]).reshape(-1, 5)
    report = RegretReport(v_star=data[:, 1], v_pi=data[:, 2])
    return report, {"inst_regret": data[:, 3], "cum_regret": data[:, 4], "episode": data[:, 0]}


def trace_header(d):
    return (["episode", "step", "state", "action", "reward", "next_state", "vbar_sq", "bonus",
             "v_optimistic", "v_pi", "v_star"] + [f"phi_{i}" for i in range(d)])


def write_trace_csv(traces, path):
    d = traces[0].features.shape[1] if traces else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(d))
        for t in traces:
            for h in range(t.states.shape[0]):
                w.writerow([t.episode, h, int(t.states[h]), int(t.actions[h]), fmt(t.rewards[h]),
                            int(t.next_states[h]), fmt(t.vbar_sq[h]), fmt(t.bonuses[h]),
                            fmt(t.v_optimistic), fmt(t.v_pi), fmt(t.v_star)]
                           + [fmt(x) for x in t.features[h]])


def read_trace_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    return header, np.array([[float(v) for v in row] for row in rows[1:]]).reshape(-1, len(header))


def config_hash(obj):
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]

