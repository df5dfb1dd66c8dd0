"""Experiment configs and the seeded, parallel cell runner.

A config is a JSON document. Each regret cell is an ``(environment, agent,
seed)`` triple and writes ``trace.csv`` and ``report.csv`` into its own
directory; ``summary.csv`` and ``aggregate.csv`` are merged afterwards in
cell order, so output does not depend on scheduling.
"""

import csv
import json
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from force_rl import coverage
from force_rl.agent import ForceConfig, LsviConfig, run, run_lsvi_ucb
from force_rl.errors import ConfigError, ForceRLError
from force_rl.linmdp import hard_instance, load_mdp, random_tabular, simplex_instance
from force_rl.report import config_hash, fmt, write_regret_csv, write_trace_csv

SCHEMA_VERSION = 1
SUITES = ("regret", "catoni-coverage", "selfnorm-coverage", "elliptic", "all")
AGENTS = ("force-exact", "force-efficient", "lsvi-ucb")
FAMILIES = ("hard", "random", "simplex", "file")

TOP_KEYS = {"schema_version", "suite", "K", "seeds", "output_dir", "environments", "agents", "coverage"}
ENV_KEYS = {"family": str, "S": int, "A": int, "H": int, "p": float, "seed": int, "d": int,
            "rotate": bool, "path": str, "label": str}
AGENT_KEYS = {"name": str, "delta": float, "practical_scale": float, "d_T_constant": float,
              "k_init": int, "lam": float, "v_min": float, "stride": int, "net_random": int,
              "c_b": float, "label": str}
COVERAGE_KEYS = {"trials": int, "T": int, "delta": float, "distributions": list, "d": int,
                 "noise": float, "d_T_constant": float, "directions": int, "seed": int,
                 "n_random": int, "n_adversarial": int}

SUMMARY_HEADER = ["cell", "agent", "environment", "seed", "K", "total_regret", "beta",
                  "clipped_low", "optimism_violations", "validity_violations", "status", "message", "config_hash"]
AGGREGATE_HEADER = ["agent", "environment", "n_seeds", "mean_total_regret"]


class _Locator:
    """Maps config keys back to source lines for diagnostics."""

    def __init__(self, text, source):
        self.lines = text.splitlines()
        self.source = source

    def line_of(self, key, occurrence=0):
        pat = re.compile(r'"' + re.escape(key) + r'"\s*:')
        seen = 0
        for i, line in enumerate(self.lines, 1):
            for _ in pat.finditer(line):
                if seen == occurrence:
                    return i
                seen += 1
        return None

    def error(self, msg, key=None, occurrence=0):
        line = self.line_of(key, occurrence) if key else None
        return ConfigError(msg, line=line, source=self.source)


@dataclass(frozen=True)
class ExperimentConfig:
    suite: str
    K: int
    seeds: tuple
    output_dir: str
    environments: tuple
    agents: tuple
    coverage: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def hash(self):
        return config_hash(self.raw)


def _check_fields(obj, schema, where, loc, counters):
    if not isinstance(obj, dict):
        raise loc.error(f"{where} must be an object")
    for key, val in obj.items():
        occ = counters.get(key, 0)
        counters[key] = occ + 1
        if key not in schema:
            raise loc.error(f"{where}: unknown key {key!r}", key, occ)
        typ = schema[key]
        ok = isinstance(val, typ) and not (typ in (int, float) and isinstance(val, bool))
        if typ is float and isinstance(val, int) and not isinstance(val, bool):
            ok = True
        if not ok:
            raise loc.error(f"{where}.{key} must be of type {typ.__name__}", key, occ)


def parse_config(text, source="<config>"):
    """Parse and fully validate a config; raises :class:`ConfigError`."""
    loc = _Locator(text, source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno, source=source) from None
    if not isinstance(doc, dict):
        raise loc.error("config must be a JSON object")
    for key in doc:
        if key not in TOP_KEYS:
            raise loc.error(f"unknown key {key!r}", key)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise loc.error(f"schema_version must be {SCHEMA_VERSION}", "schema_version")
    suite = doc.get("suite", "regret")
    if suite not in SUITES:
        raise loc.error(f"suite must be one of {SUITES}, got {suite!r}", "suite")
    K = doc.get("K", 100)
    if not isinstance(K, int) or isinstance(K, bool) or K < 1:
        raise loc.error("K must be a positive integer", "K")
    seeds = doc.get("seeds", [])
    if not isinstance(seeds, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise loc.error("seeds must be a list of integers", "seeds")
    out = doc.get("output_dir", "out")
    if not isinstance(out, str):
        raise loc.error("output_dir must be a string", "output_dir")
    counters = {}
    envs = doc.get("environments", [])
    if not isinstance(envs, list):
        raise loc.error("environments must be a list", "environments")
    for i, env in enumerate(envs):
        _check_fields(env, ENV_KEYS, f"environments[{i}]", loc, counters)
        fam = env.get("family")
        if fam not in FAMILIES:
            raise loc.error(f"environments[{i}].family must be one of {FAMILIES}, got {fam!r}",
                            "family", counters.get("family", 1) - 1)
        if fam == "file" and "path" not in env:
            raise loc.error(f"environments[{i}] needs a path", "family", counters["family"] - 1)
    counters = {}
    agents = doc.get("agents", [])
    if not isinstance(agents, list):
        raise loc.error("agents must be a list", "agents")
    for i, ag in enumerate(agents):
        _check_fields(ag, AGENT_KEYS, f"agents[{i}]", loc, counters)
        if ag.get("name") not in AGENTS:
            raise loc.error(f"agents[{i}].name must be one of {AGENTS}, got {ag.get('name')!r}",
                            "name", counters.get("name", 1) - 1)
    cov = doc.get("coverage", {})
    _check_fields(cov, COVERAGE_KEYS, "coverage", loc, {})
    for name in cov.get("distributions", []):
        if name not in coverage.DISTRIBUTIONS:
            raise loc.error(f"coverage.distributions: unknown distribution {name!r}", "distributions")
    if suite in ("regret", "all") and seeds and not (envs and agents):
        raise loc.error("regret suite needs at least one environment and one agent", "suite")
    cfg = ExperimentConfig(suite=suite, K=K, seeds=tuple(seeds), output_dir=out,
                           environments=tuple(envs), agents=tuple(agents), coverage=cov, raw=doc)
    # build every cell's objects once so config errors surface before any run
    for env in cfg.environments:
        mdp = build_environment(env, loc)
        for ag in cfg.agents:
            build_agent(ag, mdp, cfg.K, loc)
    return cfg


def load_config(path):
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, source=os.fspath(path))


def env_label(env):
    if "label" in env:
        return env["label"]
    parts = [env["family"]] + [f"{k}{env[k]}" for k in ("S", "A", "H", "d", "p", "seed") if k in env]
    return "_".join(str(p) for p in parts)


def agent_label(ag):
    return ag.get("label", ag["name"])


def build_environment(env, loc=None):
    fam = env["family"]
    try:
        if fam == "hard":
            return hard_instance(env.get("p", 0.5), env.get("S", 4), env.get("A", 2), env.get("H", 3),
                                 env.get("seed", 0))
        if fam == "random":
            return random_tabular(env.get("S", 5), env.get("A", 2), env.get("H", 3), env.get("seed", 0))
        if fam == "simplex":
            return simplex_instance(env.get("S", 6), env.get("A", 2), env.get("H", 3), env.get("d", 3),
                                    env.get("seed", 0), env.get("rotate", False))
        return load_mdp(env["path"])
    except (ValueError, ForceRLError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        msg = f"environment {env_label(env)}: {exc}"
        if loc is not None:
            raise loc.error(msg, "family") from None
        raise ConfigError(msg) from None


def build_agent(ag, mdp, K, loc=None):
    try:
        if ag["name"] == "lsvi-ucb":
            return LsviConfig(delta=ag.get("delta", 0.05), K=K, H=mdp.H, d=mdp.d, lam=ag.get("lam", 1.0),
                              c_b=ag.get("c_b", 1.0), practical_scale=ag.get("practical_scale", 1.0))
        kw = {k: ag[k] for k in ("k_init", "lam", "v_min", "stride", "net_random") if k in ag}
        return ForceConfig.create(mdp.d, mdp.H, K, delta=ag.get("delta", 0.05),
                                  variant=ag["name"].split("-", 1)[1],
                                  practical_scale=ag.get("practical_scale", 1.0),
                                  d_T_constant=ag.get("d_T_constant", 1.0), **kw)
    except ConfigError as exc:
        if loc is not None:
            raise loc.error(f"agent {agent_label(ag)}: {exc}", "name") from None
        raise


def cells(cfg, seed_offset=0):
    out = []
    for env in cfg.environments:
        for ag in cfg.agents:
            for seed in cfg.seeds:
                s = seed + seed_offset
                out.append((f"{env_label(env)}__{agent_label(ag)}__seed{s}", env, ag, s))
    return out


def run_cell(args):
    """Run one cell and write its CSVs; returns a summary dict row."""
    name, env, ag, seed, K, out_dir = args
    row = {"cell": name, "agent": agent_label(ag), "environment": env_label(env), "seed": seed, "K": K,
           "total_regret": float("nan"), "beta": float("nan"), "clipped_low": 0,
           "optimism_violations": 0, "validity_violations": 0, "status": "ok", "message": "",
           "config_hash": config_hash({"environment": env, "agent": ag, "K": K})}
    try:
        mdp = build_environment(env)
        acfg = build_agent(ag, mdp, K)
        if ag["name"] == "lsvi-ucb":
            traces, report = run_lsvi_ucb(mdp, acfg, seed)
        else:
            traces, report = run(mdp, acfg, seed)
        cell_dir = os.path.join(out_dir, name)
        os.makedirs(cell_dir, exist_ok=True)
        write_trace_csv(traces, os.path.join(cell_dir, "trace.csv"))
        write_regret_csv(report, os.path.join(cell_dir, "report.csv"))
        diag = report.diagnostics
        row.update(total_regret=report.total_regret, beta=report.beta, clipped_low=diag.clipped_low,
                   optimism_violations=diag.optimism_violations,
                   validity_violations=diag.validity_violations)
    except ForceRLError as exc:
        row.update(status="failed", message=f"{type(exc).__name__}: {exc}")
    return row


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(r[k]) if isinstance(r[k], float) else r[k] for k in header])


def aggregate(rows):
    groups = {}
    for r in rows:
        if r["status"] == "ok":
            groups.setdefault((r["agent"], r["environment"]), []).append(r["total_regret"])
    return [{"agent": a, "environment": e, "n_seeds": len(v), "mean_total_regret": float(np.mean(v))}
            for (a, e), v in groups.items()]


def run_experiment(cfg, out_dir=None, jobs=1, seed_offset=0):
    """Run every suite the config selects. Returns the summary rows of regret cells."""
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    if cfg.suite in ("regret", "all"):
        tasks = [(n, e, a, s, cfg.K, out_dir) for n, e, a, s in cells(cfg, seed_offset)]
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(run_cell, tasks))
        else:
            rows = [run_cell(t) for t in tasks]
        _write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_HEADER, rows)
        _write_csv(os.path.join(out_dir, "aggregate.csv"), AGGREGATE_HEADER, aggregate(rows))
    cov = dict(cfg.coverage)
    if cfg.suite in ("catoni-coverage", "all"):
        r = coverage.catoni_coverage_suite(
            cov.get("trials", 2000), cov.get("T", 200),
            tuple(cov.get("distributions", ("normal", "lognormal", "student3"))),
            cov.get("delta", 0.05), cov.get("seed", 0) + seed_offset)
        coverage.write_rows(r, coverage.CATONI_HEADER, os.path.join(out_dir, "catoni_coverage.csv"))
    if cfg.suite in ("selfnorm-coverage", "all"):
        r = coverage.selfnorm_coverage_suite(
            cov.get("trials", 500), cov.get("T", 500), cov.get("d", 3), cov.get("noise", 0.1),
            cov.get("delta", 0.05), cov.get("d_T_constant", 1.0), cov.get("directions", 16),
            seed=cov.get("seed", 0) + seed_offset)
        coverage.write_rows(r, coverage.SELFNORM_HEADER, os.path.join(out_dir, "selfnorm_coverage.csv"))
    if cfg.suite in ("elliptic", "all"):
        r = coverage.elliptic_suite(cov.get("n_random", 200), cov.get("n_adversarial", 10),
                                    seed=cov.get("seed", 0) + seed_offset)
        coverage.write_rows(r, coverage.ELLIPTIC_HEADER, os.path.join(out_dir, "elliptic.csv"))
        if not all(x["holds"] for x in r):
            raise ForceRLError("elliptic count bound violated; see elliptic.csv")
    return rows
