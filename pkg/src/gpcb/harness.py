"""Run configuration, multi-seed orchestration, sweeps and trace persistence.

A config is a nested mapping (YAML or JSON on disk)::

    env:     {kind: gp_synthetic, D: 3, mean_arms: 20, T: 100, K: 3, ...}
    kernel:  {family: se, lengthscale: 1.0, nu: 2.5, variance: 1.0}
    gp:      {noise_variance: 0.01,
              sparse: {enabled: false, num_inducing: 50, reseed_each_round: true}}
    policy:  {algorithm: oclok, delta: 0.05, budget: 3, max_arms: 50, beta_override: null}
    oracle:  {kind: auto}
    seeds:   [0, 1, 2]
    output_dir: runs/example

Each seed derives independent substreams for environment generation,
observation noise and inducing-point sampling, so toggling sparsity never
perturbs the environment.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import copy
import hashlib
import json
import os
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .environments import EnvSpec, make_environment
from .exceptions import ConfigError
from .kernels import KernelSpec
from .metrics import RunTrace
from .oracles import (
    ClampCounter,
    FeasibilityKind,
    exhaustive_coverage_oracle,
    greedy_coverage_oracle,
    solve,
    top_k_oracle,
)
from .policy import Algorithm, PolicyConfig, PolicyState, run_policy

OUTPUT_ENV_VAR = "GPCB_OUTPUT_DIR"
STREAM_ENV, STREAM_NOISE, STREAM_INDUCING = 0, 1, 2
ORACLE_KINDS = ("auto", "top_k", "greedy_coverage", "exhaustive_coverage")
TOP_LEVEL = {"env", "kernel", "gp", "policy", "oracle", "seeds", "output_dir", "timing",
             "diagnostics"}


def substream(seed, purpose):
    return np.random.SeedSequence(int(seed), spawn_key=(purpose,))


def _check_keys(d, allowed, path):
    if not isinstance(d, dict):
        raise ConfigError("expected a mapping", path)
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", path)


@dataclass(frozen=True)
class RunConfig:
    env: EnvSpec
    kernel: KernelSpec
    noise_variance: float
    policy: PolicyConfig
    algorithm: Algorithm = Algorithm.OCLOK
    num_inducing: int | None = 50
    reseed_each_round: bool = True
    oracle_kind: str = "auto"
    seeds: tuple = (0,)
    output_dir: str = "runs"
    timing: bool = False
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw):
        raw = copy.deepcopy(raw or {})
        _check_keys(raw, TOP_LEVEL, "config")
        env = EnvSpec.from_dict(raw.get("env"))
        kernel = KernelSpec.from_dict(raw.get("kernel"))

        gp = raw.get("gp") or {}
        _check_keys(gp, {"noise_variance", "sparse"}, "gp")
        noise = gp.get("noise_variance", env.noise_std**2 if env.noise_std > 0 else 0.01)
        try:
            noise = float(noise)
        except (TypeError, ValueError):
            raise ConfigError("must be a number", "gp.noise_variance") from None
        if not noise > 0:
            raise ConfigError("must be positive", "gp.noise_variance")
        sparse = gp.get("sparse") or {}
        _check_keys(sparse, {"enabled", "num_inducing", "reseed_each_round"}, "gp.sparse")
        num_inducing = sparse.get("num_inducing", 50)
        if num_inducing in ("all", "full"):
            num_inducing = None
        if num_inducing is not None and (int(num_inducing) != num_inducing or num_inducing < 1):
            raise ConfigError("must be a positive integer, 'all' or null", "gp.sparse.num_inducing")

        pol = dict(raw.get("policy") or {})
        _check_keys(pol, {"algorithm", "delta", "budget", "max_arms", "beta_override"}, "policy")
        sparse_on = bool(sparse.get("enabled", False))
        algo = pol.pop("algorithm", "soclok" if sparse_on else "oclok")
        try:
            algo = Algorithm(algo)
        except ValueError:
            raise ConfigError(f"unknown algorithm {algo!r}", "policy.algorithm") from None
        if sparse_on and algo is Algorithm.OCLOK:
            raise ConfigError("gp.sparse.enabled conflicts with algorithm 'oclok'", "policy.algorithm")
        pol.setdefault("budget", env.K)
        pol.setdefault("max_arms", env.max_arms)
        policy = PolicyConfig(**pol)
        if policy.budget != env.K:
            raise ConfigError(f"budget {policy.budget} differs from env.K={env.K}", "policy.budget")
        if policy.max_arms < env.max_arms:
            raise ConfigError("must be at least env.max_arms", "policy.max_arms")

        oracle = raw.get("oracle") or {}
        _check_keys(oracle, {"kind"}, "oracle")
        oracle_kind = oracle.get("kind", "auto")
        if oracle_kind not in ORACLE_KINDS:
            raise ConfigError(f"must be one of {ORACLE_KINDS}", "oracle.kind")

        seeds = raw.get("seeds", [0])
        if isinstance(seeds, int):
            seeds = [seeds]
        if not seeds or not all(isinstance(s, int) and s >= 0 for s in seeds):
            raise ConfigError("must be a non-empty list of non-negative integers", "seeds")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("duplicate seeds", "seeds")

        return cls(
            env=env, kernel=kernel, noise_variance=noise, policy=policy, algorithm=algo,
            num_inducing=num_inducing,
            reseed_each_round=bool(sparse.get("reseed_each_round", True)),
            oracle_kind=oracle_kind, seeds=tuple(seeds),
            output_dir=str(raw.get("output_dir", "runs")),
            timing=bool(raw.get("timing", False)),
            diagnostics=dict(raw.get("diagnostics") or {}),
        )

    def to_dict(self):
        return {
            "env": self.env.to_dict(),
            "kernel": self.kernel.to_dict(),
            "gp": {
                "noise_variance": self.noise_variance,
                "sparse": {
                    "enabled": self.algorithm is Algorithm.SOCLOK,
                    "num_inducing": self.num_inducing,
                    "reseed_each_round": self.reseed_each_round,
                },
            },
            "policy": {
                "algorithm": self.algorithm.value,
                "delta": self.policy.delta,
                "budget": self.policy.budget,
                "max_arms": self.policy.max_arms,
                "beta_override": self.policy.beta_override,
            },
            "oracle": {"kind": self.oracle_kind},
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
            "timing": self.timing,
            "diagnostics": self.diagnostics,
        }

    def config_hash(self):
        """sha256 of the canonical config, ignoring where output is written."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace_path(self, path, value):
        """New config with the dotted ``path`` set to ``value``."""
        d = self.to_dict()
        node = d
        keys = path.split(".")
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ConfigError("unknown parameter path", path)
            node = node[k]
        if not isinstance(node, dict) or keys[-1] not in node:
            raise ConfigError("unknown parameter path", path)
        node[keys[-1]] = value
        if path == "env.K":
            d["policy"]["budget"] = value
        if path.startswith("policy.algorithm"):
            d["gp"]["sparse"]["enabled"] = value == Algorithm.SOCLOK.value
        return RunConfig.from_dict(d)


def load_config(path):
    """Read a YAML/JSON config file; ``$GPCB_OUTPUT_DIR`` overrides output_dir."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if os.environ.get(OUTPUT_ENV_VAR):
        raw["output_dir"] = os.environ[OUTPUT_ENV_VAR]
    return RunConfig.from_dict(raw)


def _oracle(kind):
    if kind == "auto":
        return solve
    if kind == "top_k":
        return lambda v, feas, counter=None: top_k_oracle(v, min(feas.budget, len(v)))

    def coverage(v, feas, counter=None):
        if feas.kind is not FeasibilityKind.COVERAGE:
            raise ConfigError(f"{kind} needs a coverage environment", "oracle.kind")
        K = min(feas.budget, feas.graph.n_left)
        if kind == "greedy_coverage":
            return greedy_coverage_oracle(v, K, feas.graph, counter)
        return exhaustive_coverage_oracle(v, K, feas.graph)

    return coverage


def simulate(config, seed):
    """Run one seed in memory. Returns ``(RunTrace, info)``."""
    env = make_environment(config.env, substream(seed, STREAM_ENV))
    inducing_seed = int(substream(seed, STREAM_INDUCING).generate_state(1)[0])
    state = PolicyState.create(
        config.policy, config.kernel, config.noise_variance, config.algorithm,
        num_inducing=config.num_inducing, reseed_each_round=config.reseed_each_round,
        seed=inducing_seed, dim=config.env.D,
    )
    noise_rng = np.random.default_rng(substream(seed, STREAM_NOISE))
    counter = ClampCounter()
    entries, _ = run_policy(state, env, noise_rng, _oracle(config.oracle_kind), counter)
    alpha = entries[0].alpha if entries else 1.0
    trace = RunTrace(entries, alpha=alpha, seed=seed, config_hash=config.config_hash(),
                     algorithm=config.algorithm.value)
    info = {
        "dataset_hash": env.content_hash(),
        "arrival_clamp_events": env.clamp_events,
        "oracle_clamped_values": counter.clamped,
    }
    return trace, info


def summarize(trace):
    reward = float(trace.column("reward_expected").sum())
    bench = float(trace.column("benchmark_expected").sum())
    regret = trace.column("cum_regret")
    return {
        "rounds": len(trace),
        "cum_reward_expected": reward,
        "cum_benchmark_expected": bench,
        "reward_ratio": reward / bench if bench != 0 else float("nan"),
        "final_cum_regret": float(regret[-1]) if len(regret) else 0.0,
    }


def _run_seed(args):
    config, seed = args
    trace, info = simulate(config, seed)
    return seed, trace.to_csv(timing=config.timing), summarize(trace), info


@dataclass
class RunResult:
    output_dir: Path
    trace_files: dict
    manifest_path: Path
    summaries: dict


def run(config, seed_offset=0, jobs=1):
    """Run every seed, write one trace CSV per seed and a JSON manifest."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [s + seed_offset for s in config.seeds]
    tasks = [(config, s) for s in seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_seed, tasks))
    else:
        results = [_run_seed(t) for t in tasks]

    files, summaries, runs = {}, {}, []
    for seed, text, summary, info in results:
        path = out / f"trace_seed{seed}.csv"
        path.write_text(text)
        files[seed] = path
        summaries[seed] = summary
        runs.append({
            "seed": seed,
            "file": path.name,
            "sha256": hashlib.sha256(text.encode()).hexdigest(),
            "summary": summary,
            **info,
        })
    manifest = {
        "software": {"package": "gpcb", "version": __version__},
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "seed_offset": seed_offset,
        "absent_fields": [] if config.timing else ["wall_ms"],
        "runs": runs,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return RunResult(out, files, manifest_path, summaries)


def parse_values(text):
    """``"0.01,1.0,all"`` -> ``[0.01, 1.0, "all"]`` (YAML scalars)."""
    vals = [yaml.safe_load(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ConfigError("empty values list", "--values")
    return vals


SUMMARY_COLUMNS = ("value", "n_seeds", "ratio_mean", "ratio_std",
                   "final_regret_mean", "final_regret_std")


def sweep(config, parameter, values, seed_offset=0, jobs=1):
    """One :func:`run` per value of ``parameter``; writes ``summary.csv``."""
    if not values:
        raise ConfigError("empty values list", "--values")
    configs = [config.replace_path(parameter, v) for v in values]
    root = Path(config.output_dir) / f"sweep_{parameter}"
    rows = []
    for v, cfg in zip(values, configs):
        sub = root / f"{parameter}={v}"
        cfg = RunConfig(**{**cfg.__dict__, "output_dir": str(sub)})
        result = run(cfg, seed_offset=seed_offset, jobs=jobs)
        ratios = np.array([s["reward_ratio"] for s in result.summaries.values()])
        regrets = np.array([s["final_cum_regret"] for s in result.summaries.values()])
        rows.append((v, len(ratios), ratios.mean(), ratios.std(), regrets.mean(), regrets.std()))
    lines = [",".join(SUMMARY_COLUMNS)]
    for v, n, rm, rs, gm, gs in rows:
        lines.append(",".join([str(v), str(n)] + [repr(float(x)) for x in (rm, rs, gm, gs)]))
    summary_path = root / "summary.csv"
    summary_path.write_text("\n".join(lines) + "\n")
    return root


def gamma_report(config):
    """Build the gamma diagnostics instance described by ``config.diagnostics``."""
    from .metrics import gamma_diagnostics, non_volatile_sets, volatile_sets

    d = config.diagnostics
    _check_keys(d, {"contexts", "rounds", "n_contexts", "D", "K", "T", "volatile", "seed"},
                "diagnostics")
    K, T = int(d.get("K", 2)), int(d.get("T", 2))
    rng = np.random.default_rng(int(d.get("seed", 0)))
    D = int(d.get("D", config.env.D))
    if d.get("rounds") is not None:
        rounds = [np.asarray(r, dtype=float) for r in d["rounds"]]
        if len(rounds) != T:
            raise ConfigError(f"{len(rounds)} rounds given but T={T}", "diagnostics.rounds")
        sets = volatile_sets(rounds, K)
    elif d.get("volatile", False):
        n = int(d.get("n_contexts", 4))
        sets = volatile_sets([rng.random((n, D)) for _ in range(T)], K)
    else:
        X = (np.asarray(d["contexts"], dtype=float) if d.get("contexts") is not None
             else rng.random((int(d.get("n_contexts", 4)), D)))
        sets = non_volatile_sets(X, K, T)
    report = gamma_diagnostics(sets, config.kernel, config.noise_variance, K, T)
    return {
        "inputs": {"diagnostics": d, "kernel": config.kernel.to_dict(),
                   "noise_variance": config.noise_variance},
        "report": report.to_dict(),
    }
