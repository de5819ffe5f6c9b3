"""Gaussian bandit environments, the episode runner, Monte Carlo aggregation
and the regret-bound evaluators.

Episodes are simulated in lock-step batches: state arrays carry a leading run
axis and every run owns its own ``RandomStream(base_seed + run)``, so a run's
trajectory does not depend on which batch or worker executed it.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .estimation import NetworkEstimationState, consensus_step
from .graph import ConsensusModel
from .numerics import RandomStream
from .policies import BayesianPrior, PolicyConfig, get_schedule, index_values


@dataclass(frozen=True, eq=False)
class BanditEnvironment:
    means: np.ndarray
    sigma_s: float

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        if means.ndim != 1 or means.size == 0:
            raise ValueError("means must be a non-empty vector")
        if not self.sigma_s > 0:
            raise ValueError(f"sigma_s must be positive, got {self.sigma_s}")
        object.__setattr__(self, "means", means)

    @property
    def N(self) -> int:
        return self.means.size

    @property
    def best_arm(self) -> int:
        return int(np.argmax(self.means))

    @property
    def gaps(self) -> np.ndarray:
        return self.means.max() - self.means


@dataclass(frozen=True)
class EnvironmentDraw:
    """Arm means drawn i.i.d. from Normal(mean_of_means, sd_of_means^2)."""

    N: int = 10
    mean_of_means: float = 75.0
    sd_of_means: float = 25.0
    sigma_s: float = 30.0


def draw_environment(stream: RandomStream, N: int, mean_of_means: float, sd_of_means: float,
                     sigma_s: float) -> BanditEnvironment:
    if sd_of_means < 0:
        raise ValueError("sd_of_means must be non-negative")
    if sd_of_means == 0:
        return BanditEnvironment(np.full(N, float(mean_of_means)), sigma_s)
    return BanditEnvironment(stream.normal(mean_of_means, sd_of_means, N), sigma_s)


@dataclass(frozen=True, eq=False)
class RegretTrace:
    """One episode. Agents and arms are 0-based; rounds run t = 1..T."""

    T: int
    selections: np.ndarray  # (T, M) arm pulled by each agent
    rewards: np.ndarray  # (T, M)
    cumulative_regret: np.ndarray  # (M, T)
    pull_counts: np.ndarray  # (M, N)
    means: np.ndarray

    @property
    def group_regret(self) -> np.ndarray:
        return self.cumulative_regret.sum(axis=0)


@dataclass(frozen=True, eq=False)
class _Batch:
    selections: np.ndarray  # (R, T, M)
    rewards: np.ndarray  # (R, T, M)
    cumulative_regret: np.ndarray  # (R, M, T)
    pull_counts: np.ndarray  # (R, M, N)


def _check_policy(model: ConsensusModel, policy: PolicyConfig) -> None:
    if not model.isolated and policy.M != model.M:
        raise ValueError(f"policy is configured for M = {policy.M} agents but the graph has {model.M}")


def simulate_batch(means, noise, model: ConsensusModel, policy: PolicyConfig,
                   prior: Optional[BayesianPrior] = None) -> _Batch:
    """Run R episodes in lock-step.

    ``means`` has shape (R, N) and ``noise`` (R, T, M) holds standard normal
    draws: agent k's reward at round t is ``means[arm] + sigma_s * noise[t, k]``.
    The first N rounds pull every arm once (agent-independent round-robin),
    then each agent maximises its index; one consensus step follows each round.
    """
    means = np.atleast_2d(np.asarray(means, dtype=float))
    noise = np.asarray(noise, dtype=float)
    R, N = means.shape
    _, T, M = noise.shape
    if M != model.M:
        raise ValueError(f"noise has {M} agents, model has {model.M}")
    if T < N:
        raise ValueError(f"horizon T = {T} is shorter than the {N}-round initialization")
    _check_policy(model, policy)
    sigma = policy.sigma_s
    gaps = means.max(axis=1, keepdims=True) - means
    rows = np.arange(R)[:, None]
    eye_n = np.eye(N)

    state = NetworkEstimationState.zeros(M, N, batch=(R,))
    selections = np.empty((R, T, M), dtype=np.int64)
    rewards = np.empty((R, T, M))
    regret = np.empty((R, T, M))
    eps_c = model.epsilon_c
    for t in range(1, T + 1):
        if t <= N:
            sel = np.full((R, M), t - 1, dtype=np.int64)
        else:
            q = index_values(state, t, policy, eps_c, prior)
            sel = np.argmax(q, axis=-1)
        r = means[rows, sel] + sigma * noise[:, t - 1, :]
        xi = eye_n[sel]
        state = consensus_step(state, xi, xi * r[..., None], model.P)
        selections[:, t - 1] = sel
        rewards[:, t - 1] = r
        regret[:, t - 1] = gaps[rows, sel]

    cum = np.cumsum(regret, axis=1).transpose(0, 2, 1)
    pulls = np.stack([(selections == i).sum(axis=1) for i in range(N)], axis=-1)
    return _Batch(selections, rewards, cum, pulls)


def run_episode(env: BanditEnvironment, model: ConsensusModel, policy: PolicyConfig,
                prior: Optional[BayesianPrior], T: int, stream: RandomStream) -> RegretTrace:
    noise = stream.normal(0.0, 1.0, (1, T, model.M))
    b = simulate_batch(env.means[None], noise, model, policy, prior)
    return RegretTrace(T, b.selections[0], b.rewards[0], b.cumulative_regret[0],
                       b.pull_counts[0], env.means)


# --- Monte Carlo ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Everything needed to reproduce a Monte Carlo batch.

    Exactly one of ``environment`` (fixed means) and ``draw`` (means redrawn
    for every run from that run's stream) must be given.
    """

    model: ConsensusModel
    policy: PolicyConfig
    T: int
    runs: int
    base_seed: int = 0
    environment: Optional[BanditEnvironment] = None
    draw: Optional[EnvironmentDraw] = None
    prior: Optional[BayesianPrior] = None
    chunk_size: int = 200
    workers: int = 1
    keep_traces: bool = False

    def __post_init__(self):
        if (self.environment is None) == (self.draw is None):
            raise ValueError("give exactly one of environment= or draw=")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")
        N = self.N
        if self.T < N:
            raise ValueError(f"horizon T = {self.T} is shorter than the {N}-round initialization")
        if self.prior is not None and self.prior.N != N:
            raise ValueError(f"prior has {self.prior.N} arms, environment has {N}")
        _check_policy(self.model, self.policy)

    @property
    def N(self) -> int:
        return self.environment.N if self.environment is not None else self.draw.N

    @property
    def sigma_s(self) -> float:
        return self.environment.sigma_s if self.environment is not None else self.draw.sigma_s


@dataclass(frozen=True, eq=False)
class AggregateResult:
    """Monte Carlo averages; per-run summaries are kept for paired comparisons."""

    mean_cumulative_regret: np.ndarray  # (M, T)
    mean_pull_counts: np.ndarray  # (M, N)
    final_regret: np.ndarray  # (runs, M) cumulative regret at T
    suboptimal_pulls: np.ndarray  # (runs,) pulls of non-best arms, all agents
    seeds: np.ndarray
    traces: Optional[list] = field(default=None, repr=False)

    @property
    def runs(self) -> int:
        return len(self.seeds)

    @property
    def group_regret(self) -> np.ndarray:
        return self.mean_cumulative_regret.sum(axis=0)


def _episode_inputs(cfg: ExperimentConfig, seed: int):
    stream = RandomStream(seed)
    if cfg.draw is not None:
        d = cfg.draw
        env = draw_environment(stream, d.N, d.mean_of_means, d.sd_of_means, d.sigma_s)
    else:
        env = cfg.environment
    return env.means, stream.normal(0.0, 1.0, (cfg.T, cfg.model.M))


def _run_chunk(cfg: ExperimentConfig, seeds: np.ndarray):
    inputs = [_episode_inputs(cfg, int(s)) for s in seeds]
    means = np.stack([m for m, _ in inputs])
    noise = np.stack([z for _, z in inputs])
    b = simulate_batch(means, noise, cfg.model, cfg.policy, cfg.prior)
    best = np.argmax(means, axis=1)
    total_pulls = b.pull_counts.sum(axis=1)
    subopt = total_pulls.sum(axis=1) - total_pulls[np.arange(len(seeds)), best]
    traces = None
    if cfg.keep_traces:
        traces = [RegretTrace(cfg.T, b.selections[j], b.rewards[j], b.cumulative_regret[j],
                              b.pull_counts[j], means[j]) for j in range(len(seeds))]
    return (b.cumulative_regret.sum(axis=0), b.pull_counts.sum(axis=0),
            b.cumulative_regret[:, :, -1], subopt, traces)


def worker_count(requested: Optional[int] = None) -> int:
    """Worker processes, capped by the COOP_BANDITS_THREADS environment variable."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("COOP_BANDITS_THREADS")
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def monte_carlo(cfg: ExperimentConfig) -> AggregateResult:
    """Average ``cfg.runs`` independent episodes (run r uses seed base_seed + r).

    Runs are grouped into fixed chunks and chunk sums are reduced in chunk
    order, so the result is the same for any number of workers.
    """
    seeds = cfg.base_seed + np.arange(cfg.runs, dtype=np.int64)
    chunks = [seeds[i:i + cfg.chunk_size] for i in range(0, cfg.runs, cfg.chunk_size)]
    workers = min(worker_count(cfg.workers), len(chunks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [cfg] * len(chunks), chunks))
    else:
        parts = [_run_chunk(cfg, c) for c in chunks]

    regret_sum = parts[0][0].copy()
    pulls_sum = parts[0][1].astype(float)
    for p in parts[1:]:
        regret_sum += p[0]
        pulls_sum += p[1]
    traces = [tr for p in parts for tr in p[4]] if cfg.keep_traces else None
    return AggregateResult(
        mean_cumulative_regret=regret_sum / cfg.runs,
        mean_pull_counts=pulls_sum / cfg.runs,
        final_regret=np.concatenate([p[2] for p in parts]),
        suboptimal_pulls=np.concatenate([p[3] for p in parts]),
        seeds=seeds,
        traces=traces,
    )


# --- bounds -------------------------------------------------------------------

def fusion_center_lower_bound(env: BanditEnvironment, T: float) -> np.ndarray:
    """Asymptotic lower bound 2 sigma^2 / Delta_i^2 ln T on total pulls of each arm.

    NaN for arms with zero gap (including the best arm).
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    gaps = env.gaps
    pos = gaps > 0
    out = np.full(env.N, np.nan)
    out[pos] = 2.0 * env.sigma_s ** 2 / gaps[pos] ** 2 * math.log(T)
    return out


def centrality_constant(epsilon_c: float, gamma: float, schedule="sqrt-log") -> float:
    """Per-agent constant of the coop-UCB2 bound.

    (1+e)/e t^(e/(1+e)) + t^(1-gamma)/(gamma-1) - 1/e + 1/t with t = f^{-1}(e),
    evaluated in a form that is continuous at e = 0, where it equals
    2 + 1/(gamma-1).
    """
    if epsilon_c < 0:
        raise ValueError("epsilon_c must be non-negative")
    if epsilon_c == 0:
        return 2.0 + 1.0 / (gamma - 1.0)
    log_t = get_schedule(schedule).log_inverse(epsilon_c)
    a = epsilon_c / (1.0 + epsilon_c)
    if a * log_t > 709.0:
        return math.inf  # t_dagger beyond double range; the bound is vacuous
    first = (1.0 + epsilon_c) / epsilon_c * math.expm1(a * log_t) + 1.0
    return first + math.exp((1.0 - gamma) * log_t) / (gamma - 1.0) + math.exp(-log_t)


def _gap(env: BanditEnvironment, arm: int) -> float:
    delta = float(env.gaps[arm])
    if delta <= 0:
        raise ValueError(f"arm {arm} has zero gap; the bound is undefined")
    return delta


def logarithmic_term(env: BanditEnvironment, M: int, gamma: float, schedule, T: float,
                     arm: int) -> float:
    """(4 gamma s^2 / D^2) (1 + sqrt(1 + D^2 M f(T) / (2 gamma s^2 ln T))) ln T."""
    if T <= 1:
        raise ValueError("T must exceed 1 (ln T > 0)")
    f = get_schedule(schedule)
    delta = _gap(env, arm)
    s2 = env.sigma_s ** 2
    lnT = math.log(T)
    root = math.sqrt(1.0 + delta ** 2 * M * float(f(T)) / (2.0 * gamma * s2 * lnT))
    return 4.0 * gamma * s2 / delta ** 2 * (1.0 + root) * lnT


def theorem1_bound(env: BanditEnvironment, model: ConsensusModel, gamma: float, schedule,
                   T: float, arm: int) -> float:
    """Upper bound on the expected total pulls of a suboptimal arm under coop-UCB2."""
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    log_part = logarithmic_term(env, model.M, gamma, schedule, T, arm)
    consts = sum(centrality_constant(float(e), gamma, schedule) for e in model.epsilon_c)
    return log_part + model.M * model.epsilon_n + consts


def theorem2_bound(env: BanditEnvironment, model: ConsensusModel, gamma: float, schedule,
                   T: float, arm: int) -> float:
    """Upper bound on the expected total pulls of a suboptimal arm under coop-UCL
    with uninformative priors."""
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    f = get_schedule(schedule)
    log_part = logarithmic_term(env, model.M, gamma, f, T, arm)
    consts = sum(centrality_constant(float(e), gamma, f) for e in model.epsilon_c)
    t_max = max(f.inverse(float(e)) for e in model.epsilon_c)
    return 2.0 * consts + max(math.ceil(model.M * model.epsilon_n + log_part), t_max)


def bound_table(env: BanditEnvironment, model: ConsensusModel, gamma: float, schedule,
                horizons) -> list[dict]:
    """Rows (T, arm, lower, theorem1, theorem2); bounds are None for zero-gap arms."""
    rows = []
    for T in horizons:
        if T <= 1:
            raise ValueError("every horizon must exceed 1")
        lower = fusion_center_lower_bound(env, T)
        for i in range(env.N):
            if env.gaps[i] > 0:
                rows.append({"T": T, "arm": i + 1, "lower": float(lower[i]),
                             "theorem1": theorem1_bound(env, model, gamma, schedule, T, i),
                             "theorem2": theorem2_bound(env, model, gamma, schedule, T, i)})
            else:
                rows.append({"T": T, "arm": i + 1, "lower": None, "theorem1": None,
                             "theorem2": None})
    return rows


# --- export -------------------------------------------------------------------

def _comment(config: Optional[dict]) -> list[str]:
    return [f"# config={json.dumps(config, sort_keys=True)}"] if config is not None else []


def write_trace_csv(path, traces, seeds, config: Optional[dict] = None) -> None:
    """Columns run, t, agent, arm, reward, cumulative_regret (agents and arms 1-based)."""
    with open(path, "w", newline="") as fh:
        for line in _comment(config):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "t", "agent", "arm", "reward", "cumulative_regret"])
        for seed, tr in zip(seeds, traces):
            M = tr.selections.shape[1]
            for t in range(tr.T):
                for k in range(M):
                    w.writerow([int(seed), t + 1, k + 1, int(tr.selections[t, k]) + 1,
                                repr(float(tr.rewards[t, k])),
                                repr(float(tr.cumulative_regret[k, t]))])


def write_aggregate_csv(path, result: AggregateResult, config: Optional[dict] = None) -> None:
    """Columns t, agent, mean_cum_regret; agent 0 holds the group total."""
    M, T = result.mean_cumulative_regret.shape
    group = result.group_regret
    with open(path, "w", newline="") as fh:
        for line in _comment(config):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "agent", "mean_cum_regret"])
        for t in range(T):
            for k in range(M):
                w.writerow([t + 1, k + 1, repr(float(result.mean_cumulative_regret[k, t]))])
            w.writerow([t + 1, 0, repr(float(group[t]))])
