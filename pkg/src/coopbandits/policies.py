"""Arm-selection rules: coop-UCB, coop-UCB2 and coop-UCL.

All index functions are written against numpy arrays and broadcast over any
leading axes, so the same code scores a single (agent, arm) pair or every
agent of a batch of episodes at once. Arms whose count estimate is not
positive get an index of +inf, which forces their selection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .estimation import UNEXPLORED_TOL, NetworkEstimationState, estimated_means
from .numerics import inv_norm_cdf

POLICY_KINDS = ("coop-ucb", "coop-ucb2", "coop-ucl")


@dataclass(frozen=True)
class Schedule:
    """Sublogarithmic inflation f(t) with f(1) = 0, and its inverse."""

    name: str
    f: Callable
    inverse: Callable
    log_inverse: Callable  # ln f^{-1}(x), kept separately to avoid overflow

    def __call__(self, t):
        return self.f(t)


def _sqrt_log(t):
    return np.sqrt(np.log(t))


def _log_log(t):
    return np.log1p(np.log(t))


def _zero(t):
    return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0


def _exp_sq(x):
    return math.exp(x * x) if x * x < 709.0 else math.inf


def _sq(x):
    return x * x


def _exp_expm1(x):
    e = math.expm1(x) if x < 700.0 else math.inf
    return math.exp(e) if e < 709.0 else math.inf


def _zero_inverse(x):
    return 1.0 if x == 0 else math.inf


def _zero_log_inverse(x):
    return 0.0 if x == 0 else math.inf


SCHEDULES = {
    "sqrt-log": Schedule("sqrt-log", _sqrt_log, _exp_sq, _sq),
    "log-log": Schedule("log-log", _log_log, _exp_expm1, math.expm1),
    # degenerate, for reductions to the plain single-agent rules
    "zero": Schedule("zero", _zero, _zero_inverse, _zero_log_inverse),
}


def get_schedule(name: Union[str, Schedule]) -> Schedule:
    if isinstance(name, Schedule):
        return name
    try:
        return SCHEDULES[name]
    except KeyError:
        raise ValueError(f"unknown schedule {name!r}; expected one of {list(SCHEDULES)}") from None


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "coop-ucb2"
    gamma: float = 1.1
    schedule: Union[str, Schedule] = "sqrt-log"
    sigma_s: float = 1.0
    M: int = 1

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {POLICY_KINDS}")
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.sigma_s > 0:
            raise ValueError(f"sigma_s must be positive, got {self.sigma_s}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        object.__setattr__(self, "schedule", get_schedule(self.schedule))

    @property
    def f(self) -> Schedule:
        return self.schedule


def _split_explored(nhat):
    n = np.asarray(nhat, dtype=float)
    explored = n > UNEXPLORED_TOL
    return np.where(explored, n, 1.0), explored


def _bonus(nhat, t, config: PolicyConfig, inflation):
    n, explored = _split_explored(nhat)
    val = config.sigma_s * np.sqrt(
        2.0 * config.gamma * (n + inflation) / (config.M * n) * math.log(t) / n)
    out = np.where(explored, val, np.inf)
    return out if out.ndim else float(out)


def coop_ucb_bonus(nhat, t, config: PolicyConfig, epsilon_c):
    """Exploration bonus that needs the agent's centrality ``epsilon_c``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return _bonus(nhat, t, config, np.asarray(epsilon_c, dtype=float))


def coop_ucb2_bonus(nhat, t, config: PolicyConfig):
    """Exploration bonus with the graph-free inflation f(t)."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return _bonus(nhat, t, config, float(config.f(t)))


def select_arm(q_values) -> int:
    """Index of the largest value; ties go to the smallest index."""
    q = np.asarray(q_values, dtype=float)
    if q.ndim != 1 or q.size == 0:
        raise ValueError("need a non-empty 1-D vector of index values")
    if np.isnan(q).any():
        raise ValueError("index values contain NaN")
    return int(np.argmax(q))


def t_dagger(epsilon_c: float, schedule="sqrt-log") -> float:
    """Time after which f(t) exceeds the centrality: f^{-1}(epsilon_c)."""
    if epsilon_c < 0:
        raise ValueError("epsilon_c must be non-negative")
    return get_schedule(schedule).inverse(float(epsilon_c))


# --- Gaussian posteriors -----------------------------------------------------

class NoInformation(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BayesianPrior:
    """Gaussian prior on the arm means, stored as mean and precision.

    ``nu0`` has shape (..., N) and ``Lambda0`` (..., N, N); leading axes give
    one prior per agent.
    """

    nu0: np.ndarray
    Lambda0: np.ndarray
    diagonal: bool = field(init=False)

    def __post_init__(self):
        nu0 = np.asarray(self.nu0, dtype=float)
        lam = np.asarray(self.Lambda0, dtype=float)
        if lam.shape[-2:] != (nu0.shape[-1],) * 2:
            raise ValueError("prior precision must be N x N for an N-vector mean")
        if np.max(np.abs(lam - np.swapaxes(lam, -1, -2)), initial=0.0) > 1e-10:
            raise ValueError("prior precision must be symmetric")
        if lam.size and np.min(np.linalg.eigvalsh(lam)) < -1e-10:
            raise ValueError("prior precision must be positive semidefinite")
        off = lam - lam * np.eye(lam.shape[-1])
        object.__setattr__(self, "nu0", nu0)
        object.__setattr__(self, "Lambda0", lam)
        object.__setattr__(self, "diagonal", not np.any(off))

    @classmethod
    def uninformative(cls, N: int) -> "BayesianPrior":
        return cls(np.zeros(N), np.zeros((N, N)))

    @classmethod
    def from_covariance(cls, nu0, Sigma0) -> "BayesianPrior":
        """Sigma0 may be a full matrix or a scalar variance (times identity)."""
        nu0 = np.asarray(nu0, dtype=float)
        Sigma0 = np.asarray(Sigma0, dtype=float)
        if Sigma0.ndim == 0:
            Sigma0 = Sigma0 * np.eye(nu0.shape[-1])
        return cls(nu0, np.linalg.inv(Sigma0))

    @property
    def N(self) -> int:
        return self.nu0.shape[-1]

    @property
    def is_uninformative(self) -> bool:
        return not np.any(self.Lambda0)


def stack_priors(priors: Sequence[BayesianPrior]) -> BayesianPrior:
    """Combine one prior per agent into a single prior with an agent axis."""
    return BayesianPrior(np.stack([p.nu0 for p in priors]), np.stack([p.Lambda0 for p in priors]))


@dataclass(frozen=True, eq=False)
class BayesianPosterior:
    nu: np.ndarray
    Lambda: np.ndarray
    Sigma: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(np.diagonal(self.Sigma, axis1=-2, axis2=-1))


def gaussian_posterior(mu, data_var, prior: BayesianPrior, allow_empty: bool = False) -> BayesianPosterior:
    """Combine per-arm estimates ``mu`` with variances ``data_var`` and a prior.

    Arms with infinite ``data_var`` carry no data precision. The posterior is
    Lambda = Lambda0 + Gamma^{-1}, nu = Sigma (Gamma^{-1} mu + Lambda0 nu0).
    With ``allow_empty`` a diagonal prior tolerates rows with no information
    at all (uninformed arms get nu = NaN, infinite variance).
    """
    mu = np.asarray(mu, dtype=float)
    data_var = np.asarray(data_var, dtype=float)
    has_data = np.isfinite(data_var)
    data_prec = np.where(has_data, 1.0 / np.where(has_data, data_var, 1.0), 0.0)
    eye = np.eye(mu.shape[-1])
    Lambda = prior.Lambda0 + data_prec[..., None] * eye

    if prior.diagonal:
        lam0 = np.diagonal(prior.Lambda0, axis1=-2, axis2=-1)
        lam = lam0 + data_prec
        if not allow_empty and np.any(np.all(lam <= 0, axis=-1)):
            raise NoInformation("no data and no prior information on any arm")
        informed = lam > 0
        if not np.any(lam0):
            # flat prior: the posterior is the data itself
            var = np.where(has_data, data_var, np.inf)
            nu = np.where(has_data, mu, np.nan)
        else:
            safe = np.where(informed, lam, 1.0)
            var = np.where(informed, 1.0 / safe, np.inf)
            info = np.where(has_data, data_prec * np.where(has_data, mu, 0.0), 0.0) + lam0 * prior.nu0
            nu = np.where(informed, info / safe, np.nan)
        Sigma = np.where(eye > 0, var[..., None], 0.0)
        return BayesianPosterior(nu, Lambda, Sigma)

    info = data_prec * np.where(has_data, mu, 0.0) + np.einsum("...ij,...j->...i", prior.Lambda0, prior.nu0)
    try:
        Sigma = np.linalg.inv(Lambda)
    except np.linalg.LinAlgError:
        raise NoInformation("posterior precision is singular") from None
    nu = np.einsum("...ij,...j->...i", Sigma, info)
    return BayesianPosterior(nu, Lambda, 0.5 * (Sigma + np.swapaxes(Sigma, -1, -2)))


def ucl_posterior_batch(mu, n, prior: BayesianPrior, sigma_s: float) -> BayesianPosterior:
    """Single-agent posterior from empirical means ``mu`` over ``n`` pulls."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("pull counts must be non-negative")
    pulled = n > 0
    var = np.where(pulled, sigma_s ** 2 / np.where(pulled, n, 1.0), np.inf)
    return gaussian_posterior(np.where(pulled, mu, 0.0), var, prior)


def ucl_posterior_recursive(arms, rewards, prior: BayesianPrior, sigma_s: float) -> BayesianPosterior:
    """Posterior built one observation at a time.

    Each observation of arm ``a`` adds the rank-one term phi phi^T / sigma_s^2
    to the precision (phi the indicator vector of ``a``) and r phi / sigma_s^2
    to the information vector.
    """
    N = prior.N
    Lambda = prior.Lambda0.astype(float).copy()
    h = prior.Lambda0 @ prior.nu0
    nu = prior.nu0.copy()
    for a, r in zip(arms, rewards):
        phi = np.zeros(N)
        phi[int(a)] = 1.0
        q = r * phi / sigma_s ** 2 + h
        Lambda = Lambda + np.outer(phi, phi) / sigma_s ** 2
        try:
            nu = np.linalg.solve(Lambda, q)
            h = Lambda @ nu
        except np.linalg.LinAlgError:
            h = q  # precision still singular; carry the information vector
    try:
        Sigma = np.linalg.inv(Lambda)
    except np.linalg.LinAlgError:
        raise NoInformation("posterior precision is singular") from None
    return BayesianPosterior(Sigma @ h, Lambda, Sigma)


def coop_ucl_posterior(state: NetworkEstimationState, agent, prior: BayesianPrior,
                       sigma_s: float, M: int | None = None,
                       allow_empty: bool = False) -> BayesianPosterior:
    """Approximate posterior of one agent (or all agents if ``agent`` is None).

    The data variance of arm i is sigma_s^2 / (M nhat_i).
    """
    M = state.M if M is None else M
    nhat, shat = state.nhat, state.shat
    if agent is not None:
        nhat, shat = nhat[..., agent, :], shat[..., agent, :]
    n, explored = _split_explored(nhat)
    mu = np.where(explored, estimated_means(nhat, shat), 0.0)
    var = np.where(explored, sigma_s ** 2 / (M * n), np.inf)
    return gaussian_posterior(mu, var, prior, allow_empty)


def ucl_quantile(t, gamma: float) -> float:
    """Phi^{-1}(1 - 1/t^gamma), computed from the lower tail for accuracy."""
    if t < 2:
        raise ValueError("credible-limit index needs t >= 2")
    return -inv_norm_cdf(float(t) ** (-gamma))


def coop_ucl_q(nu, sigma, nhat, t, config: PolicyConfig):
    """Upper credible limit nu + sigma * sqrt((n + f(t)) / n) * Phi^{-1}(1 - t^-gamma)."""
    n, explored = _split_explored(nhat)
    z = ucl_quantile(t, config.gamma)
    inflate = np.sqrt((n + float(config.f(t))) / n)
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(invalid="ignore"):
        val = np.asarray(nu, dtype=float) + np.where(sigma > 0, sigma, 0.0) * inflate * z
    out = np.where(explored, val, np.inf)
    return out if out.ndim else float(out)


def index_values(state: NetworkEstimationState, t: int, config: PolicyConfig,
                 epsilon_c=None, prior: BayesianPrior | None = None) -> np.ndarray:
    """Index Q of every (agent, arm) pair, shape (..., M, N)."""
    nhat, shat = state.nhat, state.shat
    if config.kind == "coop-ucl":
        if prior is None:
            prior = BayesianPrior.uninformative(state.N)
        post = coop_ucl_posterior(state, None, prior, config.sigma_s, config.M,
                                  allow_empty=prior.diagonal)
        return coop_ucl_q(post.nu, post.sigma, nhat, t, config)
    mu = estimated_means(nhat, shat)
    if config.kind == "coop-ucb":
        if epsilon_c is None:
            raise ValueError("coop-ucb needs the agents' epsilon_c")
        bonus = coop_ucb_bonus(nhat, t, config, np.asarray(epsilon_c)[:, None])
    else:
        bonus = coop_ucb2_bonus(nhat, t, config)
    return np.where(np.isinf(bonus), np.inf, np.nan_to_num(mu) + bonus)
