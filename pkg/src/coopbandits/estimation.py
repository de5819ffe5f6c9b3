"""Running-consensus estimates of per-arm pull counts and reward sums.

Every agent keeps, for each arm, an estimate of the pulls and of the reward
collected *per unit agent* across the whole network. One round of the
estimator is ``x <- P (x + new)``, applied to both quantities.

State arrays have shape ``(..., M, N)``: agents on the second-to-last axis,
arms on the last. Leading axes, if any, index independent episodes, which is
how the simulation module runs many episodes in lock-step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNEXPLORED_TOL = 1e-12


class UnexploredArm(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NetworkEstimationState:
    t: int
    nhat: np.ndarray
    shat: np.ndarray

    @classmethod
    def zeros(cls, M: int, N: int, batch: tuple = ()) -> "NetworkEstimationState":
        shape = tuple(batch) + (M, N)
        return cls(0, np.zeros(shape), np.zeros(shape))

    @property
    def M(self) -> int:
        return self.nhat.shape[-2]

    @property
    def N(self) -> int:
        return self.nhat.shape[-1]


@dataclass(frozen=True, eq=False)
class CentralizedReference:
    n_cent: np.ndarray
    s_cent: np.ndarray


def consensus_step(state: NetworkEstimationState, selections, rewards, P) -> NetworkEstimationState:
    """Advance the estimator by one round.

    ``selections`` is the one-hot selection matrix (one 1 per agent row) and
    ``rewards`` carries each agent's reward in the column of the arm it pulled.
    """
    xi = np.asarray(selections, dtype=float)
    r = np.asarray(rewards, dtype=float)
    P = np.asarray(P, dtype=float)
    if xi.shape != state.nhat.shape or r.shape != state.nhat.shape:
        raise ValueError(f"selection/reward shapes {xi.shape}, {r.shape} do not match "
                         f"state shape {state.nhat.shape}")
    if P.shape != (state.M, state.M):
        raise ValueError(f"consensus matrix shape {P.shape} does not match M = {state.M}")
    return NetworkEstimationState(state.t + 1, P @ (state.nhat + xi), P @ (state.shat + r))


def mu_hat(state: NetworkEstimationState, agent: int, arm: int) -> float:
    n = state.nhat[..., agent, arm]
    if np.any(n <= UNEXPLORED_TOL):
        raise UnexploredArm(f"agent {agent} has no information on arm {arm}")
    return state.shat[..., agent, arm] / n


def estimated_means(nhat, shat) -> np.ndarray:
    """Elementwise shat / nhat; NaN where the arm is unexplored."""
    nhat = np.asarray(nhat)
    explored = nhat > UNEXPLORED_TOL
    out = np.full(nhat.shape, np.nan)
    np.divide(shat, nhat, out=out, where=explored)
    return out


def centralized_reference(selections, rewards, M: int | None = None) -> CentralizedReference:
    """Network-average pull counts and reward sums of a history.

    ``selections`` and ``rewards`` are stacked per round, shape ``(T, M, N)``.
    With an empty history pass ``M`` and an array of shape ``(0, M, N)``.
    """
    xi = np.asarray(selections, dtype=float)
    r = np.asarray(rewards, dtype=float)
    M = xi.shape[-2] if M is None else M
    return CentralizedReference(xi.sum(axis=(0, 1)) / M, r.sum(axis=(0, 1)) / M)
