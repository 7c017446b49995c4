"""Rollout containers and the per-trajectory stochastic cost.

A trajectory records everything the estimators downstream need: the visited
states, the noisy actions, the injected noise, the accumulated state costs and
the per-step log-probabilities under the sampling policy and the uncontrolled
base policy.  Delta-type state costs (viapoints, terminal costs) enter as a
single undiscounted addition at their grid index; running costs carry a dt
factor.  Both conventions are applied by the environment before construction,
so `state_costs` here is already the per-step contribution to the path cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Trajectory", "RolloutBatch", "stochastic_cost", "batch_mean_cost"]


def _frozen(a) -> np.ndarray:
    out = np.asarray(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Trajectory:
    """One rollout of a controlled system.

    Shapes: ``states`` is (T+1, state_dim) including the initial state,
    all other sequences have length T (the number of control steps).
    By construction ``actions[k] - mean(states[k], k) == noises[k]``.
    """

    states: np.ndarray
    actions: np.ndarray
    noises: np.ndarray
    state_costs: np.ndarray
    logp_policy: np.ndarray
    logp_base: np.ndarray

    def __post_init__(self):
        for name in ("states", "actions", "noises", "state_costs",
                     "logp_policy", "logp_base"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        t = self.num_steps
        if self.states.shape[0] != t + 1:
            raise ValueError(
                f"states has {self.states.shape[0]} entries, expected {t + 1}")
        for name in ("noises", "state_costs", "logp_policy", "logp_base"):
            if getattr(self, name).shape[0] != t:
                raise ValueError(f"{name} has length "
                                 f"{getattr(self, name).shape[0]}, expected {t}")

    @property
    def num_steps(self) -> int:
        return self.actions.shape[0]


def stochastic_cost(traj: Trajectory, gamma: float) -> float:
    """Path cost plus gamma times the policy/base log-likelihood ratio."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if traj.state_costs.shape != traj.logp_policy.shape:
        raise ValueError("cost and log-prob sequences have mismatched lengths")
    return float(np.sum(traj.state_costs)
                 + gamma * np.sum(traj.logp_policy - traj.logp_base))


@dataclass(frozen=True)
class RolloutBatch:
    """N trajectories with their cached stochastic costs.

    The cached costs are recomputable from the stored sequences; caching only
    avoids re-summing inside the estimators.
    """

    trajectories: tuple[Trajectory, ...]
    gamma: float
    stochastic_costs: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        if len(self.trajectories) < 2:
            raise ValueError("a rollout batch needs at least 2 trajectories")
        if self.stochastic_costs is None:
            costs = [stochastic_cost(tr, self.gamma) for tr in self.trajectories]
            object.__setattr__(self, "stochastic_costs", _frozen(costs))
        else:
            object.__setattr__(self, "stochastic_costs",
                               _frozen(self.stochastic_costs))
        if self.stochastic_costs.shape[0] != len(self.trajectories):
            raise ValueError("stochastic_costs length does not match batch size")

    @property
    def n(self) -> int:
        return len(self.trajectories)

    @property
    def num_steps(self) -> int:
        return self.trajectories[0].num_steps


def batch_mean_cost(batch: RolloutBatch) -> float:
    """Monte Carlo estimate of the regularized expected cost."""
    if batch.stochastic_costs.size == 0:
        raise ValueError("empty batch")
    return float(np.mean(batch.stochastic_costs))
