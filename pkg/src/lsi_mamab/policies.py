"""Per-agent Balanced-ETC decisions and the single-agent 2-UCB baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .board import INF, PublicBoard
from .env import BERNOULLI, DETERMINISTIC, AgentProfile, ArmModel, UniformStream, sample_reward

EXPLORE = "explore"
COMMIT = "commit"


@dataclass(frozen=True)
class ActionDecision:
    arm: int
    kind: str

    @property
    def explores(self) -> bool:
        return self.kind == EXPLORE


def commit_target(board: PublicBoard, private: Mapping[int, tuple[int, float]] | None = None) -> int:
    """Active arm with the highest estimated mean, lowest index on ties.

    Arms with broadcasts use their public mean. An arm nobody has broadcast
    falls back to the agent's own samples in ``private`` (arm -> (count, sum))
    and otherwise counts as 1.0, the top of the reward support.
    """
    counts, sums = board.counts, board.sums
    best_arm, best_val = -1, -INF
    for i in board.active:
        n = counts[i]
        if n:
            val = sums[i] / n
        elif private and i in private and private[i][0]:
            pn, ps = private[i]
            val = ps / pn
        else:
            val = 1.0
        if val > best_val:
            best_arm, best_val = i, val
    return best_arm


def balanced_etc_decide(board: PublicBoard, profile: AgentProfile, threshold: float,
                        private: Mapping[int, tuple[int, float]] | None = None) -> ActionDecision:
    """One Balanced-ETC step for ``profile`` on an already-pruned board.

    The agent explores, i.e. pulls and broadcasts her least-broadcast active
    shared arm, when more than one arm is active, she shares at least one
    active arm, and her balance level is at most ``threshold``. Otherwise she
    commits silently to :func:`commit_target`.
    """
    if threshold < 1:
        raise ValueError("balance threshold must be >= 1")
    active = board.active
    if len(active) > 1:
        shared = profile.shared_arms
        mine = [i for i in active if i in shared]
        if mine and board.balance_level(mine) <= threshold:
            counts = board.counts
            arm = min(mine, key=lambda i: (counts[i], i))
            return ActionDecision(arm, EXPLORE)
    return ActionDecision(commit_target(board, private), COMMIT)


@dataclass
class UcbState:
    """Private statistics of a single 2-UCB learner."""

    horizon: int
    n_arms: int
    counts: list[int] = field(default_factory=list)
    sums: list[float] = field(default_factory=list)
    t: int = 0
    log_horizon: float | None = None

    def __post_init__(self):
        if not self.counts:
            self.counts = [0] * self.n_arms
        if not self.sums:
            self.sums = [0.0] * self.n_arms
        if self.log_horizon is None:
            self.log_horizon = math.log(self.horizon)

    def update(self, arm: int, reward: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward
        self.t += 1


def ucb_index(mean_sum: float, count: int, two_log: float) -> float:
    return mean_sum / count + math.sqrt(two_log / count)


def ucb_decide(state: UcbState) -> int:
    """``argmax_i mean_i + sqrt(2 ln T / n_i)``; unpulled arms first, lowest index on ties."""
    if state.t >= state.horizon:
        raise ValueError("horizon exhausted")
    two_log = 2.0 * state.log_horizon
    best_arm, best_val = -1, -INF
    for i in range(state.n_arms):
        n = state.counts[i]
        if n == 0:
            return i
        val = ucb_index(state.sums[i], n, two_log)
        if val > best_val:
            best_arm, best_val = i, val
    return best_arm


def run_ucb_baseline(model: ArmModel, horizon: int, rng) -> tuple[float, list[int]]:
    """Play 2-UCB alone for ``horizon`` pulls; returns (pseudo-regret, pulls per arm).

    Regret is measured against the true means. Produces the same pull
    sequence as stepping :func:`ucb_decide`, only with incremental index
    updates.
    """
    if isinstance(rng, np.random.Generator):
        rng = UniformStream(rng)
    n_arms = model.n_arms
    two_log = 2.0 * math.log(horizon)
    means = model.means
    counts = [0] * n_arms
    sums = [0.0] * n_arms
    index = [INF] * n_arms
    bernoulli = model.kind == BERNOULLI
    deterministic = model.kind == DETERMINISTIC
    draw = rng.random
    for _ in range(horizon):
        a = index.index(max(index))
        if bernoulli:
            x = 1.0 if draw() < means[a] else 0.0
        elif deterministic:
            x = means[a]
        else:
            x = sample_reward(model, a, rng)
        n = counts[a] + 1
        counts[a] = n
        sums[a] += x
        index[a] = sums[a] / n + math.sqrt(two_log / n)
    gaps = model.gaps
    regret = float(sum(c * g for c, g in zip(counts, gaps)))
    return regret, counts
