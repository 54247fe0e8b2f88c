"""Public statistics built from broadcast arm-reward pairs."""
from __future__ import annotations

import math
from typing import Iterable

INF = math.inf


class ProtocolViolation(RuntimeError):
    """An action the collaboration protocol forbids, e.g. broadcasting an eliminated arm."""


def confidence_radius(count: int, horizon: int, log_horizon: float | None = None) -> float:
    """``sqrt(2 ln T / count)``; ``inf`` for an arm nobody has broadcast yet.

    ``log_horizon`` overrides ``ln(horizon)``.
    """
    if count == 0:
        return INF
    if log_horizon is None:
        log_horizon = math.log(horizon)
    return math.sqrt(2.0 * log_horizon / count)


class PublicBoard:
    """Broadcast counts, reward sums and the active arm set of one run.

    Parameters
    ----------
    n_arms, horizon:
        Problem size and horizon ``T``; ``T >= 2`` so that ``ln T > 0``.
    covered:
        Arms at least one agent is willing to share. When given, the balance
        level only compares against active arms in this set, since an arm
        nobody shares keeps a zero count forever. ``None`` means all arms.
    log_horizon:
        Replaces ``ln(horizon)`` in every radius (used to pin closed forms).
    """

    def __init__(self, n_arms: int, horizon: int, covered: Iterable[int] | None = None,
                 log_horizon: float | None = None):
        if horizon < 2:
            raise ValueError("horizon must be at least 2")
        self.n_arms = n_arms
        self.horizon = horizon
        self.log_horizon = math.log(horizon) if log_horizon is None else float(log_horizon)
        self._two_log = 2.0 * self.log_horizon
        self.counts = [0] * n_arms
        self.sums = [0.0] * n_arms
        # cached confidence bounds, refreshed on every broadcast
        self.lower = [-INF] * n_arms
        self.upper = [INF] * n_arms
        self.active = list(range(n_arms))
        self.covered = None if covered is None else frozenset(covered)

    @classmethod
    def from_stats(cls, counts, sums, horizon: int, active=None, covered=None,
                   log_horizon: float | None = None) -> "PublicBoard":
        """Board with the given per-arm counts and reward sums."""
        board = cls(len(counts), horizon, covered=covered, log_horizon=log_horizon)
        board.counts = [int(n) for n in counts]
        board.sums = [float(s) for s in sums]
        for i in range(board.n_arms):
            board._refresh(i)
        if active is not None:
            board.active = sorted(active)
        return board

    def mean(self, arm: int) -> float | None:
        n = self.counts[arm]
        return self.sums[arm] / n if n else None

    def radius(self, arm: int) -> float:
        n = self.counts[arm]
        return math.sqrt(self._two_log / n) if n else INF

    def record_broadcast(self, arm: int, reward: float) -> None:
        if arm not in self.active:
            raise ProtocolViolation(f"arm {arm} was eliminated and cannot be broadcast")
        self.counts[arm] += 1
        self.sums[arm] += reward
        self._refresh(arm)

    def _refresh(self, arm: int) -> None:
        n = self.counts[arm]
        if n == 0:
            self.lower[arm], self.upper[arm] = -INF, INF
            return
        mean = self.sums[arm] / n
        rad = math.sqrt(self._two_log / n)
        self.lower[arm] = mean - rad
        self.upper[arm] = mean + rad

    def run_elimination(self) -> list[int]:
        """Drop every active arm whose upper bound is at most the best lower bound.

        The best lower bound is ``max_j (mean_j - rad_j)`` over the active
        set. Arms without broadcasts have bounds ``(-inf, inf)`` so they
        neither get eliminated nor eliminate anything. Returns the arms
        removed by this call.
        """
        active = self.active
        if len(active) < 2:
            return []
        lower, upper = self.lower, self.upper
        best_lower = max(lower[j] for j in active)
        if best_lower == -INF:
            return []
        dropped = [i for i in active if upper[i] <= best_lower]
        if dropped:
            self.active = [i for i in active if upper[i] > best_lower]
        return dropped

    def reference_min(self) -> int:
        """Smallest count among the active arms the balance level compares against."""
        if self.covered is None:
            return min(self.counts[j] for j in self.active)
        ref = [self.counts[j] for j in self.active if j in self.covered]
        return min(ref) if ref else 0

    def balance_level(self, shared_arms: Iterable[int]) -> float:
        """Least count among the agent's active shared arms over the global least count.

        ``0/0`` is 1 so every sharer may explore before anything is broadcast;
        ``k/0`` with ``k > 0`` is ``inf``.
        """
        shared = set(shared_arms)
        mine = [self.counts[i] for i in self.active if i in shared]
        if not mine:
            raise ValueError("agent has no active shared arm; balance level undefined")
        num = min(mine)
        den = self.reference_min()
        if den == 0:
            return 1.0 if num == 0 else INF
        return num / den

    def snapshot(self) -> dict:
        return {
            "horizon": self.horizon,
            "counts": list(self.counts),
            "sums": list(self.sums),
            "active": list(self.active),
        }
