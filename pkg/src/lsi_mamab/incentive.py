"""End-of-game settlement: compensation, cost, IR verdicts and controller profit.

Both payments are priced from the final broadcast count of every eliminated
arm. Compensation pays each pull of such an arm at the upper end of the gap
bracket, cost charges each broadcast pair at a scaled-down lower end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .board import PublicBoard

SQRT_GAP = math.sqrt(2.0) - math.sqrt(1.5)
# (sqrt 2 - sqrt 3/2)^2, the squared slack between the two confidence radii
LOWER_COEF = SQRT_GAP ** 2


class SettlementError(RuntimeError):
    """Board state that cannot arise from a valid run (e.g. eliminated arm with no broadcasts)."""


def _log_t(horizon: int, log_horizon: float | None) -> float:
    return math.log(horizon) if log_horizon is None else float(log_horizon)


def compensation_unit(count: int, log_horizon: float, threshold: float) -> float:
    return math.sqrt(8.0 * (1.0 + math.sqrt(threshold)) ** 2 * log_horizon / count)


def cost_unit(count: int, log_horizon: float, threshold: float) -> float:
    return math.sqrt(LOWER_COEF ** 2 * log_horizon / (128.0 * (1.0 + math.sqrt(threshold)) ** 2 * count))


@dataclass
class AgentLedger:
    """One agent's pulls per arm, split by step kind, plus her realised regret."""

    explore_counts: np.ndarray
    commit_counts: np.ndarray
    raw_regret: float = 0.0

    @property
    def pulls(self) -> np.ndarray:
        return self.explore_counts + self.commit_counts


@dataclass
class IncentiveOutcome:
    compensation: np.ndarray
    cost: np.ndarray
    raw_regret: np.ndarray
    ucb_regret: float
    relative_regret: np.ndarray
    controller_profit: float

    @property
    def adjusted_regret(self) -> np.ndarray:
        """Regret after payments, ``R_m - Com_m + Cost_m``."""
        return self.raw_regret - self.compensation + self.cost


def eliminated_arms(board: PublicBoard) -> list[int]:
    active = set(board.active)
    out = [i for i in range(board.n_arms) if i not in active]
    for i in out:
        if board.counts[i] == 0:
            raise SettlementError(f"arm {i} is eliminated but was never broadcast")
    return out


def compute_compensation(ledger: AgentLedger, board: PublicBoard, threshold: float) -> float:
    L = board.log_horizon
    total = 0.0
    for i in eliminated_arms(board):
        pulls = int(ledger.explore_counts[i] + ledger.commit_counts[i])
        total += pulls * compensation_unit(board.counts[i], L, threshold)
    return total


def compute_cost(board: PublicBoard, threshold: float, own_shares: np.ndarray | None = None) -> float:
    """Charge for every broadcast pair of an eliminated arm.

    The charge covers all ``N_i(T)`` pairs, the agent's own included. Pass
    the agent's ``explore_counts`` as ``own_shares`` to charge only for pairs
    received from others.
    """
    L = board.log_horizon
    total = 0.0
    for i in eliminated_arms(board):
        n = board.counts[i]
        paid = n - int(own_shares[i]) if own_shares is not None else n
        total += paid * cost_unit(n, L, threshold)
    return total


def settle(explore_counts: np.ndarray, commit_counts: np.ndarray, raw_regret: np.ndarray,
           board: PublicBoard, threshold: float, ucb_regret: float,
           exclude_own_shares: bool = False) -> IncentiveOutcome:
    """Vectorised settlement for all agents at once; ledgers are ``(M, N)``."""
    M = explore_counts.shape[0]
    L = board.log_horizon
    gone = eliminated_arms(board)
    comp_unit = np.zeros(board.n_arms)
    charge_unit = np.zeros(board.n_arms)
    for i in gone:
        comp_unit[i] = compensation_unit(board.counts[i], L, threshold)
        charge_unit[i] = cost_unit(board.counts[i], L, threshold)
    pulls = explore_counts + commit_counts
    compensation = pulls @ comp_unit
    counts = np.asarray(board.counts, dtype=np.float64)
    if exclude_own_shares:
        cost = (counts[None, :] - explore_counts) @ charge_unit
    else:
        cost = np.full(M, float(counts @ charge_unit))
    raw_regret = np.asarray(raw_regret, dtype=np.float64)
    relative = raw_regret - compensation + cost - ucb_regret
    profit = float(cost.sum() - compensation.sum())
    return IncentiveOutcome(compensation, cost, raw_regret, float(ucb_regret), relative, profit)


@dataclass(frozen=True)
class IRReport:
    verdicts: np.ndarray
    horizon_condition_met: bool | None = None

    @property
    def all_rational(self) -> bool:
        return bool(self.verdicts.all())


def check_ir(outcome: IncentiveOutcome, ucb_regret: float, *, horizon: int | None = None,
             n_arms: int | None = None, min_gap: float | None = None) -> IRReport:
    """Per-agent verdict ``R_m - Com_m + Cost_m - R_UCB <= 0``.

    When ``horizon``, ``n_arms`` and ``min_gap`` are given the report also
    says whether the horizon is long enough for the guarantee to apply.
    """
    verdicts = outcome.adjusted_regret - ucb_regret <= 0
    cond = None
    if horizon is not None and n_arms is not None and min_gap is not None:
        cond = ir_horizon_condition(horizon, n_arms, min_gap)
    return IRReport(np.asarray(verdicts), cond)


def ir_horizon_condition(horizon: int, n_arms: int, min_gap: float) -> bool:
    """``T / ln^2 T > N / (4 gap_min^4)``."""
    if not math.isfinite(min_gap):
        return True
    L = math.log(horizon)
    return horizon / L ** 2 > n_arms / (4.0 * min_gap ** 4)


def bracket_horizon_condition(horizon: int, n_arms: int, min_gap: float, threshold: float) -> bool:
    """``(T - 2N) / ln T > 8 (1 + sqrt B)^2 N / gap_min^2``: all sub-optimal arms get eliminated."""
    if not math.isfinite(min_gap):
        return True
    L = math.log(horizon)
    return (horizon - 2 * n_arms) / L > 8.0 * (1.0 + math.sqrt(threshold)) ** 2 * n_arms / min_gap ** 2


def delta_bracket(count: float, horizon: int, threshold: float,
                  log_horizon: float | None = None) -> tuple[float, float]:
    """Interval that must contain the gap of an arm eliminated after ``count`` broadcasts."""
    if count <= 0:
        raise ValueError("bracket needs a positive broadcast count")
    L = _log_t(horizon, log_horizon)
    lower = math.sqrt(LOWER_COEF * L / count)
    upper = math.sqrt(8.0 * (1.0 + math.sqrt(threshold)) ** 2 * L / count)
    return lower, upper


def ucb_pull_floor(gap: float, horizon: int, log_horizon: float | None = None) -> int:
    """Least number of 2-UCB pulls of an arm with this gap on the baseline's good event."""
    if gap <= 0:
        raise ValueError("pull floor is defined for positive gaps only")
    L = _log_t(horizon, log_horizon)
    return math.ceil((SQRT_GAP / gap) ** 2 * L / 4.0)


def cost_ceiling(gaps, horizon: int, arms) -> float:
    """``sum_i (sqrt 2 - sqrt 3/2)^2 ln T / (4 gap_i)`` over ``arms``."""
    L = math.log(horizon)
    return float(sum(LOWER_COEF * L / (4.0 * gaps[i]) for i in arms))
