"""One LSI-MAMAB run: turn loop, broadcasts, elimination, ledgers and diagnostics.

Two engines produce identical results:

* ``reference`` steps the protocol turn by turn through
  :func:`~lsi_mamab.policies.balanced_etc_decide`. It is the only engine that
  can write a per-pull trace.
* ``fast`` (default) runs a compiled event loop (see :mod:`lsi_mamab._kernel`)
  that jumps from one broadcast to the next, books the silent commit pulls in
  between as row slices, and finishes the run in one step once the board can
  no longer change.

Every run draws from independent child streams of ``SeedSequence(seed)``:
broadcast rewards, private samples of never-broadcast arms, trace-only
rewards of ordinary commit pulls, the 2-UCB baseline and, for random
settings, the instance itself. Skipping a draw on one stream never shifts
another.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from ._kernel import KIND_CODES, csr, run_kernel
from .board import PublicBoard
from .env import ArmModel, SharingStructure, UniformStream, sample_reward
from .incentive import IncentiveOutcome, settle
from .policies import EXPLORE, balanced_etc_decide, run_ucb_baseline

STREAMS = ("explore", "private", "cosmetic", "baseline", "instance")


class ConfigError(ValueError):
    pass


def stream_generators(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


def instance_rng(seed: int) -> np.random.Generator:
    """Generator reserved for drawing a random problem instance for ``seed``."""
    return stream_generators(seed)["instance"]


@dataclass(frozen=True)
class RunConfig:
    model: ArmModel
    sharing: SharingStructure
    horizon: int
    threshold: float = 1.0
    seed: int = 0
    diagnostics_enabled: bool = True
    exclude_own_shares: bool = False
    run_baseline: bool = True

    def validate(self) -> None:
        if self.horizon < 2:
            raise ConfigError("horizon must be at least 2")
        if not self.threshold >= 1:
            raise ConfigError("balance threshold must be >= 1")
        if self.sharing.n_agents < 1:
            raise ConfigError("need at least one agent")
        try:
            self.sharing.validate(self.model.n_arms)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def n_agents(self) -> int:
        return self.sharing.n_agents

    @property
    def n_arms(self) -> int:
        return self.model.n_arms


@dataclass
class Diagnostics:
    good_event_held: bool
    min_count_invariant_held: bool
    exploration_caps_held: bool
    optimal_arm_retained: bool
    theorem1_bound_value: float
    min_count_violations: int = 0


def exploration_cap(gap: float, horizon: int, threshold: float) -> int:
    """Most broadcasts a sub-optimal arm can collect on the good event."""
    return math.ceil(8.0 * (1.0 + math.sqrt(threshold)) ** 2 * math.log(horizon) / gap ** 2)


def theorem1_bound(model: ArmModel, n_agents: int, horizon: int, threshold: float) -> float:
    """Regret ceiling ``sum_i 8(1+sqrt B)^2 ln T / gap_i + 4e M N^2 / gap_min + 2 M N``.

    With several optimal arms ``gap_min`` is the smallest positive gap; with
    no positive gap the middle term vanishes.
    """
    L = math.log(horizon)
    N = model.n_arms
    explore = sum(8.0 * (1.0 + math.sqrt(threshold)) ** 2 * L / g for g in model.gaps if g > 0)
    dmin = model.min_gap
    commit = 4.0 * math.e * n_agents * N ** 2 / dmin if math.isfinite(dmin) else 0.0
    return explore + commit + 2.0 * n_agents * N


class _DiagnosticsTracker:
    """Online version of :func:`collect_diagnostics`."""

    def __init__(self, config: RunConfig, covered: frozenset[int]):
        self.means = config.model.means
        self.n_arms = config.model.n_arms
        self.eps_coef = 1.5 * math.log(config.horizon)
        self.covered = covered
        self.config = config
        self.good = True
        self.violations = 0

    def on_broadcast(self, arm: int, count: int, total: float) -> None:
        if self.good and abs(total / count - self.means[arm]) > math.sqrt(self.eps_coef / count):
            self.good = False

    def on_round_start(self, t: int, board: PublicBoard) -> None:
        active = board.active
        if len(active) > 1 and all(i in self.covered for i in active):
            if min(board.counts[i] for i in active) < t / self.n_arms - 1:
                self.violations += 1

    def finish(self, final_counts: Sequence[int], final_active: Iterable[int]) -> Diagnostics:
        return _finish_diagnostics(self.config, self.good, self.violations, final_counts, final_active)


def _finish_diagnostics(config: RunConfig, good: bool, violations: int,
                        final_counts: Sequence[int], final_active: Iterable[int]) -> Diagnostics:
    model = config.model
    caps_ok = all(
        final_counts[i] <= exploration_cap(g, config.horizon, config.threshold)
        for i, g in enumerate(model.gaps) if g > 0
    )
    active = set(final_active)
    return Diagnostics(
        good_event_held=good,
        min_count_invariant_held=violations == 0,
        exploration_caps_held=caps_ok,
        optimal_arm_retained=all(i in active for i in model.optimal_arms),
        theorem1_bound_value=theorem1_bound(model, config.n_agents, config.horizon, config.threshold),
        min_count_violations=violations,
    )


def collect_diagnostics(trace: Iterable[dict], model: ArmModel, config: RunConfig) -> Diagnostics:
    """Recompute the run diagnostics from a per-pull trace alone.

    Independent of the online tracker: it replays broadcasts from the trace
    records, so comparing the two cross-checks the engines.
    """
    config = replace(config, model=model)
    N = model.n_arms
    covered = {i for i, n in enumerate(config.sharing.share_counts(N)) if n}
    eps_coef = 1.5 * math.log(config.horizon)
    counts = [0] * N
    sums = [0.0] * N
    good = True
    violations = 0
    last = None
    for rec in trace:
        active = rec["active"]
        if rec["agent"] == 0 and len(active) > 1 and all(i in covered for i in active):
            if min(counts[i] for i in active) < rec["round"] / N - 1:
                violations += 1
        if rec["kind"] == EXPLORE:
            a = rec["arm"]
            counts[a] += 1
            sums[a] += rec["reward"]
            if abs(sums[a] / counts[a] - model.means[a]) > math.sqrt(eps_coef / counts[a]):
                good = False
        last = rec
    final_active = last["active"] if last is not None else range(N)
    return _finish_diagnostics(config, good, violations, counts, final_active)


@dataclass
class RunResult:
    seed: int
    n_agents: int
    n_arms: int
    horizon: int
    threshold: float
    overall_regret: float
    per_agent_regret: np.ndarray
    shared_pairs_total: int
    final_counts: tuple[int, ...]
    final_active: tuple[int, ...]
    eliminated_at: tuple[int | None, ...]
    eliminated_by: tuple[int | None, ...]
    explore_counts: np.ndarray
    commit_counts: np.ndarray
    incentive: IncentiveOutcome
    ucb_regret: float
    ucb_pulls: tuple[int, ...]
    diagnostics: Diagnostics | None = None
    gaps: tuple[float, ...] = field(default=(), repr=False)

    @property
    def avg_individual_regret(self) -> float:
        return self.overall_regret / self.n_agents

    @property
    def max_raw_individual_regret(self) -> float:
        return float(self.per_agent_regret.max())

    @property
    def max_adjusted_regret(self) -> float:
        return float(self.incentive.adjusted_regret.max())

    @property
    def eliminated_arms(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n_arms) if i not in self.final_active)

    def eliminated_arm_regret(self) -> np.ndarray:
        """Per-agent regret from pulls of arms eliminated by the end of the run."""
        mask = np.zeros(self.n_arms)
        for i in self.eliminated_arms:
            mask[i] = self.gaps[i]
        return (self.explore_counts + self.commit_counts) @ mask


@lru_cache(maxsize=4096)
def _baseline(model: ArmModel, horizon: int, seed: int) -> tuple[float, tuple[int, ...]]:
    gen = stream_generators(seed)["baseline"]
    regret, pulls = run_ucb_baseline(model, horizon, UniformStream(gen))
    return regret, tuple(pulls)


def baseline_for(config: RunConfig) -> tuple[float, tuple[int, ...]]:
    """2-UCB regret of one lone agent on the run's own baseline stream."""
    return _baseline(config.model, config.horizon, config.seed)


class _Run:
    """Mutable state shared by both engines."""

    def __init__(self, config: RunConfig):
        config.validate()
        self.config = config
        self.model = config.model
        self.M = config.n_agents
        self.N = config.n_arms
        self.T = config.horizon
        self.B = float(config.threshold)
        share_sets = config.sharing.share_sets(self.N)
        self.share_sets = share_sets
        self.covered = frozenset(i for i, s in enumerate(share_sets) if s)
        self.board = PublicBoard(self.N, self.T, covered=self.covered)
        gens = stream_generators(config.seed)
        self.explore_rng = UniformStream(gens["explore"])
        self.private_rng = UniformStream(gens["private"])
        self.cosmetic_rng = UniformStream(gens["cosmetic"])
        self.explore_counts = np.zeros((self.M, self.N), dtype=np.int64)
        self.commit_counts = np.zeros((self.M, self.N), dtype=np.int64)
        # per agent: arm -> (count, sum) of her own samples of never-broadcast arms
        self.private: list[dict[int, tuple[int, float]]] = [{} for _ in range(self.M)]
        self.eliminated_at: list[int | None] = [None] * self.N
        self.eliminated_by: list[int | None] = [None] * self.N
        self.diag = _DiagnosticsTracker(config, self.covered) if config.diagnostics_enabled else None

    def eliminate(self, t: int, agent: int) -> None:
        for i in self.board.run_elimination():
            self.eliminated_at[i] = t
            self.eliminated_by[i] = agent

    def broadcast(self, agent: int, arm: int) -> float:
        x = sample_reward(self.model, arm, self.explore_rng)
        board = self.board
        board.record_broadcast(arm, x)
        self.explore_counts[agent, arm] += 1
        if self.diag is not None:
            self.diag.on_broadcast(arm, board.counts[arm], board.sums[arm])
        return x

    def private_pull(self, agent: int, arm: int) -> float:
        x = sample_reward(self.model, arm, self.private_rng)
        n, s = self.private[agent].get(arm, (0, 0.0))
        self.private[agent][arm] = (n + 1, s + x)
        return x

    def result(self) -> RunResult:
        cfg = self.config
        gaps = np.asarray(self.model.gaps)
        pulls = self.explore_counts + self.commit_counts
        per_agent = pulls @ gaps
        if cfg.run_baseline:
            ucb_regret, ucb_pulls = baseline_for(cfg)
        else:
            ucb_regret, ucb_pulls = math.nan, ()
        incentive = settle(self.explore_counts, self.commit_counts, per_agent, self.board,
                           self.B, ucb_regret, exclude_own_shares=cfg.exclude_own_shares)
        board = self.board
        diagnostics = self.diag.finish(board.counts, board.active) if self.diag is not None else None
        return RunResult(
            seed=cfg.seed, n_agents=self.M, n_arms=self.N, horizon=self.T, threshold=self.B,
            overall_regret=float(per_agent.sum()),
            per_agent_regret=per_agent,
            shared_pairs_total=int(sum(board.counts)),
            final_counts=tuple(board.counts),
            final_active=tuple(board.active),
            eliminated_at=tuple(self.eliminated_at),
            eliminated_by=tuple(self.eliminated_by),
            explore_counts=self.explore_counts,
            commit_counts=self.commit_counts,
            incentive=incentive,
            ucb_regret=ucb_regret,
            ucb_pulls=ucb_pulls,
            diagnostics=diagnostics,
            gaps=tuple(self.model.gaps),
        )


def _simulate_reference(config: RunConfig, trace: TextIO | None = None) -> RunResult:
    run = _Run(config)
    board, diag = run.board, run.diag
    profiles = config.sharing.profiles
    for t in range(1, run.T + 1):
        for m in range(run.M):
            run.eliminate(t, m)
            if m == 0 and diag is not None:
                diag.on_round_start(t, board)
            active = list(board.active) if trace is not None else None
            decision = balanced_etc_decide(board, profiles[m], run.B, run.private[m])
            a = decision.arm
            if decision.kind == EXPLORE:
                x = run.broadcast(m, a)
            else:
                run.commit_counts[m, a] += 1
                if board.counts[a] == 0:
                    x = run.private_pull(m, a)
                elif trace is not None:
                    x = sample_reward(run.model, a, run.cosmetic_rng)
            if trace is not None:
                rec = {"round": t, "agent": m, "arm": a, "kind": decision.kind, "reward": x,
                       "counts": list(board.counts), "active": active}
                trace.write(json.dumps(rec) + "\n")
    return run.result()


def _simulate_fast(config: RunConfig) -> RunResult:
    run = _Run(config)
    model, N = run.model, run.N
    means = np.asarray(model.means, dtype=np.float64)
    if model.bounds is not None:
        lo, hi = (np.asarray(b, dtype=np.float64) for b in zip(*model.bounds))
    else:
        lo = hi = means
    agent_ptr, agent_arms = csr([p.shared_arms for p in config.sharing.profiles], run.M)
    arm_ptr, arm_agents = csr(run.share_sets, N)
    covered = np.array([i in run.covered for i in range(N)])
    counts = np.zeros(N, dtype=np.int64)
    sums = np.zeros(N, dtype=np.float64)
    active = np.ones(N, dtype=np.bool_)
    priv_n = np.zeros((run.M, N), dtype=np.int64)
    priv_s = np.zeros((run.M, N), dtype=np.float64)
    elim_at = np.full(N, -1, dtype=np.int64)
    elim_by = np.full(N, -1, dtype=np.int64)
    diag_out = np.zeros(2, dtype=np.int64)
    gens = stream_generators(config.seed)
    diag = run.diag
    run_kernel(run.T, run.B, run.board._two_log, diag.eps_coef if diag is not None else 0.0,
               KIND_CODES[model.kind], means, lo, hi, agent_ptr, agent_arms, arm_ptr, arm_agents,
               covered, gens["explore"], gens["private"], diag is not None,
               counts, sums, active, run.explore_counts, run.commit_counts, priv_n, priv_s,
               elim_at, elim_by, diag_out)
    run.board = PublicBoard.from_stats(counts, sums, run.T, active=np.flatnonzero(active).tolist(),
                                       covered=run.covered)
    run.eliminated_at = [int(v) if v >= 0 else None for v in elim_at]
    run.eliminated_by = [int(v) if v >= 0 else None for v in elim_by]
    if diag is not None:
        diag.good = bool(diag_out[0])
        diag.violations = int(diag_out[1])
    return run.result()


def simulate(config: RunConfig, engine: str = "fast", trace: TextIO | None = None) -> RunResult:
    """Run one seeded simulation. A ``trace`` stream forces the reference engine."""
    if trace is not None or engine == "reference":
        return _simulate_reference(config, trace)
    if engine != "fast":
        raise ConfigError(f"unknown engine {engine!r}")
    return _simulate_fast(config)


def _run_seeded(args) -> RunResult:
    template, seed, engine = args
    config = template(seed) if callable(template) else replace(template, seed=seed)
    return simulate(config, engine=engine)


def replicate(template: RunConfig | Callable[[int], RunConfig], n_reps: int, seed_base: int,
              workers: int = 1, engine: str = "fast") -> list[RunResult]:
    """``n_reps`` independent runs with seeds ``seed_base + k``, in seed order.

    ``template`` is either a config (its seed is replaced) or a picklable
    callable building the config for a seed, for settings whose instance is
    itself random.
    """
    if n_reps < 1:
        raise ConfigError("n_reps must be >= 1")
    jobs = [(template, seed_base + k, engine) for k in range(n_reps)]
    if workers <= 1:
        return [_run_seeded(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_seeded, jobs, chunksize=max(1, n_reps // (4 * workers))))
