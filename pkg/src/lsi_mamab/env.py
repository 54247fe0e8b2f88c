"""Arm reward models, reward sampling and problem-instance generators.

Arms and agents are zero-based throughout the package: the best arm of the
experiments is arm ``0`` and the first agent is agent ``0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

BERNOULLI = "bernoulli"
DETERMINISTIC = "deterministic"
UNIFORM = "uniform"
DIST_KINDS = (BERNOULLI, DETERMINISTIC, UNIFORM)

# Reward vectors used by the experiments.
DEFAULT_MEANS = (0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0)
CENTERED_MEANS = (0.95, 0.85, 0.75, 0.65, 0.55, 0.45, 0.35, 0.25, 0.15, 0.05)


class CoverageError(ValueError):
    """Raised when a generator cannot give every arm at least one sharer."""


@dataclass(frozen=True)
class ArmModel:
    """True reward distributions of the ``N`` arms.

    ``bounds`` is only used by the ``uniform`` kind, where arm ``i`` pays a
    uniform draw on ``bounds[i]`` and its mean is the interval midpoint.
    """

    means: tuple[float, ...]
    kind: str = BERNOULLI
    bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        means = tuple(float(m) for m in self.means)
        object.__setattr__(self, "means", means)
        if not means:
            raise ValueError("an arm model needs at least one arm")
        if self.kind not in DIST_KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}; expected one of {DIST_KINDS}")
        for mu in means:
            if not 0.0 <= mu <= 1.0:
                raise ValueError(f"arm mean {mu} outside [0, 1]")
        if self.kind == UNIFORM:
            if self.bounds is None or len(self.bounds) != len(means):
                raise ValueError("uniform arms need one (lo, hi) pair per arm")
            bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
            object.__setattr__(self, "bounds", bounds)
            for (lo, hi), mu in zip(bounds, means):
                if not 0.0 <= lo <= hi <= 1.0:
                    raise ValueError(f"bad uniform support [{lo}, {hi}]")
                if abs((lo + hi) / 2 - mu) > 1e-12:
                    raise ValueError(f"uniform support [{lo}, {hi}] does not have midpoint {mu}")

    @classmethod
    def bernoulli(cls, means: Iterable[float]) -> "ArmModel":
        return cls(tuple(means), BERNOULLI)

    @classmethod
    def deterministic(cls, means: Iterable[float]) -> "ArmModel":
        return cls(tuple(means), DETERMINISTIC)

    @classmethod
    def uniform(cls, bounds: Iterable[tuple[float, float]]) -> "ArmModel":
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        return cls(tuple((lo + hi) / 2 for lo, hi in bounds), UNIFORM, bounds)

    @property
    def n_arms(self) -> int:
        return len(self.means)

    @property
    def best_mean(self) -> float:
        return max(self.means)

    @property
    def gaps(self) -> tuple[float, ...]:
        best = self.best_mean
        return tuple(best - mu for mu in self.means)

    @property
    def min_gap(self) -> float:
        """Smallest strictly positive gap, or ``inf`` if every arm is optimal."""
        positive = [g for g in self.gaps if g > 0]
        return min(positive) if positive else float("inf")

    @property
    def optimal_arms(self) -> tuple[int, ...]:
        best = self.best_mean
        return tuple(i for i, mu in enumerate(self.means) if mu == best)


@dataclass(frozen=True)
class AgentProfile:
    agent_id: int
    shared_arms: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "shared_arms", frozenset(int(a) for a in self.shared_arms))


@dataclass(frozen=True)
class SharingStructure:
    """The non-sensitive arm set of every agent, in turn order."""

    profiles: tuple[AgentProfile, ...]

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        for k, p in enumerate(self.profiles):
            if p.agent_id != k:
                raise ValueError(f"profile {k} has agent_id {p.agent_id}; ids must be 0..M-1 in order")

    @classmethod
    def from_sets(cls, shared: Sequence[Iterable[int]]) -> "SharingStructure":
        return cls(tuple(AgentProfile(k, frozenset(arms)) for k, arms in enumerate(shared)))

    @property
    def n_agents(self) -> int:
        return len(self.profiles)

    def validate(self, n_arms: int) -> None:
        for p in self.profiles:
            bad = [a for a in p.shared_arms if not 0 <= a < n_arms]
            if bad:
                raise ValueError(f"agent {p.agent_id} shares unknown arms {sorted(bad)}")

    def share_sets(self, n_arms: int) -> list[list[int]]:
        """``S_i`` for every arm: the sorted agents willing to broadcast it."""
        sets: list[list[int]] = [[] for _ in range(n_arms)]
        for p in self.profiles:
            for a in p.shared_arms:
                sets[a].append(p.agent_id)
        return sets

    def share_counts(self, n_arms: int) -> list[int]:
        return [len(s) for s in self.share_sets(n_arms)]

    def covers(self, n_arms: int) -> bool:
        return all(self.share_counts(n_arms))


def sample_reward(model: ArmModel, arm: int, rng) -> float:
    """Draw one reward of ``arm``.

    ``rng`` is anything with a numpy-style ``random()`` method returning a
    uniform on ``[0, 1)``. Deterministic arms consume no randomness.
    """
    if not 0 <= arm < model.n_arms:
        raise IndexError(f"arm {arm} out of range for {model.n_arms} arms")
    if model.kind == DETERMINISTIC:
        return model.means[arm]
    u = rng.random()
    if model.kind == BERNOULLI:
        return 1.0 if u < model.means[arm] else 0.0
    lo, hi = model.bounds[arm]
    return lo + (hi - lo) * u


class UniformStream:
    """Block-buffered ``random()`` on top of a numpy generator.

    Yields exactly the same numbers as calling ``gen.random()`` repeatedly,
    at a fraction of the per-call cost.
    """

    def __init__(self, gen: np.random.Generator, block: int = 4096):
        self._gen = gen
        self._block = block
        self._buf: list[float] = []
        self._pos = 0

    def random(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def linear_means(n_arms: int, top: float = 0.9, bottom: float = 0.0) -> tuple[float, ...]:
    """Evenly spaced decreasing means; ``linear_means(10)`` is ``DEFAULT_MEANS``."""
    if n_arms == 1:
        return (top,)
    step = (top - bottom) / (n_arms - 1)
    return tuple(round(top - i * step, 12) for i in range(n_arms))


def _require_coverage(n_arms: int, n_agents: int) -> None:
    if n_arms < 1:
        raise ValueError("need at least one arm")
    if n_agents < n_arms:
        raise CoverageError(f"{n_agents} agents cannot cover {n_arms} arms with one shared arm each")


def make_balanced_instance(n_arms: int, n_agents: int) -> SharingStructure:
    """Agent ``k`` shares arm ``k mod N``; leftover agents land on the low arms."""
    _require_coverage(n_arms, n_agents)
    return SharingStructure.from_sets([{k % n_arms} for k in range(n_agents)])


def make_imbalanced_instance(n_arms: int, n_agents: int) -> SharingStructure:
    """Arms 0 and 1 get a single sharer each, the rest split the other agents.

    With two arms or fewer there is nothing left to split over, so surplus
    agents share nothing.
    """
    _require_coverage(n_arms, n_agents)
    sets: list[set[int]] = []
    for k in range(n_agents):
        if k < min(2, n_arms):
            sets.append({k})
        elif n_arms > 2:
            sets.append({2 + (k - 2) % (n_arms - 2)})
        else:
            sets.append(set())
    return SharingStructure.from_sets(sets)


def make_random_instance(n_arms: int, n_agents: int, rng: np.random.Generator) -> tuple[ArmModel, SharingStructure]:
    """Uniform random means and a random one-arm-per-agent sharing pattern.

    A random permutation first gives every arm its own distinct sharer; each
    remaining agent then picks an arm uniformly.
    """
    _require_coverage(n_arms, n_agents)
    means = rng.uniform(0.0, 1.0, size=n_arms)
    arm_of = np.empty(n_agents, dtype=np.int64)
    owners = rng.permutation(n_agents)
    arm_of[:] = rng.integers(0, n_arms, size=n_agents)
    arm_of[owners[:n_arms]] = np.arange(n_arms)
    sharing = SharingStructure.from_sets([{int(a)} for a in arm_of])
    return ArmModel.bernoulli(means.tolist()), sharing


def make_paired_instance(n_arms: int, n_agents: int) -> SharingStructure:
    """Every agent shares two neighbouring arms.

    Agent ``k`` (``m = k + 1`` in one-based numbering) shares arms
    ``(k + 1) % N`` and ``(k + 2) % N``.
    """
    if n_arms < 2:
        raise ValueError("paired sharing needs at least two arms")
    sets = [{(k + 1) % n_arms, (k + 2) % n_arms} for k in range(n_agents)]
    sharing = SharingStructure.from_sets(sets)
    if not sharing.covers(n_arms):
        raise CoverageError(f"{n_agents} agents sharing neighbouring pairs leave arms uncovered")
    return sharing
