"""Independent reference implementations used as test oracles.

Written straight from the protocol description, without importing anything
from the package, so that agreement with the package is meaningful.
"""
from __future__ import annotations

import math

from mpmath import mp, mpf

mp.dps = 40


def deterministic_step_through(mu, shares, T, B=1):
    """Literal turn-by-turn run on deterministic rewards in high precision.

    ``shares[m]`` is agent m's set of shareable arms. Returns a dict with the
    final counts, explore/commit tables, per-agent regret and every
    elimination as ``(arm, round, agent)``.
    """
    mu = [mpf(x) for x in mu]
    N, M = len(mu), len(shares)
    L = mp.log(T)
    cnt = [0] * N
    tot = [mpf(0)] * N
    active = list(range(N))
    e = [[0] * N for _ in range(M)]
    c = [[0] * N for _ in range(M)]
    reg = [mpf(0)] * M
    elims = []
    best = max(mu)

    def rad(n):
        return mp.sqrt(2 * L / n) if n else mp.inf

    for t in range(1, T + 1):
        for m in range(M):
            if len(active) > 1:
                lcb = max((tot[j] / cnt[j] - rad(cnt[j])) if cnt[j] else -mp.inf for j in active)
                for i in list(active):
                    if cnt[i] and tot[i] / cnt[i] + rad(cnt[i]) <= lcb:
                        active.remove(i)
                        elims.append((i, t, m))
            inter = [i for i in active if i in shares[m]]
            go = False
            if len(active) > 1 and inter:
                num = min(cnt[i] for i in inter)
                den = min(cnt[j] for j in active)
                level = (1 if num == 0 else mp.inf) if den == 0 else mpf(num) / den
                go = level <= B
            if go:
                a = min(inter, key=lambda i: (cnt[i], i))
                cnt[a] += 1
                tot[a] += mu[a]
                e[m][a] += 1
            else:
                a = max(active, key=lambda i: (tot[i] / cnt[i] if cnt[i] else 1, -i))
                c[m][a] += 1
            reg[m] += best - mu[a]
    return {"counts": cnt, "active": active, "explore": e, "commit": c, "regret": reg,
            "eliminations": elims}


def ucb_step_through(mu, T):
    """Plain 2-UCB on deterministic rewards; returns (regret, pulls)."""
    mu = [mpf(x) for x in mu]
    L = mp.log(T)
    n = [0] * len(mu)
    s = [mpf(0)] * len(mu)
    reg = mpf(0)
    for _ in range(T):
        idx = [(s[i] / n[i] + mp.sqrt(2 * L / n[i])) if n[i] else mp.inf for i in range(len(mu))]
        a = max(range(len(mu)), key=lambda i: (idx[i], -i))
        n[a] += 1
        s[a] += mu[a]
        reg += max(mu) - mu[a]
    return reg, n


def single_agent_elimination(mu, T, draw):
    """One learner, round-robin over surviving arms, then commit to the best mean.

    ``draw(arm)`` returns the reward of an exploratory pull. Returns
    ``(regret, counts, survivors)``.
    """
    N = len(mu)
    L = math.log(T)
    cnt = [0] * N
    tot = [0.0] * N
    alive = set(range(N))
    regret = 0.0
    best = max(mu)
    for _ in range(T):
        seen = [i for i in alive if cnt[i]]
        if len(alive) > 1 and seen:
            lo = max(tot[i] / cnt[i] - math.sqrt(2 * L / cnt[i]) for i in seen)
            alive = {i for i in alive if not cnt[i] or tot[i] / cnt[i] + math.sqrt(2 * L / cnt[i]) > lo}
        order = sorted(alive)
        if len(order) > 1:
            a = min(order, key=lambda i: (cnt[i], i))
            cnt[a] += 1
            tot[a] += draw(a)
        else:
            a = order[0]
        regret += best - mu[a]
    return regret, cnt, sorted(alive)
