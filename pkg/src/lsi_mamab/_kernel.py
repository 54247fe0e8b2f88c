"""Compiled event loop behind the ``fast`` engine.

Commit steps never touch the public board, so the loop jumps from one
broadcast to the next and books the silent commit pulls in between as row
slices. It stops early once one arm is left or a whole round passes with no
broadcast and no private draw, since every later round then repeats it.

Rewards come straight from the numpy generators, so they are the same draws,
in the same order, as in the turn-by-turn reference engine.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

KIND_CODES = {"bernoulli": 0, "deterministic": 1, "uniform": 2}


@njit(cache=True)
def _draw(gen, kind, mean, lo, hi):
    if kind == 1:
        return mean
    u = gen.random()
    if kind == 0:
        return 1.0 if u < mean else 0.0
    return lo + (hi - lo) * u


@njit(cache=True)
def run_kernel(T, B, two_log, eps_coef, kind, means, lo, hi,
               agent_ptr, agent_arms, arm_ptr, arm_agents, covered,
               explore_gen, private_gen, diagnostics,
               counts, sums, active, explore, commit, priv_n, priv_s,
               elim_at, elim_by, diag_out):
    """Run the whole game in place; ``diag_out`` receives (good_event, violations)."""
    M = explore.shape[0]
    N = counts.shape[0]
    lower = np.full(N, -np.inf)
    upper = np.full(N, np.inf)
    seg_arm = np.empty(M, np.int64)
    seg_lo = np.empty(M, np.int64)
    seg_hi = np.empty(M, np.int64)
    good = True
    violations = 0
    dirty = False
    t = 1
    while t <= T:
        p = 0
        broadcasts = 0
        private_draws = 0
        nseg = 0
        finished = False
        while p < M:
            if dirty:
                dirty = False
                nact = 0
                best_lower = -np.inf
                for j in range(N):
                    if active[j]:
                        nact += 1
                        if lower[j] > best_lower:
                            best_lower = lower[j]
                if nact >= 2 and best_lower != -np.inf:
                    for i in range(N):
                        if active[i] and upper[i] <= best_lower:
                            active[i] = False
                            elim_at[i] = t
                            elim_by[i] = p
            nact = 0
            last = -1
            den = -1
            all_pos = True
            all_covered = True
            min_active = -1
            for i in range(N):
                if active[i]:
                    nact += 1
                    last = i
                    n = counts[i]
                    if n == 0:
                        all_pos = False
                    if min_active < 0 or n < min_active:
                        min_active = n
                    if covered[i]:
                        if den < 0 or n < den:
                            den = n
                    else:
                        all_covered = False
            if p == 0 and diagnostics:
                if nact > 1 and all_covered and min_active < t / N - 1:
                    violations += 1
            if nact == 1:
                for m in range(p, M):
                    commit[m, last] += 1
                for m in range(M):
                    commit[m, last] += T - t
                finished = True
                break
            if den < 0:
                den = 0

            # next agent, from p on, whose balance level allows an explore step
            q = M
            for k in range(agent_ptr[p], agent_ptr[p + 1]):
                i = agent_arms[k]
                if active[i]:
                    n = counts[i]
                    if (n == 0) if den == 0 else (n / den <= B):
                        q = p
                        break
            if q != p:
                for i in range(N):
                    if not active[i] or arm_ptr[i] == arm_ptr[i + 1]:
                        continue
                    n = counts[i]
                    if not ((n == 0) if den == 0 else (n / den <= B)):
                        continue
                    k = np.searchsorted(arm_agents[arm_ptr[i]:arm_ptr[i + 1]], p)
                    if arm_ptr[i] + k < arm_ptr[i + 1]:
                        s = arm_agents[arm_ptr[i] + k]
                        if s < q:
                            q = s
            if q > p:
                if all_pos:
                    best = -1
                    best_val = -np.inf
                    for i in range(N):
                        if active[i]:
                            v = sums[i] / counts[i]
                            if v > best_val:
                                best = i
                                best_val = v
                    for m in range(p, q):
                        commit[m, best] += 1
                    seg_arm[nseg] = best
                    seg_lo[nseg] = p
                    seg_hi[nseg] = q
                    nseg += 1
                else:
                    for m in range(p, q):
                        a = -1
                        best_val = -np.inf
                        for i in range(N):
                            if not active[i]:
                                continue
                            n = counts[i]
                            if n:
                                v = sums[i] / n
                            elif priv_n[m, i]:
                                v = priv_s[m, i] / priv_n[m, i]
                            else:
                                v = 1.0
                            if v > best_val:
                                a = i
                                best_val = v
                        commit[m, a] += 1
                        if counts[a] == 0:
                            x = _draw(private_gen, kind, means[a], lo[a], hi[a])
                            priv_n[m, a] += 1
                            priv_s[m, a] += x
                            private_draws += 1
                        else:
                            seg_arm[nseg] = a
                            seg_lo[nseg] = m
                            seg_hi[nseg] = m + 1
                            nseg += 1
            if q == M:
                break
            arm = -1
            for k in range(agent_ptr[q], agent_ptr[q + 1]):
                i = agent_arms[k]
                if active[i] and (arm < 0 or counts[i] < counts[arm]):
                    arm = i
            x = _draw(explore_gen, kind, means[arm], lo[arm], hi[arm])
            counts[arm] += 1
            sums[arm] += x
            n = counts[arm]
            mean = sums[arm] / n
            rad = math.sqrt(two_log / n)
            lower[arm] = mean - rad
            upper[arm] = mean + rad
            explore[q, arm] += 1
            if diagnostics and good and abs(mean - means[arm]) > math.sqrt(eps_coef / n):
                good = False
            broadcasts += 1
            dirty = True
            p = q + 1
        if finished:
            break
        if broadcasts == 0 and private_draws == 0:
            # board and private views are frozen: later rounds repeat this one
            for s in range(nseg):
                for m in range(seg_lo[s], seg_hi[s]):
                    commit[m, seg_arm[s]] += T - t
            break
        t += 1
    diag_out[0] = 1 if good else 0
    diag_out[1] = violations


def csr(groups, size):
    """Flatten sorted index groups into (ptr, values) arrays."""
    ptr = np.zeros(size + 1, np.int64)
    for k, g in enumerate(groups):
        ptr[k + 1] = ptr[k] + len(g)
    values = np.array([v for g in groups for v in sorted(g)], dtype=np.int64)
    return ptr, values
