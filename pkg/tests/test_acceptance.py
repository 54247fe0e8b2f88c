"""Desk-scale acceptance criteria.

Each test records a single PASS/FAIL line with the measured value and its
threshold; the lines are repeated in the pytest terminal summary. Runs are
shared between criteria through a module-level cache, so the whole file
costs roughly one pass over 100 replications of every grid point used.
"""
import math
import time

import numpy as np
import pytest

from lsi_mamab.engine import RunConfig, exploration_cap, replicate, simulate
from lsi_mamab.env import ArmModel, make_balanced_instance
from lsi_mamab.harness import PRESETS, get_preset, grid_points, run_preset
from lsi_mamab.incentive import LOWER_COEF, delta_bracket

pytestmark = pytest.mark.acceptance

REPS = 100
SEED_BASE = 42
T = 100_000
M_GRID = (10, 100, 1000)
PROFIT_GRID = (100, 1000, 5000)

_cache: dict = {}


def runs(preset: str, M: int, horizon: int = T):
    key = (preset, M, horizon)
    if key not in _cache:
        (point,) = grid_points(get_preset(preset).with_overrides(agents=[M], horizons=[horizon]))
        _cache[key] = replicate(point, REPS, SEED_BASE)
    return _cache[key]


def trend_runs():
    return {(s, M): runs(s, M) for s in ("balanced_fig2a", "imbalanced_fig2b") for M in M_GRID}


def test_criterion_01_deterministic_oracle(criterion):
    cfg = RunConfig(ArmModel.deterministic([1.0, 0.5]), make_balanced_instance(2, 2), 1000, 1.0)
    start = time.perf_counter()
    r = simulate(cfg, engine="reference")
    elapsed = time.perf_counter() - start
    L = math.log(1000)
    com = 221 * math.sqrt(32 * L / 221)
    cost = 221 * math.sqrt(LOWER_COEF ** 2 * L / (512 * 221))
    checks = {
        "eliminated at round 222 by the second agent": r.eliminated_at[1] == 222 and r.eliminated_by[1] == 1,
        "N_2(T) = 221": r.final_counts[1] == 221,
        "R(T) = 110.5": r.overall_regret == 110.5,
        "shared pairs = 443": r.shared_pairs_total == 443,
        "Com_2 within 1e-6 rel": abs(r.incentive.compensation[1] / com - 1) <= 1e-6,
        "Cost_m within 1e-6 rel": bool(np.all(np.abs(r.incentive.cost / cost - 1) <= 1e-6)),
        "runtime < 1 s": elapsed < 1.0,
    }
    failed = [k for k, ok in checks.items() if not ok]
    ok = criterion(1, not failed, f"oracle R={r.overall_regret}, N_2={r.final_counts[1]}, "
                                  f"pairs={r.shared_pairs_total}, Com_2={r.incentive.compensation[1]:.6f}, "
                                  f"Cost={r.incentive.cost[0]:.6g}, {elapsed * 1000:.0f} ms; failed: {failed}")
    assert ok


def test_criterion_02_min_count_invariant(criterion):
    pools = dict(trend_runs())
    for M in PROFIT_GRID:
        pools[("profit_fig3", M)] = runs("profit_fig3", M)
    pools[("regret_vs_T_appxI1", 20)] = runs("regret_vs_T_appxI1", 20)
    for M in M_GRID:
        pools[("random_appxI2", M)] = runs("random_appxI2", M)
    total = sum(len(v) for v in pools.values())
    violations = sum(r.diagnostics.min_count_violations for v in pools.values() for r in v)
    bad_runs = sum(not r.diagnostics.min_count_invariant_held for v in pools.values() for r in v)
    ok = criterion(2, violations == 0,
                   f"{violations} round-start violations in {bad_runs}/{total} fully covered runs "
                   f"({len(pools)} grid points; allowed 0)")
    assert ok


def test_criterion_03_good_event_and_caps(criterion):
    rs = runs("balanced_fig2a", 100)
    N = rs[0].n_arms
    rate = np.mean([r.diagnostics.good_event_held for r in rs])
    floor = 1 - 2 * N / T - 0.05
    broken = 0
    for r in rs:
        if not r.diagnostics.good_event_held:
            continue
        for i, g in enumerate(r.gaps):
            if g > 0 and r.final_counts[i] > exploration_cap(g, T, r.threshold):
                broken += 1
    ok = criterion(3, rate >= floor and broken == 0,
                   f"good-event rate {rate:.2f} (need >= {floor:.4f}); cap violations on good runs {broken} (allowed 0)")
    assert ok


def test_criterion_04_regret_trends(criterion):
    runs_by = trend_runs()
    details, ok_all = [], True
    for setting in ("balanced_fig2a", "imbalanced_fig2b"):
        avg = [np.mean([r.avg_individual_regret for r in runs_by[(setting, M)]]) for M in M_GRID]
        overall = [np.mean([r.overall_regret for r in runs_by[(setting, M)]]) for M in M_GRID]
        decreasing = all(a > b for a, b in zip(avg, avg[1:]))
        flat = overall[-1] < 2 * overall[0]
        ok_all &= decreasing and flat
        details.append(f"{setting}: avg {[round(float(a), 2) for a in avg]} strictly decreasing={decreasing}, "
                       f"overall M=1000 {overall[-1]:.1f} < 2x{overall[0]:.1f}={flat}")
    ok = criterion(4, ok_all, "; ".join(details))
    assert ok


def test_criterion_05_individual_rationality(criterion):
    rates = {}
    for (setting, M), rs in trend_runs().items():
        rates[f"{setting[:-6]} M={M}"] = np.mean([r.max_adjusted_regret <= r.ucb_regret for r in rs])
    worst = min(rates.values())
    ok = criterion(5, worst >= 0.95, f"IR share per grid point {({k: round(float(v), 2) for k, v in rates.items()})}; "
                                     f"min {worst:.2f} (need >= 0.95)")
    assert ok


def test_criterion_06_delta_bracket(criterion):
    checked = violations = 0
    for rs in trend_runs().values():
        for r in rs:
            if not r.diagnostics.good_event_held or len(r.final_active) != 1:
                continue
            checked += 1
            for i in r.eliminated_arms:
                lo, hi = delta_bracket(r.final_counts[i], r.horizon, r.threshold)
                violations += not lo <= r.gaps[i] <= hi
    ok = criterion(6, violations == 0 and checked > 0,
                   f"{violations} bracket violations over {checked} resolved good-event runs (allowed 0)")
    assert ok


def test_criterion_07_regret_bound(criterion):
    worst, over = math.inf, []
    for (setting, M), rs in trend_runs().items():
        mean = np.mean([r.overall_regret for r in rs])
        bound = rs[0].diagnostics.theorem1_bound_value
        worst = min(worst, bound / mean)
        if mean > bound:
            over.append((setting, M))
    ok = criterion(7, not over, f"mean overall regret below the bound at all 6 points "
                                f"(tightest bound/mean ratio {worst:.1f}); exceeded at {over}")
    assert ok


def test_criterion_08_profit_trend(criterion):
    profit = [np.mean([r.incentive.controller_profit for r in runs("profit_fig3", M)]) for M in PROFIT_GRID]
    increasing = all(a < b for a, b in zip(profit, profit[1:]))
    ok = criterion(8, increasing and profit[0] < profit[-1],
                   f"mean profit at M={list(PROFIT_GRID)}: {[round(float(p), 1) for p in profit]} "
                   f"(need strictly increasing)")
    assert ok


def test_criterion_09_paired_vs_ucb(criterion):
    rs = runs("regret_vs_T_appxI1", 20)
    assert rs[0].n_agents == 20 and rs[0].horizon == T
    avg = np.mean([r.avg_individual_regret for r in rs])
    ucb = np.mean([r.ucb_regret for r in rs])
    ok = criterion(9, avg < 0.5 * ucb, f"mean average individual regret {avg:.1f} < 0.5 x 2-UCB {ucb:.1f} = {0.5 * ucb:.1f}")
    assert ok


def test_criterion_10_byte_identical_csv(tmp_path, criterion):
    differing = []
    for name in sorted(PRESETS):
        preset = get_preset(name).with_overrides(replications=2)
        files = []
        for tag in ("a", "b"):
            out = tmp_path / f"{name}_{tag}"
            summary = run_preset(preset, out)
            files.append((summary.read_bytes(), (out / f"{name}_replications.csv").read_bytes()))
        if files[0] != files[1]:
            differing.append(name)
    ok = criterion(10, not differing, f"all {len(PRESETS)} presets (full grids, 2 reps) rerun byte-identically; "
                                      f"differing: {differing}")
    assert ok
