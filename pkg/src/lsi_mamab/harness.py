"""Experiment presets, replication, CSV summaries and figures."""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .engine import ConfigError, RunConfig, RunResult, instance_rng, replicate, simulate
from .env import (CENTERED_MEANS, DEFAULT_MEANS, ArmModel, SharingStructure, linear_means,
                  make_balanced_instance, make_imbalanced_instance, make_paired_instance,
                  make_random_instance)

SETTINGS = ("balanced", "imbalanced", "random", "paired", "oracle")

SUMMARY_COLUMNS = (
    "preset", "M", "N", "T", "B", "seed_base", "reps",
    "overall_regret_mean", "overall_regret_se", "avg_individual_regret_mean",
    "max_raw_individual_regret_mean", "max_ir_adjusted_regret_mean", "ucb_regret_mean",
    "total_compensation_mean", "total_cost_mean", "controller_profit_mean", "shared_pairs_mean",
    "good_event_rate", "min_count_invariant_rate", "exploration_caps_rate", "theorem1_bound_value",
)

REPLICATION_COLUMNS = (
    "preset", "M", "N", "T", "B", "seed",
    "overall_regret", "avg_individual_regret", "max_raw_individual_regret", "max_ir_adjusted_regret",
    "ucb_regret", "total_compensation", "total_cost", "controller_profit", "shared_pairs",
    "good_event", "min_count_invariant", "exploration_caps", "optimal_arm_retained",
    "ir_all_agents", "theorem1_bound_value",
)

REGRET_SERIES = (
    "overall_regret_mean", "avg_individual_regret_mean", "max_raw_individual_regret_mean",
    "max_ir_adjusted_regret_mean", "ucb_regret_mean",
)

SERIES_LABELS = {
    "overall_regret_mean": "overall regret",
    "avg_individual_regret_mean": "average individual regret",
    "max_raw_individual_regret_mean": "max individual regret (no incentive)",
    "max_ir_adjusted_regret_mean": "max individual regret (with incentive)",
    "ucb_regret_mean": "2-UCB alone",
    "controller_profit_mean": "controller profit",
}


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    setting: str
    agents: tuple[int, ...]
    horizons: tuple[int, ...]
    means: tuple[float, ...] | None = DEFAULT_MEANS
    n_arms: int = 10
    threshold: float = 1.0
    replications: int = 100
    base_seed: int = 42
    deterministic: bool = False
    plot_x: str = "M"
    plot_y: tuple[str, ...] = REGRET_SERIES

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ConfigError(f"unknown setting {self.setting!r}; expected one of {SETTINGS}")
        if not self.agents or not self.horizons:
            raise ConfigError("preset grid must be nonempty")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.means is not None and len(self.means) != self.n_arms:
            raise ConfigError("means must have one entry per arm")

    def grid(self) -> list[tuple[int, int]]:
        return list(itertools.product(self.agents, self.horizons))

    def with_overrides(self, *, agents=None, arms=None, horizons=None, threshold=None,
                       setting=None, replications=None, seed=None) -> "ExperimentPreset":
        changes = {}
        if agents is not None:
            changes["agents"] = tuple(agents)
        if horizons is not None:
            changes["horizons"] = tuple(horizons)
        if threshold is not None:
            changes["threshold"] = float(threshold)
        if setting is not None:
            changes["setting"] = setting
            if setting == "random":
                changes["means"] = None
        if replications is not None:
            changes["replications"] = int(replications)
        if seed is not None:
            changes["base_seed"] = int(seed)
        if arms is not None and arms != self.n_arms:
            changes["n_arms"] = arms
            means = self.means if "means" not in changes else changes["means"]
            if means is not None:
                changes["means"] = linear_means(arms, means[0], means[-1])
        if changes.get("setting", self.setting) != "random" and changes.get("means", self.means) is None:
            changes["means"] = linear_means(changes.get("n_arms", self.n_arms))
        return replace(self, **changes)


PRESETS = {
    p.name: p for p in (
        ExperimentPreset("balanced_fig2a", "balanced", (10, 50, 100, 500, 1000), (100_000,)),
        ExperimentPreset("imbalanced_fig2b", "imbalanced", (10, 50, 100, 500, 1000), (100_000,)),
        ExperimentPreset("profit_fig3", "balanced", (100, 500, 1000, 2000, 5000), (100_000,),
                         plot_y=("controller_profit_mean",)),
        ExperimentPreset("regret_vs_T_appxI1", "paired", (20,),
                         (1_000, 3_000, 10_000, 30_000, 100_000), means=CENTERED_MEANS,
                         plot_x="T", plot_y=("avg_individual_regret_mean", "ucb_regret_mean")),
        ExperimentPreset("random_appxI2", "random", (10, 50, 100, 500, 1000), (100_000,), means=None),
        ExperimentPreset("oracle_deterministic", "oracle", (2,), (1_000,), means=(1.0, 0.5),
                         n_arms=2, replications=1, deterministic=True,
                         plot_y=("overall_regret_mean",)),
    )
}


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class GridPoint:
    """Picklable seed -> RunConfig factory for one grid point of a preset."""

    setting: str
    n_agents: int
    n_arms: int
    horizon: int
    threshold: float = 1.0
    means: tuple[float, ...] | None = None
    deterministic: bool = False
    exclude_own_shares: bool = False

    def __call__(self, seed: int) -> RunConfig:
        N, M = self.n_arms, self.n_agents
        if self.setting == "random":
            model, sharing = make_random_instance(N, M, instance_rng(seed))
        else:
            model = (ArmModel.deterministic if self.deterministic else ArmModel.bernoulli)(self.means)
            sharing = _sharing(self.setting, N, M)
        return RunConfig(model, sharing, self.horizon, self.threshold, seed,
                         exclude_own_shares=self.exclude_own_shares)


def _sharing(setting: str, n_arms: int, n_agents: int) -> SharingStructure:
    if setting in ("balanced", "oracle"):
        return make_balanced_instance(n_arms, n_agents)
    if setting == "imbalanced":
        return make_imbalanced_instance(n_arms, n_agents)
    if setting == "paired":
        return make_paired_instance(n_arms, n_agents)
    raise ConfigError(f"no fixed sharing pattern for setting {setting!r}")


def grid_points(preset: ExperimentPreset, exclude_own_shares: bool = False) -> list[GridPoint]:
    return [
        GridPoint(preset.setting, M, preset.n_arms, T, preset.threshold, preset.means,
                  preset.deterministic, exclude_own_shares)
        for M, T in preset.grid()
    ]


def run_grid_point(point: GridPoint, reps: int, seed_base: int, workers: int = 1,
                   trace_dir: Path | None = None) -> list[RunResult]:
    if trace_dir is None:
        return replicate(point, reps, seed_base, workers=workers)
    trace_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for k in range(reps):
        seed = seed_base + k
        path = trace_dir / f"M{point.n_agents}_T{point.horizon}_seed{seed}.jsonl"
        with open(path, "w") as fh:
            results.append(simulate(point(seed), trace=fh))
    return results


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".9g")


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values))


def _se(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def summarize(preset_name: str, point: GridPoint, results: list[RunResult], seed_base: int) -> dict:
    overall = [r.overall_regret for r in results]
    diags = [r.diagnostics for r in results]
    return {
        "preset": preset_name,
        "M": point.n_agents,
        "N": point.n_arms,
        "T": point.horizon,
        "B": point.threshold,
        "seed_base": seed_base,
        "reps": len(results),
        "overall_regret_mean": _mean(overall),
        "overall_regret_se": _se(overall),
        "avg_individual_regret_mean": _mean([r.avg_individual_regret for r in results]),
        "max_raw_individual_regret_mean": _mean([r.max_raw_individual_regret for r in results]),
        "max_ir_adjusted_regret_mean": _mean([r.max_adjusted_regret for r in results]),
        "ucb_regret_mean": _mean([r.ucb_regret for r in results]),
        "total_compensation_mean": _mean([r.incentive.compensation.sum() for r in results]),
        "total_cost_mean": _mean([r.incentive.cost.sum() for r in results]),
        "controller_profit_mean": _mean([r.incentive.controller_profit for r in results]),
        "shared_pairs_mean": _mean([r.shared_pairs_total for r in results]),
        "good_event_rate": _mean([d.good_event_held for d in diags]),
        "min_count_invariant_rate": _mean([d.min_count_invariant_held for d in diags]),
        "exploration_caps_rate": _mean([d.exploration_caps_held for d in diags]),
        "theorem1_bound_value": _mean([d.theorem1_bound_value for d in diags]),
    }


def replication_rows(preset_name: str, point: GridPoint, results: list[RunResult]) -> list[dict]:
    rows = []
    for r in results:
        d = r.diagnostics
        rows.append({
            "preset": preset_name, "M": r.n_agents, "N": r.n_arms, "T": r.horizon,
            "B": r.threshold, "seed": r.seed,
            "overall_regret": r.overall_regret,
            "avg_individual_regret": r.avg_individual_regret,
            "max_raw_individual_regret": r.max_raw_individual_regret,
            "max_ir_adjusted_regret": r.max_adjusted_regret,
            "ucb_regret": r.ucb_regret,
            "total_compensation": r.incentive.compensation.sum(),
            "total_cost": r.incentive.cost.sum(),
            "controller_profit": r.incentive.controller_profit,
            "shared_pairs": r.shared_pairs_total,
            "good_event": d.good_event_held,
            "min_count_invariant": d.min_count_invariant_held,
            "exploration_caps": d.exploration_caps_held,
            "optimal_arm_retained": d.optimal_arm_retained,
            "ir_all_agents": r.max_adjusted_regret <= r.ucb_regret,
            "theorem1_bound_value": d.theorem1_bound_value,
        })
    return rows


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row[c] if isinstance(row[c], str) else _fmt(row[c]) for c in columns])
    path.write_text(buf.getvalue())


def run_preset(preset: ExperimentPreset | str, output_dir: str | Path, *, workers: int = 1,
               trace: bool = False, exclude_own_shares: bool = False) -> Path:
    """Run every grid point of ``preset`` and write ``<name>.csv`` plus per-replication rows.

    Returns the path of the summary CSV (one row per grid point).
    """
    if isinstance(preset, str):
        preset = get_preset(preset)
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    summary, per_rep = [], []
    for point in grid_points(preset, exclude_own_shares):
        trace_dir = out / "traces" / preset.name if trace else None
        results = run_grid_point(point, preset.replications, preset.base_seed, workers, trace_dir)
        summary.append(summarize(preset.name, point, results, preset.base_seed))
        per_rep.extend(replication_rows(preset.name, point, results))
    summary_path = out / f"{preset.name}.csv"
    write_csv(summary_path, SUMMARY_COLUMNS, summary)
    write_csv(out / f"{preset.name}_replications.csv", REPLICATION_COLUMNS, per_rep)
    return summary_path


class PlotError(ValueError):
    pass


def render_plot(summary_csv: str | Path, x_column: str, y_columns: Sequence[str], output: str | Path,
                title: str | None = None, logx: bool | None = None) -> Path:
    """Line plot of ``y_columns`` against ``x_column`` from a summary CSV.

    A ``<name>_se`` column next to a ``<name>_mean`` series is drawn as a
    one-standard-error band. The file type follows the output suffix; SVG
    output is byte-stable for identical CSV input.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(summary_csv, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = list(reader.fieldnames or [])
        rows = list(reader)
    missing = [c for c in [x_column, *y_columns] if c not in columns]
    if missing:
        raise PlotError(f"missing column(s) {missing}; available: {columns}")
    if not rows:
        raise PlotError(f"{summary_csv} has no data rows")

    rows.sort(key=lambda r: float(r[x_column]))
    x = np.array([float(r[x_column]) for r in rows])
    single = len(rows) == 1
    if logx is None:
        logx = not single and x.min() > 0 and x.max() / x.min() >= 100

    matplotlib.rcParams["svg.hashsalt"] = "lsi-mamab"
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for col in y_columns:
        y = np.array([float(r[col]) for r in rows])
        baseline = col == "ucb_regret_mean"
        style = dict(color="black", linestyle="--") if baseline else {}
        if single:
            ax.plot(x, y, marker="o", linestyle="none", label=SERIES_LABELS.get(col, col), **{
                k: v for k, v in style.items() if k != "linestyle"})
        else:
            ax.plot(x, y, marker="o", markersize=3, label=SERIES_LABELS.get(col, col), **style)
        se_col = col[: -len("_mean")] + "_se" if col.endswith("_mean") else None
        if se_col in columns:
            se = np.array([float(r[se_col]) for r in rows])
            ax.fill_between(x, y - se, y + se, alpha=0.2)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(x_column)
    ax.set_ylabel("regret" if any("regret" in c for c in y_columns) else y_columns[0])
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    output = Path(output)
    fig.savefig(output, metadata={"Date": None} if output.suffix == ".svg" else None)
    plt.close(fig)
    return output


def plot_preset(preset: ExperimentPreset | str, summary_csv: str | Path, output: str | Path) -> Path:
    if isinstance(preset, str):
        preset = get_preset(preset)
    return render_plot(summary_csv, preset.plot_x, preset.plot_y, output, title=preset.name)


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment. Keys use underscores."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values
