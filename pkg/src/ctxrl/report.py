"""Aggregation of test results into mean / std / best tables.

Conventions: the aggregate is over per-seed mean test returns; std is the
sample standard deviation across seeds (ddof=1); "best" is the best seed
mean.  Each row carries a Welch two-sided p-value against the experiment's
named baseline policy when both sides have at least two seeds.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import expand_cells
from .stats import welch_t_test

POLICY_LABELS = {
    "oracle": ("Oracle", "-"),
    "agnostic": ("Agnostic", "-"),
    "gt": ("GT", None),
    "fp": ("FP", None),
    "pl": ("PL", None),
}
ARCH_LABELS = {"ff_avg": "FF+AVG", "lstm": "LSTM", None: "-"}


class ReportError(RuntimeError):
    pass


def _fmt(x) -> str:
    return repr(float(x))


def read_test_results(path: Path) -> tuple[str, list[dict]]:
    """Returns (config_hash, rows) from one run's test results file."""
    rows = []
    cfg_hash = ""
    with open(path) as f:
        first = f.readline().strip()
        if first.startswith("# config_hash="):
            cfg_hash = first.split("=", 1)[1]
        reader = csv.DictReader(f)
        for r in reader:
            rows.append(
                {
                    "context_id": int(r["context_id"]),
                    "episode": int(r["episode"]),
                    "return": float(r["return"]),
                    "steps": int(r["steps"]),
                    "success": r["success"] == "1",
                    "failed": r["failed"] == "1",
                }
            )
    return cfg_hash, rows


def collect_seed_stats(runs_dir: Path, cell: str, seeds: list[int]):
    """Per-seed mean return and success rate; returns (stats, missing)."""
    per_seed = []
    missing = []
    for seed in seeds:
        path = runs_dir / cell / f"seed_{seed}" / "test_results.csv"
        if not path.exists():
            missing.append(seed)
            continue
        run_cfg = json.loads(
            (runs_dir / cell / f"seed_{seed}" / "config.json").read_text()
        )
        _, rows = read_test_results(path)
        if not rows:
            missing.append(seed)
            continue
        per_seed.append(
            {
                "seed": seed,
                "manifest_hash": run_cfg["manifest_hash"],
                "mean_return": float(np.mean([r["return"] for r in rows])),
                "success_rate": float(np.mean([r["success"] for r in rows])),
                "episodes": len(rows),
            }
        )
    return per_seed, missing


def build_report(experiment_dir, out_name: str = "report") -> Path:
    """One CSV row per policy cell; refuses runs from a different manifest."""
    experiment_dir = Path(experiment_dir)
    manifest = json.loads((experiment_dir / "manifest.json").read_text())
    from .config import config_hash

    mhash = config_hash(manifest)
    runs_dir = experiment_dir / "runs"
    seeds = list(manifest["seeds"])
    baseline = manifest["baseline_policy"]
    is_pushing = manifest["env"] == "pushing"

    cells = expand_cells(manifest)
    stats = {}
    gaps = {}
    for name, _ in cells:
        per_seed, missing = collect_seed_stats(runs_dir, name, seeds)
        for entry in per_seed:
            if entry["manifest_hash"] != mhash:
                raise ReportError(
                    f"{name}/seed_{entry['seed']}: run belongs to manifest "
                    f"{entry['manifest_hash'][:12]}, report is for {mhash[:12]}"
                )
        stats[name] = per_seed
        gaps[name] = missing

    baseline_means = [e["mean_return"] for e in stats.get(baseline, [])]

    header = [
        "policy", "estimator", "context_config", "mean", "std", "best",
        "n_seeds", "p_value_vs_baseline",
    ]
    if is_pushing:
        header += ["success_mean", "success_std", "success_best"]
    header += ["missing_seeds"]

    ctx_config = "+".join(manifest["context_dims"])
    lines = [f"# config_hash={mhash}", ",".join(header)]
    for name, spec in cells:
        per_seed = stats[name]
        means = [e["mean_return"] for e in per_seed]
        strategy = spec["strategy"]
        policy_label = POLICY_LABELS.get(
            strategy if strategy else spec["mode"], (name, None)
        )[0]
        est_label = ARCH_LABELS.get(spec["arch"], spec["arch"] or "-")
        row = [policy_label, est_label, ctx_config]
        if means:
            row.append(_fmt(np.mean(means)))
            row.append(_fmt(np.std(means, ddof=1)) if len(means) > 1 else "")
            row.append(_fmt(max(means)))
            row.append(str(len(means)))
            p = ""
            if name != baseline and len(means) >= 2 and len(baseline_means) >= 2:
                res = welch_t_test(means, baseline_means)
                p = "" if res.undefined else _fmt(res.p)
            row.append(p)
            if is_pushing:
                succ = [e["success_rate"] for e in per_seed]
                row.append(_fmt(np.mean(succ)))
                row.append(_fmt(np.std(succ, ddof=1)) if len(succ) > 1 else "")
                row.append(_fmt(max(succ)))
        else:
            row += [""] * (5 + (3 if is_pushing else 0))
        row.append(
            ";".join(str(s) for s in gaps[name]) if gaps[name] else ""
        )
        lines.append(",".join(row))

    out_csv = experiment_dir / f"{out_name}.csv"
    out_csv.write_text("\n".join(lines) + "\n")

    summary = [
        f"experiment: {manifest['name']}",
        f"config_hash: {mhash}",
        f"environment: {manifest['env']}",
        f"context_config: {ctx_config}",
        f"seeds: {seeds}",
        f"context_set_transitions_N: {manifest['n_context_transitions']}",
        "aggregation: mean and sample std (ddof=1) of per-seed mean test returns",
        "best: best per-seed mean (not best single episode)",
        f"baseline for p-values: {baseline} (Welch two-sided)",
    ]
    for name, missing in gaps.items():
        if missing:
            summary.append(f"WARNING: {name} missing seeds {missing}")
    (experiment_dir / f"{out_name}_summary.txt").write_text(
        "\n".join(summary) + "\n"
    )
    return out_csv


def export_trajectories(experiment_dir, cell: str, seed: int, results) -> None:
    """Per-episode step traces plus success-average / failure-centroid files."""
    experiment_dir = Path(experiment_dir)
    out_dir = experiment_dir / "trajectories" / cell / f"seed_{seed}"
    out_dir.mkdir(parents=True, exist_ok=True)
    success_paths = []
    failure_ends = []
    for r in results:
        if r.trace is None:
            continue
        path = out_dir / f"context_{r.context_id:04d}_ep_{r.episode}.csv"
        n_obs = len(r.trace[0]["observation"]) if r.trace else 0
        n_act = len(r.trace[0]["action"]) if r.trace else 0
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(
                ["step", "x", "y", "theta"]
                + [f"obs_{i}" for i in range(n_obs)]
                + [f"action_{i}" for i in range(n_act)]
                + ["reward", "terminated", "truncated", "failed"]
            )
            for row in r.trace:
                pose = row["pose"] or [np.nan, np.nan, np.nan]
                w.writerow(
                    [row["step"], _fmt(pose[0]), _fmt(pose[1]), _fmt(pose[2])]
                    + [_fmt(v) for v in row["observation"]]
                    + [_fmt(v) for v in row["action"]]
                    + [_fmt(row["reward"]), int(row["terminated"]),
                       int(row["truncated"]), int(row["failed"])]
                )
        if r.estimates is not None:
            est_path = out_dir / f"estimates_{r.context_id:04d}_ep_{r.episode}.csv"
            with open(est_path, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(
                    ["step"] + [f"c_hat_{i}" for i in range(len(r.estimates[0]))]
                )
                for i, est in enumerate(r.estimates):
                    w.writerow([i] + [_fmt(v) for v in est])
        poses = [row["pose"] for row in r.trace if row["pose"] is not None]
        if not poses:
            continue
        if r.success:
            success_paths.append(np.asarray(poses)[:, :2])
        else:
            failure_ends.append(poses[-1][:2])
    if success_paths:
        max_len = max(len(p) for p in success_paths)
        padded = np.full((len(success_paths), max_len, 2), np.nan)
        for i, p in enumerate(success_paths):
            padded[i, : len(p)] = p
            padded[i, len(p) :] = p[-1]
        avg = padded.mean(axis=0)
        with open(out_dir / "success_average.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["step", "x", "y"])
            for i, (x, y) in enumerate(avg):
                w.writerow([i, _fmt(x), _fmt(y)])
    if failure_ends:
        ends = np.asarray(failure_ends)
        centroid = ends.mean(axis=0)
        with open(out_dir / "failure_endpoints.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["kind", "x", "y"])
            for x, y in ends:
                w.writerow(["endpoint", _fmt(x), _fmt(y)])
            w.writerow(["centroid", _fmt(centroid[0]), _fmt(centroid[1])])
