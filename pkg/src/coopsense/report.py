"""Summary statistics and the CSV/JSON artefacts written by the CLI."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from .simulator import MODEL_LABELS, SimulationResult

SLOT_COLUMNS = ("slot", "su", "rate_mbps", "n_channels_won", "bid", "wallet", "collisions",
                "missed_detections")
SCATTER_COLUMNS = ("slot", "su", "normalized_bid", "channels_won", "idle_count")
RATE_LABELS = ("Very High", "High", "Moderate", "Low", "Low")


def fmt(x: float) -> str:
    return f"{x:.12g}"


def box_stats(values) -> dict[str, float]:
    values = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    return {"min": float(values.min()), "q1": float(q1), "median": float(med),
            "mean": float(values.mean()), "q3": float(q3), "max": float(values.max())}


def bid_channel_spearman(result: SimulationResult, su: int, idle_count: int) -> float | None:
    """Rank correlation between an SU's bid and channels won, over slots with
    the given number of decided-idle channels. None when undefined."""
    rows = result.scatter(su=su, idle_count=idle_count)
    if len(rows) < 3:
        return None
    bids = [r[2] for r in rows]
    won = [r[3] for r in rows]
    if len(set(bids)) < 2 or len(set(won)) < 2:
        return None
    return float(spearmanr(bids, won).statistic)


def jain_index(x) -> float:
    x = np.asarray(x, dtype=float)
    denom = len(x) * float((x ** 2).sum())
    return float(x.sum() ** 2 / denom) if denom > 0 else 1.0


def summarize(result: SimulationResult, scatter_su: int | None = None,
              scatter_idle: int = 4) -> dict:
    rates = result.rates
    n = rates.shape[1]
    su = n - 1 if scatter_su is None else scatter_su
    cumulative = rates.sum(axis=0)
    return {
        "model": result.model,
        "n_slots": len(result.slots),
        "rate_box_stats": {f"su{i + 1}": box_stats(rates[:, i]) for i in range(n)},
        "cumulative_rate_mbps": {f"su{i + 1}": float(cumulative[i]) for i in range(n)},
        "cumulative_sum_rate_mbps": float(cumulative.sum()),
        "channels_won": {f"su{i + 1}": int(sum(s.channels_won[i] for s in result.slots))
                         for i in range(n)},
        "total_missed_detections": result.total_missed,
        "total_collisions": result.total_collisions,
        "jain_fairness": jain_index(cumulative),
        "bid_channel_spearman": {
            "su": su + 1,
            "idle_count": scatter_idle,
            "rho": bid_channel_spearman(result, su, scatter_idle),
        },
    }


def write_slots_csv(result: SimulationResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SLOT_COLUMNS)
        for s in result.slots:
            for i in range(len(s.rates)):
                w.writerow([s.slot, i + 1, fmt(s.rates[i]), int(s.channels_won[i]),
                            fmt(s.bids[i]), fmt(s.wallets[i]), int(s.collisions[i]),
                            int(s.missed_detections[i])])


def write_scatter_csv(result: SimulationResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCATTER_COLUMNS)
        for slot, su, bid, won, idle in result.scatter():
            w.writerow([slot, su + 1, fmt(bid), won, idle])


def write_json(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_slots_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_cumulative_csv(results: dict[str, SimulationResult], path: Path) -> None:
    """Cumulative per-SU and sum rates per slot for every model, long format."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        any_result = next(iter(results.values()))
        n = any_result.rates.shape[1]
        w.writerow(["slot", "model"] + [f"su{i + 1}" for i in range(n)] + ["sum"])
        for model, res in results.items():
            cum = res.cumulative
            for t, row in enumerate(cum):
                w.writerow([t, MODEL_LABELS[model]] + [fmt(x) for x in row] + [fmt(row.sum())])


def comparison_table(summaries: dict[str, dict]) -> dict:
    """Per-model metrics plus a qualitative achieved-rate grade by rank."""
    order = sorted(summaries, key=lambda m: -summaries[m]["cumulative_sum_rate_mbps"])
    table = {}
    for rank, model in enumerate(order):
        s = summaries[model]
        table[MODEL_LABELS[model]] = {
            "cumulative_sum_rate_mbps": s["cumulative_sum_rate_mbps"],
            "rate_rank": rank + 1,
            "achieved_rate": RATE_LABELS[min(rank, len(RATE_LABELS) - 1)],
            "jain_fairness": s["jain_fairness"],
            "bid_channel_spearman": s["bid_channel_spearman"]["rho"],
            "missed_detections": s["total_missed_detections"],
            "collisions": s["total_collisions"],
        }
    return table


def format_comparison(table: dict) -> str:
    head = f"{'Model':<8} {'Sum rate':>10} {'Rank':>4} {'Rate':>9} {'Jain':>6} {'rho':>7} {'Missed':>7} {'Coll.':>6}"
    lines = [head, "-" * len(head)]
    for model, row in table.items():
        rho = row["bid_channel_spearman"]
        rho_s = f"{rho:7.3f}" if rho is not None else "    n/a"
        lines.append(f"{model:<8} {row['cumulative_sum_rate_mbps']:10.1f} {row['rate_rank']:4d} "
                     f"{row['achieved_rate']:>9} {row['jain_fairness']:6.3f} {rho_s} "
                     f"{row['missed_detections']:7d} {row['collisions']:6d}")
    return "\n".join(lines)


def format_matrix(rows, row_labels, col_labels, title="") -> str:
    width = max(9, max(len(c) for c in col_labels) + 1)
    out = [f"{title:<8}" + "".join(f"{c:>{width}}" for c in col_labels)]
    for label, row in zip(row_labels, rows):
        cells = []
        for x in row:
            cells.append(f"{'-':>{width}}" if x is None else f"{x:>{width}.4f}")
        out.append(f"{label:<8}" + "".join(cells))
    return "\n".join(out)
