"""Figure rendering for the report path.

Reads the delimited tables an experiment wrote and renders matplotlib
figures next to them under ``figures/``.  Population panels show the raw
and mitigated curves against the noiseless dashed reference; fidelity and
spin/charge panels follow the same step axis.  Everything draws on the Agg
backend so rendering works headless.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiment import read_population_csv

_STAGE_COLORS = {
    "raw": "tab:red",
    "ptm_model": "tab:brown",
    "pec": "tab:orange",
    "mle": "tab:green",
    "ps": "tab:blue",
    "pec_unnormalized": "tab:gray",
}

plt.rcParams.update(
    {
        "figure.dpi": 120,
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "legend.fontsize": 8,
        "svg.hashsalt": "fermipec",
    }
)


def _series(stage_table: dict[int, dict[str, tuple[float, float, float]]], label: str):
    steps = sorted(stage_table)
    values = np.array([stage_table[s][label][0] for s in steps])
    lo = np.array([stage_table[s][label][1] for s in steps])
    hi = np.array([stage_table[s][label][2] for s in steps])
    return np.array(steps), values, lo, hi


def populations_figure(
    ideal: dict, measured: dict, stages: list[str], path: Path, title: str
) -> None:
    labels = sorted(next(iter(ideal.values())).keys())
    fig, axes = plt.subplots(
        1, len(stages), figsize=(4.2 * len(stages), 3.2), sharey=True, squeeze=False
    )
    cmap = plt.get_cmap("tab10")
    for column, stage in enumerate(stages):
        ax = axes[0][column]
        for i, label in enumerate(labels):
            steps, values, lo, hi = _series(measured[stage], label)
            color = cmap(i % 10)
            ax.errorbar(
                steps, values, yerr=[lo, hi], fmt="o-", ms=3, lw=1,
                color=color, label=f"|{label}>",
            )
            ideal_steps, ideal_values, _, _ = _series(ideal, label)
            ax.plot(ideal_steps, ideal_values, "--", lw=1, color=color, alpha=0.6)
        ax.set_xlabel("Trotter step")
        ax.set_title(stage)
    axes[0][0].set_ylabel("population")
    axes[0][0].legend(ncol=2)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def fidelity_figure(fidelity_rows: list[dict], path: Path, title: str) -> None:
    stages: dict[str, dict[int, tuple[float, float, float]]] = {}
    for row in fidelity_rows:
        stages.setdefault(row["stage"], {})[int(row["step"])] = (
            float(row["value"]),
            float(row["err_lo"]),
            float(row["err_hi"]),
        )
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for stage, table in sorted(stages.items()):
        steps = sorted(table)
        values = [table[s][0] for s in steps]
        lo = [table[s][1] for s in steps]
        hi = [table[s][2] for s in steps]
        ax.errorbar(
            steps, values, yerr=[lo, hi], fmt="o-", ms=3, lw=1,
            color=_STAGE_COLORS.get(stage), label=stage,
        )
    ax.axhline(1.0, color="k", lw=0.6, alpha=0.5)
    ax.set_xlabel("Trotter step")
    ax.set_ylabel("population fidelity")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def spin_charge_figure(rows: list[dict], path: Path, title: str) -> None:
    sites = sorted({int(r["site"]) for r in rows})
    stages = sorted({r["stage"] for r in rows})
    fig, axes = plt.subplots(1, len(sites), figsize=(4.4 * len(sites), 3.2), squeeze=False)
    for column, site in enumerate(sites):
        ax = axes[0][column]
        for stage in stages:
            table = {
                int(r["step"]): (float(r["spin"]), float(r["charge"]))
                for r in rows
                if int(r["site"]) == site and r["stage"] == stage
            }
            steps = sorted(table)
            style = "--" if stage == "ideal" else "o-"
            ax.plot(steps, [table[s][0] for s in steps], style, ms=3, lw=1, label=f"{stage} spin")
            ax.plot(steps, [table[s][1] for s in steps], style, ms=3, lw=1, label=f"{stage} charge")
        ax.set_xlabel("Trotter step")
        ax.set_title(f"site {site + 1}")
    axes[0][0].set_ylabel("occupation")
    axes[0][0].legend(fontsize=7)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def quasiprob_figure(decomposition: dict, path: Path) -> None:
    from .pauli import all_labels

    labels = list(all_labels(2))
    coefficients = decomposition["coefficients"]
    fig, ax = plt.subplots(figsize=(5.4, 3.0))
    colors = ["tab:blue" if c >= 0 else "tab:red" for c in coefficients]
    ax.bar(range(16), coefficients, color=colors)
    ax.set_xticks(range(16))
    ax.set_xticklabels(labels, rotation=60, fontsize=7)
    ax.set_ylabel("quasi-probability")
    ax.set_title(f"{decomposition['gate_id']}  cost={decomposition['cost']:.4f}")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def render_all(out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    figures = out_dir / "figures"
    figures.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    name = "experiment"
    config_path = out_dir / "config.json"
    if config_path.exists():
        name = json.loads(config_path.read_text(encoding="utf-8")).get("name", name)

    ideal = read_population_csv(out_dir / "populations_ideal.csv")["ideal"]
    raw = read_population_csv(out_dir / "populations_raw.csv")
    mitigated = read_population_csv(out_dir / "populations_mitigated.csv")

    path = figures / "populations_raw.png"
    populations_figure(ideal, raw, [s for s in ("raw", "ptm_model") if s in raw], path, name)
    written.append(path)
    path = figures / "populations_mitigated.png"
    populations_figure(ideal, mitigated, list(mitigated.keys()), path, name)
    written.append(path)

    with (out_dir / "fidelity.csv").open(newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    path = figures / "fidelity.png"
    fidelity_figure(rows, path, name)
    written.append(path)

    spin_path = out_dir / "spin_charge.csv"
    if spin_path.exists():
        with spin_path.open(newline="", encoding="utf-8") as handle:
            rows = list(csv.DictReader(handle))
        path = figures / "spin_charge.png"
        spin_charge_figure(rows, path, name)
        written.append(path)

    for decomposition_path in sorted(out_dir.glob("decomposition_*.json")):
        payload = json.loads(decomposition_path.read_text(encoding="utf-8"))
        path = figures / (decomposition_path.stem + ".png")
        quasiprob_figure(payload, path)
        written.append(path)
    return written
