"""Figure rendering for experiment outputs (headless, files only)."""

import os


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _series(summary):
    by_method = {}
    for s in summary:
        by_method.setdefault(s.method, []).append(s)
    for cells in by_method.values():
        cells.sort(key=lambda s: s.m)
    return by_method


def render_summary_figures(summary, out_dir):
    """Render PSNR-vs-m (with 90% CI bars) and NLL-vs-m next to the CSVs."""
    plt = _pyplot()
    by_method = _series(summary)
    paths = []

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for method, cells in sorted(by_method.items()):
        ms = [s.m for s in cells]
        ax.errorbar(
            ms,
            [s.psnr_mean_db for s in cells],
            yerr=[s.psnr_ci90_db for s in cells],
            marker="o",
            capsize=3,
            label=method,
        )
    ax.set_xlabel("number of measurements m")
    ax.set_ylabel("PSNR (dB)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, "psnr_vs_m.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    truth_drawn = False
    for method, cells in sorted(by_method.items()):
        ms = [s.m for s in cells]
        ax.plot(ms, [s.nll_estimate_mean for s in cells], marker="o", label=method)
        if not truth_drawn:
            ax.plot(ms, [s.nll_truth_mean for s in cells], "k--", marker="s", label="data")
            truth_drawn = True
    ax.set_xlabel("number of measurements m")
    ax.set_ylabel("negative log-likelihood")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = os.path.join(out_dir, "nll_vs_m.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)
    return paths


PLOT_SCRIPT = '''\
#!/usr/bin/env python3
"""Regenerate the experiment figures from summary.csv in this directory."""

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load_summary():
    rows = []
    with open(os.path.join(HERE, "summary.csv"), newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                {
                    "method": rec["method"],
                    "m": int(rec["m"]),
                    "psnr": float(rec["psnr_mean_db"]),
                    "ci": float(rec["psnr_ci90_db"]),
                    "nll_est": float(rec["nll_estimate_mean"]),
                    "nll_truth": float(rec["nll_truth_mean"]),
                }
            )
    by_method = {}
    for row in rows:
        by_method.setdefault(row["method"], []).append(row)
    for cells in by_method.values():
        cells.sort(key=lambda r: r["m"])
    return by_method


def main():
    by_method = load_summary()

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for method, cells in sorted(by_method.items()):
        ms = [c["m"] for c in cells]
        ax.errorbar(ms, [c["psnr"] for c in cells], yerr=[c["ci"] for c in cells],
                    marker="o", capsize=3, label=method)
    ax.set_xlabel("number of measurements m")
    ax.set_ylabel("PSNR (dB)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, "psnr_vs_m.png"), dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    truth_drawn = False
    for method, cells in sorted(by_method.items()):
        ms = [c["m"] for c in cells]
        ax.plot(ms, [c["nll_est"] for c in cells], marker="o", label=method)
        if not truth_drawn:
            ax.plot(ms, [c["nll_truth"] for c in cells], "k--", marker="s", label="data")
            truth_drawn = True
    ax.set_xlabel("number of measurements m")
    ax.set_ylabel("negative log-likelihood")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(os.path.join(HERE, "nll_vs_m.png"), dpi=150)
    plt.close(fig)
    print("wrote psnr_vs_m.png and nll_vs_m.png")


if __name__ == "__main__":
    main()
'''


def write_plot_script(out_dir):
    """Drop a standalone script that rebuilds the figures from the CSVs."""
    path = os.path.join(out_dir, "plot_results.py")
    with open(path, "w") as fh:
        fh.write(PLOT_SCRIPT)
    return path
