#!/usr/bin/env python3
"""Plot cbpscale CSV output.

Usage:
    python3 tools/plot_results.py converge results.csv [out.png]
    python3 tools/plot_results.py compare results.csv [out.png]

`converge` draws each diagnostic's value against k (log-log, one line per
lambda); a straight line of slope -1 is the typical 1/k decay of the
generator gap. `compare` draws the observed |difference| per quantity and
lambda with its 3-standard-error band.
"""

import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402


def plot_converge(df: pd.DataFrame, out: str) -> None:
    diagnostics = sorted(df["diagnostic"].unique())
    fig, axes = plt.subplots(1, len(diagnostics), figsize=(4 * len(diagnostics), 3.5))
    if len(diagnostics) == 1:
        axes = [axes]
    for ax, diag in zip(axes, diagnostics):
        sub = df[df["diagnostic"] == diag]
        for lam, grp in sub.groupby("lambda"):
            grp = grp.sort_values("k")
            ax.loglog(grp["k"], grp["value"].clip(lower=1e-300), marker="o",
                      label=f"lambda={lam:g}")
        ax.set_xlabel("k")
        ax.set_title(diag, fontsize=9)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


def plot_compare(df: pd.DataFrame, out: str) -> None:
    df = df.copy()
    df["label"] = df.apply(
        lambda r: f"k={r['k']:g} t={r['t']:g} {r['quantity']}"
        + (f" l={r['lambda']:g}" if r["quantity"] == "laplace" else ""),
        axis=1,
    )
    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(df)), 4))
    xs = range(len(df))
    ax.bar(xs, 3.0 * df["combined_se"], color="lightsteelblue", label="3 combined SE")
    ax.plot(xs, df["diff"].abs(), "ko", markersize=4, label="|difference|")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(df["label"], rotation=90, fontsize=7)
    ax.set_ylabel("absolute difference")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


def main() -> int:
    if len(sys.argv) < 3:
        print(__doc__)
        return 1
    mode, path = sys.argv[1], sys.argv[2]
    out = sys.argv[3] if len(sys.argv) > 3 else f"{mode}.png"
    df = pd.read_csv(path)
    if mode == "converge":
        plot_converge(df, out)
    elif mode == "compare":
        plot_compare(df, out)
    else:
        print(f"unknown mode '{mode}'")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
