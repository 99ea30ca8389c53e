"""Density-ratio profiles with the fitted monotonicity envelope."""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import matplotlib.pyplot as plt

from common import run_script

COLUMNS = ["q_index", "r", "mass", "ratio", "fitted_c"]


def plot(data, out_png):
    by_center = {}
    for qi, r, ratio, c in zip(data["q_index"], data["r"], data["ratio"],
                               data["fitted_c"]):
        by_center.setdefault(int(qi), {"r": [], "ratio": [], "c": c})
        by_center[int(qi)]["r"].append(r)
        by_center[int(qi)]["ratio"].append(ratio)

    fig, ax = plt.subplots(figsize=(6, 4), dpi=120)
    for qi in sorted(by_center):
        prof = by_center[qi]
        ax.plot(prof["r"], prof["ratio"], "o-", ms=3, lw=1, alpha=0.7,
                label=f"center {qi}" if qi < 4 else None)
        # envelope anchored at the innermost sample: ratio_0 e^{C (r - r_0)}
        r0, ratio0, c = prof["r"][0], prof["ratio"][0], prof["c"]
        env = [ratio0 * math.exp(c * (r - r0)) for r in prof["r"]]
        ax.plot(prof["r"], env, "--", lw=0.8, color="gray", alpha=0.5)

    all_ratios = data["ratio"]
    level = round(sum(all_ratios) / len(all_ratios))
    ax.axhline(level, color="black", lw=1, ls=":",
               label=f"integer density {int(level)}")
    ax.set_xlabel("radius r")
    ax.set_ylabel("mass / (pi r^2)")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png)
    plt.close(fig)


if __name__ == "__main__":
    sys.exit(run_script(plot, COLUMNS))
