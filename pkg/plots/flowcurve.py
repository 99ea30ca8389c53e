"""Per-iteration energy and residual curves from a flow CSV."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import matplotlib.pyplot as plt

from common import run_script

COLUMNS = ["iter", "area", "f_p", "relaxed", "residual"]


def plot(data, out_png):
    it = data["iter"]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True, dpi=120)
    ax1.plot(it, data["relaxed"], "-", color="tab:blue", label="relaxed")
    ax1.plot(it, data["area"], "--", color="tab:orange", label="area")
    ax1.set_ylabel("energy")
    ax1.legend()
    ax1.grid(alpha=0.3)

    residual = [r for r in data["residual"]]
    ax2.semilogy(it[:len(residual)], residual, "-", color="tab:red")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("dual residual")
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png)
    plt.close(fig)


if __name__ == "__main__":
    sys.exit(run_script(plot, COLUMNS))
