"""Bar chart of dyadic annulus energies from a neck-scan CSV."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import matplotlib.pyplot as plt

from common import run_script

COLUMNS = ["x", "j", "annulus_energy"]


def plot(data, out_png):
    j = data["j"]
    e = data["annulus_energy"]
    fig, ax = plt.subplots(figsize=(6, 4), dpi=120)
    ax.bar([int(v) for v in j], e, color="tab:purple", width=0.6)
    ax.set_xlabel("dyadic annulus index j")
    ax.set_ylabel("Dirichlet energy")
    ax.set_xticks([int(v) for v in j])
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(out_png)
    plt.close(fig)


if __name__ == "__main__":
    sys.exit(run_script(plot, COLUMNS))
