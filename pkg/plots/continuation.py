"""Width-versus-sigma figure with entropy markers from a continuation CSV."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import matplotlib.pyplot as plt

from common import run_script

COLUMNS = ["sigma", "beta", "entropy_value", "accepted"]


def plot(data, out_png):
    sigma = data["sigma"]
    beta = data["beta"]
    entropy = data["entropy_value"]
    accepted = [bool(int(a)) for a in data["accepted"]]

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 6), sharex=True, dpi=120)
    ax1.plot(sigma, beta, "o-", color="tab:blue", label="width")
    acc_s = [s for s, a in zip(sigma, accepted) if a]
    acc_b = [b for b, a in zip(beta, accepted) if a]
    ax1.plot(acc_s, acc_b, "o", mfc="none", mec="tab:green", ms=14,
             label="accepted")
    ax1.set_ylabel("width beta(sigma)")
    ax1.legend()
    ax1.grid(alpha=0.3)

    ax2.plot(sigma, entropy, "s-", color="tab:red")
    ax2.set_xlabel("sigma")
    ax2.set_ylabel("sigma^2 F_p log(1/sigma)")
    ax2.grid(alpha=0.3)
    ax2.invert_xaxis()
    fig.tight_layout()
    fig.savefig(out_png)
    plt.close(fig)


if __name__ == "__main__":
    sys.exit(run_script(plot, COLUMNS))
