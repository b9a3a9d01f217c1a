"""Plot sup-norm and invariants from an nlnls time-series CSV.

    python docs/plot_timeseries.py nlnls-out/small_data_blowup.nonlocal.csv
"""

import sys

import matplotlib.pyplot as plt
import pandas as pd


def main(path):
    data = pd.read_csv(path, comment="#")
    trailer = {}
    with open(path) as f:
        for line in f:
            if line.startswith("# ") and "=" in line:
                key, value = line[2:].strip().split("=", 1)
                trailer[key] = value

    fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    top.semilogy(data["t"], data["sup_norm"])
    top.set_ylabel("sup |u|")
    estimate = trailer.get("blowup_estimate", "none")
    if estimate != "none":
        top.axvline(float(estimate), linestyle="--", color="gray")
    bottom.plot(data["t"], data["re_Q"] - data["re_Q"].iloc[0], label="Re Q drift")
    bottom.plot(data["t"], data["re_E"] - data["re_E"].iloc[0], label="Re E drift")
    bottom.set_xlabel("t")
    bottom.legend()
    top.set_title(f"{path} ({trailer.get('termination', '?')})")
    fig.tight_layout()
    plt.show()


if __name__ == "__main__":
    main(sys.argv[1])
