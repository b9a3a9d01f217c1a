"""Plot |u(t, x)| from the output of `nlnls exact`.

    nlnls exact --kind two_param --alpha 1 --beta 0.5 --t 0:1:0.25 --x-range -10:10:0.01 > u.csv
    python docs/plot_exact.py u.csv
"""

import sys

import matplotlib.pyplot as plt
import pandas as pd


def main(path):
    data = pd.read_csv(path)
    for t, rows in data.groupby("t"):
        plt.plot(rows["x"], rows["abs"], label=f"t = {t:g}")
    plt.xlabel("x")
    plt.ylabel("|u|")
    plt.legend()
    plt.show()


if __name__ == "__main__":
    main(sys.argv[1])
