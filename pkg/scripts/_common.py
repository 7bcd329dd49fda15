"""Shared helpers for the figure scripts."""
import argparse
import csv
from pathlib import Path

from heom.cli import Runner
from heom.config import bundled_config, parse_config


def reduced_runner(name, out, N=3, m_max=0, n_max=3, I_th=0.0, lindblad=None, drop_bosonic=False,
                   **params):
    """Runner for a bundled example with every bath cut to ``N`` poles."""
    doc = bundled_config(name).to_dict()
    if drop_bosonic:
        doc["baths"] = [b for b in doc["baths"] if b["flavor"] == "fermionic"]
    for b in doc["baths"]:
        b["N"] = N
    doc["truncation"] = {"m_max": m_max, "n_max": n_max, "I_th": I_th}
    doc["system"]["params"].update(params)
    if lindblad is not None:
        doc["lindblad"] = lindblad
    return Runner(parse_config(doc), out)


def parser(description, out_default):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", type=Path, default=Path(out_default))
    p.add_argument("--N", type=int, default=3, help="poles per bath")
    p.add_argument("--n-max", type=int, default=3, help="fermionic tier")
    p.add_argument("--plot", action="store_true", help="also write a PNG (needs matplotlib)")
    return p


def write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path}")


def plot(path, curves, xlabel, ylabel):
    """``curves`` maps a legend label to ``(x, y)``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, (x, y) in curves.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(curves) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    print(f"wrote {path}")
