"""Render energy time-series figures from a run's CSV output."""

from pathlib import Path

import numpy as np

_FIG_WIDTH_IN = 4.2
_ASPECT = 0.62


def _load_series(csv_path):
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    return data["t"], data["E_v"], data["E_b"]


def render_energy_figures(csv_path, out_dir):
    """Write kinetic_energy.png and magnetic_energy.png next to the CSV.

    Returns the list of written paths.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t, e_v, e_b = _load_series(csv_path)
    out_dir = Path(out_dir)
    written = []
    for name, series, label in (
        ("kinetic_energy.png", e_v, r"$E_v$"),
        ("magnetic_energy.png", e_b, r"$E_b$"),
    ):
        fig, ax = plt.subplots(figsize=(_FIG_WIDTH_IN, _FIG_WIDTH_IN * _ASPECT))
        ax.plot(t, series, lw=1.2)
        ax.set_xlabel(r"$t$")
        ax.set_ylabel(label)
        if np.all(series > 0) and series.max() / max(series.min(), 1e-300) > 1e3:
            ax.set_yscale("log")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out_dir / name
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
