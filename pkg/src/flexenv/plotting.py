"""Optional figures rendered next to the CSV/JSON outputs of the command line.

Only the ``--plot`` path imports this module, so the numerical code never
depends on a display backend.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .envelope import EnvelopeSeries  # noqa: E402

KWH = 3.6e6


def plot_envelopes(envs: dict[str, EnvelopeSeries], path: str | Path, title: str = "") -> Path:
    """Cumulative-energy bounds in kWh against lead time in hours."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, (name, env) in enumerate(envs.items()):
        h = env.defined_up_to
        t = env.times[: h + 1] / 3600.0
        color = f"C{i}"
        ax.plot(t, env.E_up[: h + 1] / KWH, color=color, label=f"{name} upper")
        ax.plot(t, env.E_down[: h + 1] / KWH, color=color, linestyle="--", label=f"{name} lower")
        if h < env.K:
            ax.axvline(env.times[h] / 3600.0, color=color, linestyle=":", linewidth=0.8)
    ax.set_xlabel("lead time [h]")
    ax.set_ylabel("cumulative energy [kWh]")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_states(dt: float, states: dict[str, np.ndarray], x_min: float, x_max: float, path: str | Path, title: str = "") -> Path:
    """Simulated state trajectories with the comfort band shaded."""
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, xs in states.items():
        xs = np.asarray(xs)
        t = np.arange(xs.shape[0]) * dt / 3600.0
        ax.plot(t, xs if xs.ndim == 1 else xs[:, 0], label=name)
    ax.axhspan(x_min, x_max, color="0.9", zorder=0)
    ax.set_xlabel("time [h]")
    ax.set_ylabel("state")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sweep(rows, path: str | Path) -> Path:
    """Area reduction per archetype, one group of bars per horizon."""
    names = sorted({r.archetype for r in rows}, key=[r.archetype for r in rows].index)
    horizons = sorted({r.horizon_s for r in rows})
    width = 0.8 / max(len(horizons), 1)
    fig, ax = plt.subplots(figsize=(10, 4))
    x = np.arange(len(names))
    for i, h in enumerate(horizons):
        vals = [next(r.reduction for r in rows if r.archetype == n and r.horizon_s == h) for n in names]
        ax.bar(x + i * width, vals, width, label=f"{h / 3600:g} h")
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("area reduction")
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
