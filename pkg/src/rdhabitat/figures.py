"""Figure rendering for CLI reports; headless backend, files only."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .domain import GridGeometry
from .linstab import Regime
from .solver import FieldState, TimeSeries

_REGIME_COLORS = {
    Regime.HOMOGENEOUS_STABLE.value: "#c7c7c7",
    Regime.PURE_TURING.value: "#2a7fff",
    Regime.TURING_HOPF.value: "#7a3fbf",
    Regime.HOPF_ONLY.value: "#d94141",
    "Unknown": "#000000",
}


def save_state_heatmaps(path: str, state: FieldState, g: GridGeometry,
                        label: str = "") -> None:
    """Side-by-side prey and predator density maps; masked cells blank."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4.4), constrained_layout=True)
    extent = (0.0, g.nx * g.h, 0.0, g.ny * g.h)
    for ax, field, name in ((axes[0], state.u, "prey u"),
                            (axes[1], state.v, "predator v")):
        shown = np.ma.masked_invalid(field)
        im = ax.imshow(shown, origin="lower", extent=extent, cmap="viridis",
                       interpolation="nearest")
        ax.set_title(f"{name} at t={state.t:g}" + (f" ({label})" if label else ""))
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_dispersion_plot(path: str, samples: np.ndarray,
                         band: tuple[float, float] | None) -> None:
    """Max growth rate and oscillation frequency against wavenumber."""
    fig, ax = plt.subplots(figsize=(7, 4.4), constrained_layout=True)
    ax.plot(samples[:, 0], samples[:, 1], color="#2a5fd0", label="max Re lambda")
    ax.plot(samples[:, 0], samples[:, 2], color="#c23b3b", label="Im lambda")
    ax.axhline(0.0, color="black", linewidth=0.8)
    if band is not None:
        ax.axvspan(band[0], band[1], color="#2a5fd0", alpha=0.12, label="unstable band")
    ax.set_xlabel("wavenumber k")
    ax.set_ylabel("eigenvalue parts")
    ax.legend(loc="best")
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_regime_map_plot(path: str, a_values: np.ndarray, d2_values: np.ndarray,
                         labels: list[list[str]],
                         boundary: np.ndarray | None = None,
                         hopf_a: float | None = None) -> None:
    """Regime labels as colored cells in the (a, d2) plane."""
    color_list = list(_REGIME_COLORS)
    index = {name: i for i, name in enumerate(color_list)}
    grid = np.array([[index.get(lab, index["Unknown"]) for lab in row] for row in labels])
    cmap = matplotlib.colors.ListedColormap([_REGIME_COLORS[n] for n in color_list])
    fig, ax = plt.subplots(figsize=(7, 5), constrained_layout=True)
    ax.pcolormesh(a_values, d2_values, grid.T, cmap=cmap, vmin=-0.5,
                  vmax=len(color_list) - 0.5, shading="nearest")
    if boundary is not None:
        ok = np.isfinite(boundary)
        ax.plot(a_values[ok], boundary[ok], color="black", linewidth=1.6,
                label="Turing boundary")
    if hopf_a is not None:
        ax.axvline(hopf_a, color="#d94141", linestyle="--", linewidth=1.2,
                   label="Hopf line")
    handles = [plt.Rectangle((0, 0), 1, 1, color=_REGIME_COLORS[n]) for n in color_list]
    ax.legend(handles + ax.get_lines(), color_list + [ln.get_label() for ln in ax.get_lines()],
              loc="upper right", fontsize=8)
    ax.set_xlabel("a")
    ax.set_ylabel("d2")
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_series_plot(path: str, series: TimeSeries) -> None:
    """Region-mean prey trajectories; D2 plotted only where it exists."""
    fig, ax = plt.subplots(figsize=(8, 4.2), constrained_layout=True)
    ax.plot(series.t, series.mean_u_d1, color="#2a5fd0", linewidth=0.9, label="mean u, D1")
    if not np.isnan(series.mean_u_d2).all():
        ax.plot(series.t, series.mean_u_d2, color="#c23b3b", linewidth=0.9, label="mean u, D2")
    ax.set_xlabel("t")
    ax.set_ylabel("regional mean prey density")
    ax.legend(loc="best")
    fig.savefig(path, dpi=130)
    plt.close(fig)
