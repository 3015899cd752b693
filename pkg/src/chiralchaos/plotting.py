"""Figure rendering for command-line reports (PNG files, headless backend)."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import Phase  # noqa: E402

PORT_COLORS = {1: "tab:red", 2: "tab:blue"}
PHASE_CODES = {"": -1, Phase.STATIONARY.value: 0, Phase.SELF_OSCILLATION.value: 1,
               Phase.PERIOD_DOUBLING.value: 2, Phase.CHAOS.value: 3}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def timeseries(traj, path, title: str = "") -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
    axes[0].plot(traj.taus / (2 * math.pi), traj.i_a, lw=0.6)
    axes[0].set_xlabel("t / (2 pi / Omega)")
    axes[0].set_ylabel("I_A")
    axes[1].plot(traj.q, traj.p, lw=0.4)
    axes[1].set_xlabel("q")
    axes[1].set_ylabel("p")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def phase_diagram(diagram, path) -> Path:
    from matplotlib.colors import ListedColormap

    cmap = ListedColormap(["white", "tab:gray", "tab:green", "tab:red", "black"])
    ax_names = diagram.grid.names
    ports = sorted(diagram.labels)
    fig, axes = plt.subplots(1, len(ports), figsize=(4.2 * len(ports), 3.6), squeeze=False)
    for ax, port in zip(axes[0], ports):
        codes = np.vectorize(lambda s: PHASE_CODES.get(s, -1))(diagram.labels[port]).astype(float)
        ax.imshow(codes, origin="lower", aspect="auto", cmap=cmap, vmin=-1.5, vmax=3.5,
                  extent=_extent(diagram.grid))
        ax.set_title(f"port {port}")
        ax.set_xlabel(ax_names[-1])
        ax.set_ylabel(ax_names[0] if len(ax_names) == 2 else "")
    return _save(fig, path)


def _extent(grid):
    a = grid.axes
    if len(a) == 1:
        return (a[0].min, a[0].max, 0, 1)
    return (a[1].min, a[1].max, a[0].min, a[0].max)


def bifurcation(rows, path, control_name: str = "control") -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for port in sorted({r["port"] for r in rows if "port" in r}):
        xs = [r["control"] for r in rows if r.get("port") == port and not r.get("error")]
        ys = [r["extremum"] for r in rows if r.get("port") == port and not r.get("error")]
        ax.plot(xs, ys, ",", color=PORT_COLORS.get(port, "k"), label=f"port {port}")
    ax.set_xlabel(control_name)
    ax.set_ylabel("q maxima")
    ax.legend(markerscale=20)
    return _save(fig, path)


def lyapunov_lines(controls, lambdas: dict, path, control_name: str = "control") -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.2))
    for port, lam in sorted(lambdas.items()):
        ax.plot(controls, lam, "-", lw=0.8, color=PORT_COLORS.get(port, "k"), label=f"port {port}")
    ax.axhline(0.0, ls="-.", color="k", lw=0.6)
    ax.set_xlabel(control_name)
    ax.set_ylabel("lambda_max")
    ax.legend()
    return _save(fig, path)


def metrics(rows, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    xs = [r["xi"] for r in rows]
    ax.plot(xs, [r["C"] for r in rows], "o-", label="C")
    ax.plot(xs, [r["S"] for r in rows], "s--", label="S")
    ax.axhline(1.0, ls="-.", color="k", lw=0.6)
    ax.set_xlabel("|xi| / Omega")
    ax.set_ylim(0, 1.05)
    ax.legend()
    return _save(fig, path)


def tip_region(points, boundary, path) -> Path:
    fig = plt.figure(figsize=(4.5, 4.5))
    ax = fig.add_subplot(projection="polar")
    ax.plot(points[:, 1], points[:, 0], ",", color="tab:green", alpha=0.4)
    ok = ~np.isnan(boundary[:, 2])
    ax.plot(boundary[ok, 0], boundary[ok, 2], "k-", lw=1)
    ax.plot(boundary[ok, 0], boundary[ok, 1], "k-", lw=1)
    ax.set_title("|xi|/Omega vs phi")
    return _save(fig, path)


def success_map(table, path) -> Path:
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.4))
    for ax, which, title in zip(axes[:2], ("single", "dual"), ("single port", "dual port")):
        m = table.success_map(which).astype(float)
        ax.imshow(m, origin="lower", aspect="auto", cmap="cividis", vmin=0, vmax=1,
                  extent=(0, 2, table.second_values[0], table.second_values[-1] + 1e-12))
        ax.set_xlabel("theta / pi")
        ax.set_ylabel(table.second_axis_name)
        ax.set_title(title)
    ax = axes[2]
    ax.plot(table.second_values, table.single_rate, "o-", color="tab:gray", label="single")
    ax.plot(table.second_values, table.dual_rate, "s--", color="tab:red", label="dual")
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel(table.second_axis_name)
    ax.set_ylabel("success rate")
    ax.legend()
    return _save(fig, path)
