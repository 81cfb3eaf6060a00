# Copyright (c) 2024 The wh-cert-lib authors
# SPDX-License-Identifier: AGPL-3.0

from typing import List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib import pyplot as plt  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from ..classes.certificate import AnyCertificate  # noqa: E402
from ..classes.trajectory import Trajectory  # noqa: E402
from ..exceptions import DimensionError  # noqa: E402
from .validation_utils import levelset_sample  # noqa: E402


def canvas_creation(n_plots: int) -> Tuple[Figure, List[plt.Axes]]:
    """One square-ish grid of axes for n_plots panels."""
    n_cols = int(np.ceil(np.sqrt(n_plots)))
    n_rows = int(np.ceil(n_plots / n_cols))
    fig, axes = plt.subplots(n_rows, n_cols, figsize=(4 * n_cols, 3.5 * n_rows), squeeze=False)
    flat = list(axes.ravel())
    for ax in flat[n_plots:]:
        ax.set_visible(False)
    return fig, flat[:n_plots]


def _contour(ax: plt.Axes, frame: pd.DataFrame, columns: Sequence[str], label: str):
    xs = np.unique(frame[columns[0]].to_numpy())
    ys = np.unique(frame[columns[1]].to_numpy())
    Z = frame["psi"].to_numpy().reshape(len(xs), len(ys)).T
    ax.contourf(xs, ys, (Z <= 0).astype(float), levels=[0.5, 1.5], alpha=0.25)
    ax.contour(xs, ys, Z, levels=[0.0], linewidths=1.5)
    ax.set_title(label)
    ax.set_xlabel(columns[0])
    ax.set_ylabel(columns[1])


def plot_levelsets(
    cert: AnyCertificate,
    grid: List[Tuple[float, float, int]],
    path: str,
    nodes: Optional[Sequence[str]] = None,
    trajectory: Optional[Trajectory] = None,
) -> List[str]:
    """
    Draws the zero sublevel set of Psi_v for each node, one panel per node, and saves the figure.
    Args:
        cert: certificate on a two-dimensional state (augmented certificates are not drawn)
        grid: (lo, hi, points) for x1 and x2
        path: image file to write
        nodes: nodes to draw, all by default
        trajectory: optional trajectory overlaid on every panel

    Returns:
        List[str]: nodes drawn
    """
    if cert.dim != 2 or len(grid) != 2:
        raise DimensionError(f"level sets are drawn for two-dimensional certificates, got dimension {cert.dim}")
    nodes = list(nodes) if nodes is not None else list(cert.graph.nodes)
    fig, axes = canvas_creation(len(nodes))
    for ax, node in zip(axes, nodes):
        frame = levelset_sample(cert, node, grid)
        _contour(ax, frame, ["x1", "x2"], f"Psi_{node} <= 0")
        if trajectory is not None:
            ax.plot(trajectory.states[:, 0], trajectory.states[:, 1], marker=".", linewidth=1)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return nodes
