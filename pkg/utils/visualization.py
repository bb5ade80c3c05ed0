"""Visualization utilities using Plotly."""

from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

COLORS = ["#4F8BF9", "#F95F4F", "#2CA58D", "#F2A541", "#8E6CEF"]


def create_speed_figure(
    bench: pd.DataFrame,
    title: Optional[str] = None
) -> go.Figure:
    """
    Generation time of both builders against node count, one pair of lines per mode.

    Args:
        bench: Benchmark table (n, mode, fast_seconds, oracle_seconds, ratio)
        title: Optional title

    Returns:
        Plotly figure with a log-scaled time axis and the speed-up ratio below
    """
    fig = make_subplots(rows=2, cols=1, shared_xaxes=True, subplot_titles=("Mean time", "Speed-up"))

    for i, (mode, group) in enumerate(bench.groupby("mode", sort=False)):
        color = COLORS[i % len(COLORS)]
        fig.add_trace(go.Scatter(
            x=group["n"], y=group["fast_seconds"], mode="lines+markers",
            name=f"{mode} row shifts", line=dict(color=color)
        ), row=1, col=1)
        fig.add_trace(go.Scatter(
            x=group["n"], y=group["oracle_seconds"], mode="lines+markers",
            name=f"{mode} brute force", line=dict(color=color, dash="dash")
        ), row=1, col=1)
        fig.add_trace(go.Bar(
            x=group["n"].astype(str), y=group["ratio"], name=f"{mode} ratio",
            marker_color=color, showlegend=False
        ), row=2, col=1)

    fig.update_yaxes(type="log", title_text="seconds", row=1, col=1)
    fig.update_yaxes(title_text="oracle / fast", row=2, col=1)
    fig.update_layout(
        title=title or "Graph generation speed",
        xaxis2_title="nodes",
        template="plotly_white"
    )
    return fig


def create_sweep_figure(
    sweep: pd.DataFrame,
    title: Optional[str] = None
) -> go.Figure:
    """
    Mean mAP and rank-1 per setting with the per-seed spread as error bars.

    Args:
        sweep: Sweep table (setting, seed, mAP, rank1)
        title: Optional title

    Returns:
        Plotly figure
    """
    grouped = sweep.groupby("setting", sort=False)
    means = grouped[["mAP", "rank1"]].mean()
    spread = grouped[["mAP", "rank1"]].std(ddof=0).fillna(0.0)
    settings = [str(s) for s in means.index]

    fig = go.Figure()
    for i, metric in enumerate(["mAP", "rank1"]):
        fig.add_trace(go.Bar(
            x=settings,
            y=means[metric],
            error_y=dict(type="data", array=spread[metric]),
            name=metric,
            marker_color=COLORS[i]
        ))

    fig.update_layout(
        title=title or "Ablation sweep",
        xaxis_title="setting",
        yaxis_title="score",
        yaxis_range=[0, 1.05],
        barmode="group",
        template="plotly_white"
    )
    return fig


def create_training_figure(
    log: pd.DataFrame,
    title: Optional[str] = None
) -> go.Figure:
    """
    Loss components, train accuracy and residual mixing weights per epoch.

    Args:
        log: Training log (epoch, loss, id_loss, triplet_loss, center_loss, train_acc, alpha_*)
        title: Optional title

    Returns:
        Plotly figure
    """
    fig = make_subplots(rows=1, cols=2, subplot_titles=("Loss", "Accuracy and α"))

    for i, column in enumerate(["loss", "id_loss", "triplet_loss", "center_loss"]):
        fig.add_trace(go.Scatter(
            x=log["epoch"], y=log[column], mode="lines", name=column,
            line=dict(color=COLORS[i % len(COLORS)])
        ), row=1, col=1)

    fig.add_trace(go.Scatter(
        x=log["epoch"], y=log["train_acc"], mode="lines", name="train_acc",
        line=dict(color="black", width=2)
    ), row=1, col=2)
    for column in [c for c in log.columns if c.startswith("alpha_")]:
        fig.add_trace(go.Scatter(
            x=log["epoch"], y=log[column], mode="lines", name=column, line=dict(dash="dot")
        ), row=1, col=2)

    fig.update_layout(
        title=title or "Training",
        xaxis_title="epoch",
        xaxis2_title="epoch",
        template="plotly_white"
    )
    return fig


def create_attention_heatmap(
    attention: pd.DataFrame,
    n: int,
    title: Optional[str] = None
) -> go.Figure:
    """
    Dense heatmap of one layer's attention matrix from its ``row,col,weight`` dump.

    Args:
        attention: Nonzero entries
        n: Node count
        title: Optional title

    Returns:
        Plotly figure; entries off the graph are left blank
    """
    dense = np.full((n, n), np.nan)
    dense[attention["row"].to_numpy(), attention["col"].to_numpy()] = attention["weight"].to_numpy()

    fig = go.Figure(data=go.Heatmap(
        z=dense,
        colorscale="Blues",
        zmin=0,
        zmax=1,
        hovertemplate="row %{y}, col %{x}: %{z:.3f}<extra></extra>"
    ))
    fig.update_layout(
        title=title or "Attention weights",
        xaxis_title="neighbor node",
        yaxis_title="node",
        yaxis_autorange="reversed",
        template="plotly_white"
    )
    return fig


def save_figure(fig: go.Figure, path: Union[str, Path]) -> Path:
    """Write a standalone HTML file (plotly.js loaded from the CDN)."""
    path = Path(path)
    fig.write_html(str(path), include_plotlyjs="cdn")
    return path
