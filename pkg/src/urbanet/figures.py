"""Matplotlib renderings written next to the delimited report outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _finish(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def save_factor_correlation_bars(rows: list[dict], path, title="Edge-weight correlation by factor"):
    """Horizontal bars of Spearman rho per factor (one bar group per net)."""
    fig, ax = plt.subplots(figsize=(7, 0.5 * max(4, len(rows)) + 1))
    labels = [r["factor"] for r in rows]
    values = [r["spearman"] for r in rows]
    y = np.arange(len(rows))
    colors = ["#b2182b" if v < 0 else "#2166ac" for v in values]
    ax.barh(y, values, color=colors)
    ax.set_yticks(y, labels)
    ax.axvline(0.0, color="black", lw=0.8)
    ax.set_xlim(-1, 1)
    ax.set_xlabel("Spearman correlation with edge weight")
    ax.set_title(title)
    ax.invert_yaxis()
    return _finish(fig, path)


def save_compare_scatter(weights_a, weights_b, report: dict, path,
                         label_a="A", label_b="B"):
    fig, ax = plt.subplots(figsize=(5.5, 5))
    ax.scatter(weights_a, weights_b, s=12, alpha=0.5, color="#2166ac")
    ax.set_xscale("symlog")
    ax.set_yscale("symlog")
    ax.set_xlabel(f"edge weight ({label_a})")
    ax.set_ylabel(f"edge weight ({label_b})")
    bits = []
    for key in ("pearson", "spearman", "kendall_centrality"):
        value = report.get(key)
        if value is not None:
            bits.append(f"{key}={value:.3f}")
    ax.set_title("Paired edge weights\n" + ", ".join(bits))
    return _finish(fig, path)


def save_importance_bars(importances: dict[str, float], path,
                         title="Permutation importance", top_n=15):
    ranked = sorted(importances.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
    labels = [k for k, _ in ranked][::-1]
    values = [v for _, v in ranked][::-1]
    fig, ax = plt.subplots(figsize=(7, 0.4 * len(ranked) + 1.2))
    ax.barh(np.arange(len(ranked)), values, color="#4393c3")
    ax.set_yticks(np.arange(len(ranked)), labels)
    ax.set_xlabel("mean metric drop")
    ax.set_title(title)
    return _finish(fig, path)


def save_zone_map(boundaries: dict[str, list[tuple[float, float]]],
                  zones: dict[str, int], path, label_top_n=6,
                  title="Urban preference zones"):
    """Categorical choropleth of zone membership over cell polygons
    (projected coordinates), largest zones labeled by rank."""
    from matplotlib.patches import Polygon as MplPolygon

    fig, ax = plt.subplots(figsize=(7, 7))
    labels = sorted(set(zones.values()))
    cmap = plt.get_cmap("tab20")
    color_of = {z: cmap(i % 20) for i, z in enumerate(labels)}
    centers: dict[int, list[tuple[float, float]]] = {}
    for cell, ring in boundaries.items():
        zone = zones.get(cell)
        if zone is None:
            continue
        ax.add_patch(MplPolygon(ring, closed=True, facecolor=color_of[zone],
                                edgecolor="white", lw=0.2))
        xs = [p[0] for p in ring]
        ys = [p[1] for p in ring]
        centers.setdefault(zone, []).append((sum(xs) / len(xs), sum(ys) / len(ys)))
    sizes = sorted(centers, key=lambda z: (-len(centers[z]), z))
    for rank, zone in enumerate(sizes[:label_top_n], start=1):
        pts = centers[zone]
        cx = sum(p[0] for p in pts) / len(pts)
        cy = sum(p[1] for p in pts) / len(pts)
        ax.annotate(str(rank), (cx, cy), ha="center", va="center",
                    fontsize=12, fontweight="bold")
    ax.autoscale_view()
    ax.set_aspect("equal")
    ax.set_axis_off()
    ax.set_title(title)
    return _finish(fig, path)


def save_strength_map(boundaries: dict[str, list[tuple[float, float]]],
                      strength: dict[str, float], path,
                      title="Interest network node strength"):
    from matplotlib.patches import Polygon as MplPolygon

    fig, ax = plt.subplots(figsize=(7, 7))
    values = [strength.get(c, 0.0) for c in boundaries]
    vmax = max(values) if values else 1.0
    cmap = plt.get_cmap("viridis")
    for cell, ring in boundaries.items():
        s = strength.get(cell, 0.0) / vmax if vmax else 0.0
        ax.add_patch(MplPolygon(ring, closed=True, facecolor=cmap(s),
                                edgecolor="white", lw=0.2))
    ax.autoscale_view()
    ax.set_aspect("equal")
    ax.set_axis_off()
    ax.set_title(title)
    sm = plt.cm.ScalarMappable(cmap=cmap, norm=plt.Normalize(0, vmax))
    fig.colorbar(sm, ax=ax, shrink=0.7, label="weighted degree")
    return _finish(fig, path)
