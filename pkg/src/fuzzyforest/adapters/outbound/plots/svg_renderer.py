"""SVG figure renderer built on jinja2 templates."""

from collections.abc import Mapping
from pathlib import Path

from jinja2 import Environment, FileSystemLoader, StrictUndefined, select_autoescape
from scipy.cluster.hierarchy import dendrogram as scipy_dendrogram

from fuzzyforest.domain.models import Dendrogram, ModulePartition, RocCurve
from fuzzyforest.domain.ports import PlotRendererPort

TEMPLATE_DIR = Path(__file__).parent / "templates"

CURVE_COLORS = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02")

# module colors that are not SVG color keywords
COLOR_OVERRIDES = {"grey60": "#999999"}
UNKNOWN_COLOR = "#cccccc"


def _fill(color: str) -> str:
    if color in COLOR_OVERRIDES:
        return COLOR_OVERRIDES[color]
    return UNKNOWN_COLOR if color.startswith("module") else color


def _fmt(value: float) -> str:
    return f"{value:.2f}"


class SvgPlotRenderer(PlotRendererPort):
    """Renders ROC overlays and module dendrograms as standalone SVG."""

    def __init__(self, size: int = 480) -> None:
        self.size = size
        self.env = Environment(
            loader=FileSystemLoader(TEMPLATE_DIR),
            autoescape=select_autoescape(["j2"]),
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )

    def roc_overlay(self, curves: Mapping[str, RocCurve], title: str) -> str:
        left, top = 60.0, 40.0
        span = self.size - 100.0

        def point(fpr: float, tpr: float) -> str:
            return f"{_fmt(left + fpr * span)},{_fmt(top + (1.0 - tpr) * span)}"

        rendered = [
            {
                "name": name,
                "color": CURVE_COLORS[i % len(CURVE_COLORS)],
                "auc": f"{curve.auc:.3f}",
                "points": " ".join(
                    point(float(f), float(t)) for f, t in zip(curve.fpr, curve.tpr, strict=True)
                ),
            }
            for i, (name, curve) in enumerate(curves.items())
        ]
        ticks = [
            {"label": f"{v:.1f}", "x": _fmt(left + v * span), "y": top + (1.0 - v) * span}
            for v in (0.0, 0.25, 0.5, 0.75, 1.0)
        ]
        template = self.env.get_template("roc.svg.j2")
        return template.render(
            size=self.size,
            title=title,
            left=left,
            top=top,
            span=span,
            ticks=ticks,
            curves=rendered,
        )

    def dendrogram(self, dend: Dendrogram, partition: ModulePartition) -> str:
        n = dend.n_leaves
        left, right, top = 40.0, 20.0, 40.0
        leaf_width = max(2.0, min(12.0, 900.0 / max(n, 1)))
        width = left + right + leaf_width * n
        tree_height = 300.0
        bar_y = top + tree_height + 10.0
        bar_height = 20.0

        max_height = float(dend.heights.max()) if dend.heights.size else 0.0
        scale = tree_height / max_height if max_height > 0 else 0.0

        def y_of(h: float) -> float:
            return top + tree_height - h * scale

        if n >= 2:
            layout = scipy_dendrogram(dend.linkage, no_plot=True, labels=dend.labels)
            order = [int(i) for i in layout["leaves"]]
            # scipy places leaf i at x = 5 + 10·i
            links = [
                " ".join(
                    f"{_fmt(left + (x - 5.0) / 10.0 * leaf_width + leaf_width / 2)},{_fmt(y_of(y))}"
                    for x, y in zip(xs, ys, strict=True)
                )
                for xs, ys in zip(layout["icoord"], layout["dcoord"], strict=True)
            ]
        else:
            order = list(range(n))
            links = []

        leaves = [
            {
                "x": _fmt(left + position * leaf_width),
                "width": _fmt(leaf_width),
                "name": dend.labels[leaf],
                "color": partition.color_of_feature(leaf),
                "fill": _fill(partition.color_of_feature(leaf)),
            }
            for position, leaf in enumerate(order)
        ]
        cut_y = _fmt(y_of(partition.cut_height)) if scale and partition.cut_height <= max_height else None
        template = self.env.get_template("dendrogram.svg.j2")
        return template.render(
            width=round(width, 2),
            height=round(bar_y + bar_height + 30.0, 2),
            left=left,
            right=right,
            links=links,
            cut_y=cut_y,
            cut_height=f"{partition.cut_height:.4f}",
            leaves=leaves,
            bar_y=bar_y,
            bar_height=bar_height,
        )
