# reports.py
# -------------------------------------------------------------------
# Experiment records and artifacts:
# - ExperimentRecord rows for every verify suite and sweep
# - CSV / Markdown rendering through pandas
# - Plotly charts (node-count growth, ratio-bound heat map, pass counts)
# -------------------------------------------------------------------

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

import pandas as pd
import plotly.express as px
import plotly.graph_objects as go

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentRecord:
    """One measured row; wall_ms is informational and kept out of canonical output."""

    suite: str
    params: Mapping = field(default_factory=dict)
    seed: int | None = None
    measured: Mapping = field(default_factory=dict)
    passed: bool = True
    wall_ms: float | None = None

    def as_dict(self, with_timing: bool = False) -> dict:
        data = asdict(self)
        data["params"] = dict(self.params)
        data["measured"] = dict(self.measured)
        if not with_timing:
            data.pop("wall_ms")
        return data

    def flat(self) -> dict:
        row = {"suite": self.suite, "seed": self.seed}
        row.update(self.params)
        row.update(self.measured)
        row["passed"] = self.passed
        return row


def records_to_frame(records: Iterable[ExperimentRecord], columns: Sequence[str] | None = None) -> pd.DataFrame:
    rows = [r.flat() for r in records]
    if columns is None:
        return pd.DataFrame(rows)
    return pd.DataFrame(rows, columns=list(columns))


def records_to_json(records: Iterable[ExperimentRecord]) -> str:
    return json.dumps([r.as_dict() for r in records], sort_keys=True, default=str)


def df_to_markdown(df: pd.DataFrame, title: str, limit: int | None = None) -> str:
    """Render a DataFrame as a compact Markdown table."""
    header = f"### {title}\n"
    if df.empty:
        return header + "\n_No rows._\n"
    view = df
    if limit and len(view) > limit:
        view = view.head(limit)
        header = f"### {title} (showing first {limit} rows of {len(df)})\n"
    return header + "\n" + view.to_markdown(index=False) + "\n"


def suite_summary(records: Sequence[ExperimentRecord]) -> pd.DataFrame:
    """One row per suite: how many checks ran and how many passed."""
    if not records:
        return pd.DataFrame(columns=["suite", "checks", "passed", "status"])
    df = pd.DataFrame([{"suite": r.suite, "passed": r.passed} for r in records])
    out = df.groupby("suite", sort=False)["passed"].agg(checks="size", passed="sum").reset_index()
    out["status"] = ["✅" if p == c else "❌" for p, c in zip(out["passed"], out["checks"])]
    return out


def verify_report(records: Sequence[ExperimentRecord]) -> str:
    parts = ["# Verification Report\n", df_to_markdown(suite_summary(records), "Summary")]
    if not records:
        return "\n".join(parts)
    for suite, group in pd.DataFrame([r.flat() for r in records]).groupby("suite", sort=False):
        parts.append(df_to_markdown(group.dropna(axis=1, how="all"), f"Suite: {suite}", limit=50))
    return "\n".join(parts)


def write_frame(df: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False)
    logger.info("Wrote %d rows to %s", len(df), path)
    return path


# =========================
# Charts
# =========================
def node_count_figure(rows: Sequence[Mapping]) -> go.Figure:
    df = pd.DataFrame(rows)
    fig = px.scatter(df, x="n", y="nodes", log_x=True, log_y=True, title="Median Program Size vs n")
    fig.add_trace(go.Scatter(x=df["n"], y=df["n4"], mode="lines", name="n^4", line={"dash": "dash"}))
    fig.update_layout(xaxis_title="n", yaxis_title="Nodes")
    return fig


def ratio_heatmap(df: pd.DataFrame, n: int | None = None) -> go.Figure:
    """log2(ratio) - log2(bound) over (delta, gamma); cells <= 0 satisfy the bound."""
    view = df if n is None else df[df["n"] == n]
    grid = (view.assign(slack=view["log2_ratio"] - view["log2_bound"])
            .pivot_table(index="gamma", columns="delta", values="slack", aggfunc="max"))
    fig = go.Figure(go.Heatmap(z=grid.values, x=grid.columns, y=grid.index, colorscale="RdYlGn_r", zmid=0))
    fig.update_layout(title=f"Binomial Ratio Slack{'' if n is None else f' (n={n})'}",
                      xaxis_title="delta", yaxis_title="gamma")
    return fig


def pass_chart(df: pd.DataFrame) -> go.Figure:
    fig = go.Figure()
    colors = {"multipass": "#ffa726", "sampling": "#66bb6a"}
    for algo, group in df.groupby("algo"):
        mean = group.groupby("s")["passes"].mean()
        fig.add_trace(go.Bar(name=algo, x=[str(s) for s in mean.index], y=mean.values,
                             marker_color=colors.get(algo)))
    fig.update_layout(title="Passes by Register Budget", xaxis_title="s", yaxis_title="Mean passes", barmode="group")
    return fig


def uniformity_figure(df: pd.DataFrame) -> go.Figure:
    fig = px.line(df, x="n", y="distance", markers=True, log_x=True, title="j-Distribution Distance from Uniform")
    fig.update_layout(xaxis_title="n", yaxis_title="Statistical distance")
    return fig


def write_figure(fig: go.Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.write_html(str(path), include_plotlyjs="cdn")
    logger.info("Wrote chart to %s", path)
    return path
