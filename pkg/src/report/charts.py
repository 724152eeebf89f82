"""
Vega-Lite charts of training curves and score distributions, saved as *.vl.json.
"""
import logging
import os
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import altair as alt
import pandas as pd

from .tables import log_frame, smoothed

logger = logging.getLogger(__name__)

# Altair refuses to inline more rows than this by default.
MAX_CHART_ROWS = 5000


def _thin(df: pd.DataFrame) -> pd.DataFrame:
    if len(df) <= MAX_CHART_ROWS:
        return df
    stride = -(-len(df) // MAX_CHART_ROWS)
    return df.iloc[::stride].reset_index(drop=True)


def training_curve(log: Sequence[Mapping[str, Any]], x: str, metrics: Sequence[str], title: str,
                   window: int = 1) -> Optional[alt.Chart]:
    """One line per metric against `x`, optionally as a trailing mean; None when the log carries none of them."""
    df = log_frame(log)
    present = [m for m in metrics if m in df.columns]
    if df.empty or x not in df.columns or not present:
        return None
    if window > 1:
        df = df.assign(**{m: smoothed(df[m], window).to_numpy() for m in present})
    long = _thin(df[[x] + present]).melt(id_vars=[x], var_name="metric", value_name="value").dropna()
    return (
        alt.Chart(long)
        .mark_line()
        .encode(
            x=alt.X(f"{x}:Q", title=x),
            y=alt.Y("value:Q", title=None),
            color=alt.Color("metric:N", title="Metric"),
        )
        .properties(title=title, width=480, height=240)
    )


def score_histogram(scores: Sequence[float], threshold: Optional[float], title: str) -> alt.Chart:
    """Score distribution with the flagging threshold as a rule."""
    df = _thin(pd.DataFrame({"score": list(scores)}))
    bars = alt.Chart(df).mark_bar().encode(
        x=alt.X("score:Q", bin=alt.Bin(maxbins=40), title="Reward score"),
        y=alt.Y("count():Q", title="Samples"),
    )
    if threshold is None or not pd.notna(threshold) or abs(threshold) == float("inf"):
        return bars.properties(title=title, width=480, height=240)
    rule = alt.Chart(pd.DataFrame({"threshold": [threshold]})).mark_rule(color="red").encode(x="threshold:Q")
    return (bars + rule).properties(title=title, width=480, height=240)


def save_chart(chart: Optional[alt.TopLevelMixin], path) -> Optional[Path]:
    if chart is None:
        return None
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(chart.to_json(indent=2), encoding="utf-8")
    os.replace(tmp, path)
    logger.info(f"Wrote chart {path}")
    return path
