"""
Pandas views over training logs and reports, rendered as aligned text.
"""
from typing import Any, Dict, List, Mapping, Optional, Sequence

import pandas as pd


def log_frame(log: Sequence[Mapping[str, Any]]) -> pd.DataFrame:
    """Flattens nested per-domain fields into `<field>.<domain>` columns."""
    if not log:
        return pd.DataFrame()
    return pd.json_normalize(list(log), sep=".")


def log_summary(log: Sequence[Mapping[str, Any]], columns: Optional[List[str]] = None) -> Dict[str, Any]:
    """First and last value of each numeric column."""
    df = log_frame(log)
    if df.empty:
        return {}
    numeric = df.select_dtypes("number")
    if columns:
        numeric = numeric[[c for c in columns if c in numeric.columns]]
    summary = {}
    for col in numeric.columns:
        series = numeric[col].dropna()
        if not series.empty:
            summary[col] = {"first": float(series.iloc[0]), "last": float(series.iloc[-1])}
    return summary


def render_table(rows: Sequence[Mapping[str, Any]], columns: Optional[List[str]] = None) -> str:
    df = pd.DataFrame(list(rows), columns=columns)
    if df.empty:
        return "(empty)"
    return df.to_string(index=False, float_format=lambda x: f"{x:.4f}", na_rep="-")


def smoothed(values: Sequence[float], window: int) -> pd.Series:
    """Trailing rolling mean, used to read noisy reward curves."""
    return pd.Series(values, dtype="float64").rolling(window, min_periods=1).mean()
