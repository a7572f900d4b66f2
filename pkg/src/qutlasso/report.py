"""Experiment reports: per-replicate records, per-cell summaries, CSV/JSON I/O.

Numbers are written with 17 significant digits so a report read back from
disk compares equal to the one written.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

FLOAT_FORMAT = "%.17g"
SUMMARY_METRICS = ("tpr", "fdr", "oir", "oracle_inclusive", "support_size", "predictive_risk", "sigma_hat",
                   "mse_f_mean")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(f"{v:.17g}")
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class ExperimentReport:
    records: pd.DataFrame
    summary: pd.DataFrame
    cell_keys: tuple = ()
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_records(cls, records, cell_keys=(), metadata=None) -> "ExperimentReport":
        df = pd.DataFrame.from_records(records)
        return cls(df, summarize(df, cell_keys), tuple(cell_keys), dict(metadata or {}))

    def to_csv(self, path, which: str = "summary"):
        frame = self.summary if which == "summary" else self.records
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)

    def to_json(self, path=None) -> str:
        payload = {
            "metadata": _jsonable(self.metadata),
            "cell_keys": list(self.cell_keys),
            "records": _jsonable(self.records.to_dict(orient="records")),
            "summary": _jsonable(self.summary.to_dict(orient="records")),
        }
        text = json.dumps(payload, indent=1)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def read_json(cls, path) -> "ExperimentReport":
        payload = json.loads(Path(path).read_text())

        def frame(rows):
            df = pd.DataFrame.from_records(rows)
            for col in df.columns[df.dtypes == object]:
                if df[col].isin(["inf", "-inf"]).any():
                    df[col] = pd.to_numeric(df[col].replace({"inf": "Infinity", "-inf": "-Infinity"}))
            return df

        return cls(frame(payload["records"]), frame(payload["summary"]), tuple(payload["cell_keys"]),
                   payload["metadata"])


def summarize(df: pd.DataFrame, cell_keys=()) -> pd.DataFrame:
    """Median and mean of each known metric per (cell, rule), plus replicate counts."""
    if df.empty:
        return pd.DataFrame()
    keys = [k for k in cell_keys if k in df.columns]
    if "rule" in df.columns:
        keys.append("rule")
    metrics = [m for m in SUMMARY_METRICS if m in df.columns]
    if not keys:
        df = df.assign(_all=0)
        keys = ["_all"]
    grouped = df.groupby(keys, sort=False)
    parts = [grouped.size().rename("replications")]
    for m in metrics:
        col = df[m].astype(float)
        g = col.groupby([df[k] for k in keys], sort=False)
        parts.append(g.median().rename(f"{m}_median"))
        parts.append(g.mean().rename(f"{m}_mean"))
    out = pd.concat(parts, axis=1).reset_index()
    return out.drop(columns=["_all"], errors="ignore")
