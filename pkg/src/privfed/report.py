"""Experiment report types and their three file renderings.

* ``report.json``: full machine-readable report (sorted keys, stable floats)
* ``table.txt``: fixed-width accuracy/F1 table, one row per model
* ``trajectory.csv``: ``round,client,dp_flag,accuracy,f1`` per round
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass
from typing import Optional

FORMAT_VERSION = 1
REPORT_FILE = "report.json"
TABLE_FILE = "table.txt"
TRAJECTORY_FILE = "trajectory.csv"

ENCRYPTION_IMPACTS = ("identical", "divergent")


@dataclass(frozen=True)
class ClientRoundStats:
    client_id: int
    accuracy: float
    f1: float
    model_bytes_len: int
    token_len: int


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    per_client: tuple[ClientRoundStats, ...]
    weights: tuple[float, ...]
    global_accuracy: float
    global_f1: float
    dp_global_accuracy: float
    dp_global_f1: float


@dataclass(frozen=True)
class ReportRow:
    name: str
    accuracy: float
    f1: float
    dp_accuracy: Optional[float]
    dp_f1: Optional[float]
    dp_impact: Optional[float]
    encryption_impact: Optional[str]


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    rows: tuple[ReportRow, ...]
    trajectory: tuple[RoundRecord, ...]
    f1_degenerate: bool = False
    n_train: int = 0
    n_test: int = 0
    client_sizes: tuple[int, ...] = ()
    format_version: int = FORMAT_VERSION

    def row(self, name: str) -> ReportRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def client_rows(self) -> tuple[ReportRow, ...]:
        return self.rows[:-2]

    @property
    def global_row(self) -> ReportRow:
        return self.rows[-2]

    @property
    def baseline_row(self) -> ReportRow:
        return self.rows[-1]

    def notes(self) -> list[str]:
        out = [
            "DP: a single release at epsilon={} ({}); no accounting across repeated queries.".format(
                self.config["dp"]["epsilon"], self.config["dp"]["mechanism"]),
        ]
        if self.f1_degenerate:
            out.append("F1: at least one model had no positives in truth or prediction; F1 set to 0.")
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["notes"] = self.notes()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _signed(v: Optional[float]) -> str:
    return "N/A" if v is None else f"{v:+.4f}"


def _enc(v: Optional[str]) -> str:
    if v is None:
        return "N/A"
    return "Minimal" if v == "identical" else "Divergent"


def render_table(report: ExperimentReport) -> str:
    header = ("Model", "Accuracy", "F1 Score", "Impact of DP", "Impact of Encryption")
    body = [
        (r.name, f"{r.accuracy:.4f}", f"{r.f1:.4f}", _signed(r.dp_impact), _enc(r.encryption_impact))
        for r in report.rows
    ]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]

    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    out = [line(header), "  ".join("-" * w for w in widths)]
    out += [line(row) for row in body]
    out += [""] + report.notes()
    return "\n".join(out) + "\n"


def render_trajectory(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "client", "dp_flag", "accuracy", "f1"])
    for rec in report.trajectory:
        for c in rec.per_client:
            w.writerow([rec.round_index, c.client_id, 0, repr(c.accuracy), repr(c.f1)])
        w.writerow([rec.round_index, "global", 0, repr(rec.global_accuracy), repr(rec.global_f1)])
        w.writerow([rec.round_index, "global", 1, repr(rec.dp_global_accuracy), repr(rec.dp_global_f1)])
    return buf.getvalue()


def write_outputs(report: ExperimentReport, output_dir) -> dict[str, str]:
    os.makedirs(output_dir, exist_ok=True)
    files = {
        REPORT_FILE: report.to_json(),
        TABLE_FILE: render_table(report),
        TRAJECTORY_FILE: render_trajectory(report),
    }
    paths = {}
    for name, text in files.items():
        path = os.path.join(output_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths[name] = path
    return paths
