"""Evaluation reports and run manifests.

Report lines are tab-separated:

    <dataset> <metric> <mode> <value> <num_queries> <seconds> [<manifest hash>]

The manifest hash is derived from the fully resolved command configuration so
every metric line can be traced back to the run that produced it.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class EvalReport:
    metric: str
    mode: str
    value: float
    num_queries: int
    seconds: float


def report_line(
    dataset: str, report: EvalReport, manifest_hash: str | None = None
) -> str:
    cols = [
        dataset,
        report.metric,
        report.mode,
        f"{report.value:.4f}",
        str(report.num_queries),
        f"{report.seconds:.3f}",
    ]
    if manifest_hash is not None:
        cols.append(manifest_hash)
    return "\t".join(cols)


def parse_report_line(line: str) -> tuple[str, EvalReport, str | None]:
    cols = line.rstrip("\n").split("\t")
    if len(cols) not in (6, 7):
        raise ValueError(f"report line has {len(cols)} columns, expected 6 or 7")
    report = EvalReport(
        metric=cols[1],
        mode=cols[2],
        value=float(cols[3]),
        num_queries=int(cols[4]),
        seconds=float(cols[5]),
    )
    return cols[0], report, cols[6] if len(cols) == 7 else None


@dataclass
class RunManifest:
    """Resolved configuration of one command invocation."""

    command: str
    params: dict
    seed: int | None = None
    metrics: list[dict] = field(default_factory=list)
    started: float = field(default_factory=time.time)

    @property
    def hash(self) -> str:
        payload = json.dumps(
            {"command": self.command, "params": self.params, "seed": self.seed},
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def record(self, dataset: str, report: EvalReport) -> None:
        self.metrics.append(
            {
                "dataset": dataset,
                "metric": report.metric,
                "mode": report.mode,
                "value": report.value,
                "num_queries": report.num_queries,
                "seconds": report.seconds,
            }
        )

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "manifest_hash": self.hash,
            "wall_time_seconds": time.time() - self.started,
            "metrics": self.metrics,
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")
