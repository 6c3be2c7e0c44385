"""Writing run reports: step rows, summary JSON and the accuracy curve."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from acm.core import PredictionOutcome
from acm.harness.experiment import RunReport

STEP_COLUMNS = ("timestep", "predicted", "truth", "correct", "predict_ns", "learn_ns", "current_k")


def outcome_row(o: PredictionOutcome) -> dict:
    return {
        "timestep": o.timestep,
        "predicted": o.predicted,
        "truth": o.truth,
        "correct": int(o.correct),
        "predict_ns": o.predict_latency,
        "learn_ns": o.learn_latency,
        "current_k": o.current_k,
    }


def emit_report(report: RunReport, out_dir, fmt: str = "csv") -> dict[str, Path]:
    """Write ``steps.{csv,jsonl}``, ``summary.json``, ``curve.csv`` and ``config.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "steps": out / f"steps.{fmt}",
        "summary": out / "summary.json",
        "curve": out / "curve.csv",
        "config": out / "config.json",
    }
    if fmt == "csv":
        with open(paths["steps"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(STEP_COLUMNS)
            for o in report.log:
                row = outcome_row(o)
                w.writerow(["" if row[c] is None else row[c] for c in STEP_COLUMNS])
    elif fmt == "jsonl":
        with open(paths["steps"], "w") as fh:
            for o in report.log:
                fh.write(json.dumps(outcome_row(o)) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")

    paths["summary"].write_text(json.dumps(report.summary, indent=2, sort_keys=True) + "\n")
    with open(paths["curve"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "a_t"))
        for t, a in enumerate(report.accuracy_curve(), start=1):
            w.writerow((t, repr(float(a))))
    paths["config"].write_text(json.dumps(report.config.to_dict(), indent=2, sort_keys=True) + "\n")
    return paths


def read_step_rows(path) -> list[PredictionOutcome]:
    """Parse a steps file written by :func:`emit_report` back into outcomes."""
    path = Path(path)
    if path.suffix == ".jsonl":
        raw = [json.loads(line) for line in path.read_text().splitlines() if line]
    else:
        with open(path, newline="") as fh:
            raw = list(csv.DictReader(fh))
    out = []
    for r in raw:
        k = r["current_k"]
        out.append(PredictionOutcome(
            timestep=int(r["timestep"]),
            predicted=int(r["predicted"]),
            truth=int(r["truth"]),
            correct=bool(int(r["correct"])),
            predict_latency=int(r["predict_ns"]),
            learn_latency=int(r["learn_ns"]),
            current_k=None if k in ("", None) else int(k),
        ))
    return out
