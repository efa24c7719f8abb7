"""Run artifacts on disk.

A run directory holds::

    config.json          the RunConfig used
    report.json          final metrics (schema_version 1)
    rounds.csv           one row per round: averages, objective terms, edits, loss spike
    nodes.csv            one row per (round, node): losses and test accuracy
    sharing.csv          one row per (round, client): received-sample counts
    shape_log.jsonl      one JSON object per SHAPE edit
    tree_round_<r>.json  tree snapshot after round r

Everything is written deterministically (sorted keys, no timestamps), so
identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import pathlib
from typing import Iterable

from .baselines import BaselineResult
from .data import DataError
from .metrics import MetricsReport
from .orchestrator import SofaResult

REPORT_SCHEMA = 1

ROUND_COLUMNS = ["round", "client_average", "total_average", "objective_total", "objective_term1",
                 "objective_term2", "objective_term3", "edit_count", "loss_spike"]
NODE_COLUMNS = ["round", "node", "kind", "parent", "data_weight", "train_loss_start",
                "train_loss_end", "test_loss", "test_acc"]
SHARING_COLUMNS = ["round", "client", "n_received", "n_same_cluster", "n_cross_cluster"]


def _write_csv(path: pathlib.Path, columns: list[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in columns})


def _write_json(path: pathlib.Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def report_document(label: str, report: MetricsReport, config_dict: dict, **extra) -> dict:
    return {"schema_version": REPORT_SCHEMA, "label": label, "metrics": report.to_dict(),
            "config": config_dict, **extra}


def write_sofa_outputs(out_dir, result: SofaResult, label: str = "sofa") -> pathlib.Path:
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", result.config.to_dict())
    _write_json(out / "report.json", report_document(
        label, result.report, result.config.to_dict(),
        client_average=result.client_average, total_average=result.total_average))
    _write_csv(out / "rounds.csv", ROUND_COLUMNS, (
        {"round": rec.round, "client_average": rec.client_average,
         "total_average": rec.total_average,
         **{f"objective_{k}": v for k, v in rec.objective.items()},
         "edit_count": rec.edit_count, "loss_spike": rec.loss_spike}
        for rec in result.records))
    _write_csv(out / "nodes.csv", NODE_COLUMNS,
               ({"round": rec.round, **row} for rec in result.records for row in rec.nodes))
    _write_csv(out / "sharing.csv", SHARING_COLUMNS,
               ({"round": rec.round, **row} for rec in result.records for row in rec.sharing))
    with open(out / "shape_log.jsonl", "w") as fh:
        for edits in result.edit_logs:
            for edit in edits:
                fh.write(json.dumps(edit, sort_keys=True) + "\n")
    for snap in result.snapshots:
        _write_json(out / f"tree_round_{snap['round']}.json", snap)
    return out


def write_baseline_outputs(out_dir, result: BaselineResult) -> pathlib.Path:
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", result.config.to_dict())
    _write_json(out / "report.json", report_document(
        result.label, result.report, result.config.to_dict(), baseline=result.label))
    _write_csv(out / "rounds.csv", ["round", "client_average", "baseline"],
               ({"round": h["round"], "client_average": h["client_average"], "baseline": result.label}
                for h in result.history))
    return out


def load_report(path) -> tuple[str, MetricsReport]:
    path = pathlib.Path(path)
    if path.is_dir():
        path = path / "report.json"
    doc = json.loads(path.read_text())
    if doc.get("schema_version") != REPORT_SCHEMA:
        raise DataError(f"{path}: unsupported report schema {doc.get('schema_version')!r}")
    return doc.get("label", path.parent.name), MetricsReport.from_dict(doc["metrics"])


def write_comparison(report_a, report_b, out_csv) -> pathlib.Path:
    """Per-client side-by-side accuracies of two runs."""
    label_a, a = load_report(report_a)
    label_b, b = load_report(report_b)
    if label_a == label_b:
        label_a, label_b = f"{label_a}_a", f"{label_b}_b"
    clients = sorted(set(a.per_client) | set(b.per_client))
    rows = [{"client": c, label_a: a.per_client.get(c), label_b: b.per_client.get(c)} for c in clients]
    out = pathlib.Path(out_csv)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["client", label_a, label_b], rows)
    return out


def write_loss_curves(run_dir, out_csv) -> pathlib.Path:
    """Client training-loss traces (start and end of every round) from ``nodes.csv``."""
    with open(pathlib.Path(run_dir) / "nodes.csv", newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r["kind"] == "client"]
    rows.sort(key=lambda r: (int(r["node"]), int(r["round"])))
    out = pathlib.Path(out_csv)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["client", "round", "train_loss_start", "train_loss_end"],
               ({"client": r["node"], "round": r["round"], "train_loss_start": r["train_loss_start"],
                 "train_loss_end": r["train_loss_end"]} for r in rows))
    return out


def write_ablation_table(out_csv, rows: list[dict]) -> pathlib.Path:
    out = pathlib.Path(out_csv)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["label", "client_average", "total_average", "mean_loss_spike"], rows)
    return out
