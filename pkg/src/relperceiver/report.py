"""Comparison tables over trained checkpoints."""
from __future__ import annotations

import csv
import io
import json
import os
from collections import defaultdict

import numpy as np

from .checkpoint import load_checkpoint
from .config import RunConfig
from .metrics import HIGHER_IS_BETTER, METRIC_NAMES

REPORT_COLUMNS = ("run_id", "arm", "mode", "seed", "task_id", "metric_name", "value",
                  "rel_gain_pct", "runtime_s", "runtime_ratio", "mt_normalized")


def timing_path(checkpoint_path):
    return os.path.splitext(checkpoint_path)[0] + ".timing.json"


def write_timing(checkpoint_path, wall_s):
    """Wall time lives beside the checkpoint so the checkpoint stays reproducible."""
    with open(timing_path(checkpoint_path), "w", encoding="utf-8") as fh:
        json.dump({"wall_s": wall_s}, fh)


def arm_of(cfg):
    if cfg.full_self_attention:
        return "full_self_attention"
    if cfg.no_temporal_sampler:
        return "no_temporal_sampler"
    return "full"


def _runtime(path, header):
    tp = timing_path(path)
    if os.path.exists(tp):
        with open(tp, encoding="utf-8") as fh:
            return float(json.load(fh)["wall_s"])
    w = float(header.get("wall_s", 0.0))
    return w if w > 0 else None


def collect(checkpoints):
    rows = []
    for path in checkpoints:
        _, header = load_checkpoint(path)
        cfg = RunConfig.from_text(header["config"])
        wall = _runtime(path, header)
        for tid in sorted(header["test"]):
            kind = header["tasks"][tid]["kind"]
            rows.append(dict(run_id=header["run_id"], arm=arm_of(cfg), mode=cfg.mode, seed=cfg.seed,
                             task_id=tid, metric_name=METRIC_NAMES[kind],
                             value=float(header["test"][tid]), runtime_s=wall))
    return rows


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else None


def compare(rows, reference_arm="full"):
    """Add relative gain, runtime ratio and multi/single-task ratio to ``rows``.

    Gains are percent change against the mean of the single-task reference arm
    on the same task, signed so that positive always means better.  The runtime
    ratio divides by the reference arm's mean runtime.  ``mt_normalized`` is a
    multi-task value over the mean single-task value for that task and arm.
    """
    ref_val, ref_time, single = defaultdict(list), defaultdict(list), defaultdict(list)
    for r in rows:
        if r["mode"] == "single_task":
            single[(r["arm"], r["task_id"])].append(r["value"])
            if r["arm"] == reference_arm:
                ref_val[r["task_id"]].append(r["value"])
                ref_time[r["task_id"]].append(r["runtime_s"])
    out = []
    for r in rows:
        r = dict(r)
        ref = _mean(ref_val.get(r["task_id"], []))
        gain = None
        if ref not in (None, 0.0):
            sign = 1.0 if HIGHER_IS_BETTER[r["metric_name"]] else -1.0
            gain = 100.0 * sign * (r["value"] - ref) / abs(ref)
        rt = _mean(ref_time.get(r["task_id"], []))
        ratio = r["runtime_s"] / rt if (rt and r["runtime_s"] is not None) else None
        mt = None
        if r["mode"] == "multi_task":
            s = _mean(single.get((r["arm"], r["task_id"]), []))
            if s:
                mt = r["value"] / s if HIGHER_IS_BETTER[r["metric_name"]] else s / r["value"]
        r.update(rel_gain_pct=gain, runtime_ratio=ratio, mt_normalized=mt)
        out.append(r)
    return out


def summarize(rows):
    """Mean over seeds per (arm, mode, task)."""
    groups = defaultdict(list)
    for r in rows:
        groups[(r["arm"], r["mode"], r["task_id"], r["metric_name"])].append(r)
    out = []
    for (arm, mode, tid, metric), rs in sorted(groups.items()):
        out.append(dict(run_id=f"mean of {len(rs)}", arm=arm, mode=mode, seed="*", task_id=tid,
                        metric_name=metric, value=_mean([r["value"] for r in rs]),
                        rel_gain_pct=_mean([r["rel_gain_pct"] for r in rs]),
                        runtime_s=_mean([r["runtime_s"] for r in rs]),
                        runtime_ratio=_mean([r["runtime_ratio"] for r in rs]),
                        mt_normalized=_mean([r["mt_normalized"] for r in rs])))
    return out


def _cell(v, digits=4):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.{digits}f}"
    return str(v)


def to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow([_cell(r[c], 6) for c in REPORT_COLUMNS])
    return buf.getvalue()


def to_text(rows):
    table = [REPORT_COLUMNS] + [tuple(_cell(r[c]) for c in REPORT_COLUMNS) for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(REPORT_COLUMNS))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def run_report(checkpoints, out_csv=None, reference_arm="full"):
    """Return ``(text, rows)``; per-run rows followed by per-arm means when seeds repeat."""
    if not checkpoints:
        raise ValueError("run_report needs at least one checkpoint")
    rows = compare(collect(checkpoints), reference_arm)
    if len(rows) > 1:
        rows = rows + summarize(rows)
    if out_csv:
        with open(out_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(to_csv(rows))
    return to_text(rows), rows
