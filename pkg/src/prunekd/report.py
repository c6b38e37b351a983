"""Experiment records, aggregation, and report emission.

A report is a list of per-run records plus aggregates computed per grid
cell.  The flat records CSV and the plot-data CSVs are byte-deterministic
given the records (floats are written with shortest round-trip repr and
rows follow a fixed sort order); wall times live only in the JSON report so
repeated runs of the same spec produce byte-identical CSVs.
"""

import os
from dataclasses import asdict, dataclass, field

from .common import fmt_float
from .store import canonical_json

__all__ = ["RunRecord", "ExperimentReport", "aggregate", "emit_report"]

CSV_COLUMNS = (
    "seed", "method", "f", "alpha", "tau", "teacher_width",
    "student_acc", "baseline_acc",
    "dataset_hash", "scores_hash", "prune_hash", "cache_hash",
)


@dataclass
class RunRecord:
    """One (seed x grid cell) outcome with the hashes of every artifact
    that produced it."""

    seed: int
    method: str
    f: float
    alpha: float
    tau: float
    teacher_width: int
    student_acc: float
    baseline_acc: float
    dataset_hash: str = ""
    scores_hash: str = ""
    prune_hash: str = ""
    cache_hash: str = ""
    wall_time_s: float = 0.0

    def sort_key(self):
        return (self.method, self.f, self.alpha, self.teacher_width, self.seed)

    def csv_row(self):
        return ",".join([
            str(self.seed), self.method, fmt_float(self.f), fmt_float(self.alpha),
            fmt_float(self.tau), str(self.teacher_width),
            fmt_float(self.student_acc), fmt_float(self.baseline_acc),
            self.dataset_hash, self.scores_hash, self.prune_hash, self.cache_hash,
        ])


@dataclass
class ExperimentReport:
    records: list = field(default_factory=list)
    teacher_acc: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def sorted_records(self):
        return sorted(self.records, key=RunRecord.sort_key)


def aggregate(records):
    """Per-cell means/stds over seeds, summed in record sort order.

    Cells are keyed by (method, f, alpha, teacher_width); reloading the flat
    CSV and re-running this function reproduces the aggregates exactly.
    """
    cells = {}
    for rec in sorted(records, key=RunRecord.sort_key):
        cells.setdefault((rec.method, rec.f, rec.alpha, rec.teacher_width), []).append(rec)
    out = {}
    for key, recs in cells.items():
        student = [r.student_acc for r in recs]
        baseline = [r.baseline_acc for r in recs]
        out[key] = {
            "n": len(recs),
            "student_mean": _mean(student),
            "student_std": _std(student),
            "baseline_mean": _mean(baseline),
            "baseline_std": _std(baseline),
        }
    return out


def _mean(values):
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


def _std(values):
    if len(values) < 2:
        return 0.0
    m = _mean(values)
    total = 0.0
    for v in values:
        total += (v - m) ** 2
    return (total / (len(values) - 1)) ** 0.5


def records_csv_text(records):
    lines = [",".join(CSV_COLUMNS)]
    for rec in sorted(records, key=RunRecord.sort_key):
        lines.append(rec.csv_row())
    return "\n".join(lines) + "\n"


def load_records_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected records header")
    records = []
    for line in lines[1:]:
        if not line:
            continue
        c = line.split(",")
        records.append(RunRecord(
            seed=int(c[0]), method=c[1], f=float(c[2]), alpha=float(c[3]),
            tau=float(c[4]), teacher_width=int(c[5]),
            student_acc=float(c[6]), baseline_acc=float(c[7]),
            dataset_hash=c[8], scores_hash=c[9], prune_hash=c[10],
            cache_hash=c[11],
        ))
    return records


def plot_data_text(records, value):
    """Per-figure plot data: x = f, one (mean, std) column pair per
    (method, alpha, teacher_width) series."""
    aggs = aggregate(records)
    series = sorted({(m, a, w) for (m, _, a, w) in aggs})
    fractions = sorted({f for (_, f, _, _) in aggs})

    def series_name(m, a, w):
        name = f"{m}_a{fmt_float(a)}"
        widths = {wd for (_, _, _, wd) in aggs}
        if len(widths) > 1:
            name += f"_w{w}"
        return name

    header = ["f"]
    for m, a, w in series:
        header += [f"{series_name(m, a, w)}_mean", f"{series_name(m, a, w)}_std"]
    lines = [",".join(header)]
    for f in fractions:
        row = [fmt_float(f)]
        for m, a, w in series:
            cell = aggs.get((m, f, a, w))
            if cell is None:
                row += ["", ""]
            else:
                row += [fmt_float(cell[f"{value}_mean"]), fmt_float(cell[f"{value}_std"])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def emit_report(report, out_dir, prefix="report"):
    """Write the JSON report, the flat records CSV, and plot-data CSVs.

    Returns the mapping of emitted file names to paths.  Valid files with
    headers only come out of an empty record list.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    csv_path = os.path.join(out_dir, f"{prefix}_records.csv")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(records_csv_text(report.records))
    paths["records"] = csv_path

    for value in ("student", "baseline"):
        p = os.path.join(out_dir, f"{prefix}_plot_{value}.csv")
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(plot_data_text(report.records, value))
        paths[f"plot_{value}"] = p

    aggs = aggregate(report.records)
    json_obj = {
        "records": [asdict(r) for r in report.sorted_records()],
        "aggregates": [
            {
                "method": m, "f": f, "alpha": a, "teacher_width": w,
                **aggs[(m, f, a, w)],
            }
            for (m, f, a, w) in sorted(aggs)
        ],
        "teacher_acc": {str(k): v for k, v in sorted(report.teacher_acc.items())},
        "notes": report.notes,
        "timing": {
            "total_wall_time_s": sum(r.wall_time_s for r in report.records),
        },
    }
    json_path = os.path.join(out_dir, f"{prefix}.json")
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(json_obj))
    paths["json"] = json_path
    return paths
