"""Accuracy metrics, confusion matrices, and plain-text result tables."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class EvaluationReport:
    accuracy: float
    per_class_accuracy: list[float | None]   # None where the class is absent
    intra_class_std: float
    confusion: np.ndarray                    # (K, K) counts, rows = truth
    sparsity: float | None = None
    extractor_id: str = ""
    classifier: str = ""
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0


def evaluate(pred, truth, n_classes: int) -> EvaluationReport:
    """Accuracy, per-class accuracy (recall), and their population spread.

    Classes absent from `truth` report no accuracy and stay out of the
    intra-class standard deviation.
    """
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("nothing to evaluate")
    if pred.max() >= n_classes or truth.max() >= n_classes:
        raise ValueError("label index out of range")

    confusion = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(confusion, (truth, pred), 1)

    accuracy = 100.0 * np.trace(confusion) / len(truth)
    per_class: list[float | None] = []
    present = []
    for k in range(n_classes):
        total = confusion[k].sum()
        if total == 0:
            per_class.append(None)
        else:
            acc_k = 100.0 * confusion[k, k] / total
            per_class.append(float(acc_k))
            present.append(acc_k)
    intra_std = float(np.std(present)) if present else 0.0
    return EvaluationReport(accuracy=float(accuracy), per_class_accuracy=per_class,
                            intra_class_std=intra_std, confusion=confusion)


def report_to_json(report: EvaluationReport) -> str:
    """Stable JSON serialization (sorted keys, full float repr)."""
    payload = {
        "accuracy": report.accuracy,
        "per_class_accuracy": report.per_class_accuracy,
        "intra_class_std": report.intra_class_std,
        "confusion": report.confusion.tolist(),
        "sparsity": report.sparsity,
        "extractor_id": report.extractor_id,
        "classifier": report.classifier,
        "hyperparameters": report.hyperparameters,
        "seed": report.seed,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> EvaluationReport:
    obj = json.loads(text)
    return EvaluationReport(
        accuracy=obj["accuracy"],
        per_class_accuracy=obj["per_class_accuracy"],
        intra_class_std=obj["intra_class_std"],
        confusion=np.array(obj["confusion"], dtype=int),
        sparsity=obj["sparsity"],
        extractor_id=obj["extractor_id"],
        classifier=obj["classifier"],
        hyperparameters=obj["hyperparameters"],
        seed=obj["seed"],
    )


def confusion_csv(report: EvaluationReport, class_names: list[str] | None = None) -> str:
    k = report.confusion.shape[0]
    names = class_names if class_names is not None else [str(i) for i in range(k)]
    lines = ["truth\\pred," + ",".join(names)]
    for i in range(k):
        lines.append(names[i] + "," + ",".join(str(v) for v in report.confusion[i]))
    return "\n".join(lines) + "\n"


def _classifier_column(report: EvaluationReport) -> str:
    kind = "ANN" if report.classifier.lower() in ("ann", "mlp") else "SVM"
    return kind + (" LASSO" if report.sparsity is not None else "")


def table_report(reports: list[EvaluationReport]) -> str:
    """Accuracy table: one row per extractor, ANN/SVM columns for raw and
    LASSO-selected features, best cell starred.  A sparsity column appears
    only when some report carries one."""
    if not reports:
        raise ValueError("no reports to tabulate")
    columns = ["ANN", "SVM", "ANN LASSO", "SVM LASSO"]
    rows: dict[str, dict[str, float]] = {}
    sparsities: dict[str, float] = {}
    for rep in reports:
        row = rows.setdefault(rep.extractor_id or "features", {})
        row[_classifier_column(rep)] = rep.accuracy
        if rep.sparsity is not None:
            sparsities[rep.extractor_id or "features"] = rep.sparsity

    used = [c for c in columns if any(c in row for row in rows.values())]
    with_sparsity = bool(sparsities)
    best = max(acc for row in rows.values() for acc in row.values())

    header = ["Extractor"] + [f"{c} [%]" for c in used]
    if with_sparsity:
        header.append("Sparsity [%]")
    table = [header]
    for name, row in rows.items():
        cells = [name]
        for c in used:
            if c not in row:
                cells.append("-")
            else:
                text = f"{row[c]:.2f}"
                cells.append(f"*{text}*" if row[c] == best else text)
        if with_sparsity:
            cells.append(f"{sparsities[name]:.2f}" if name in sparsities else "-")
        table.append(cells)

    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in table]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def sparsity_report(entries: list[tuple[str, float]]) -> str:
    """Sparsity-percentage table, one row per extractor."""
    if not entries:
        raise ValueError("no sparsity entries")
    width = max(len("Extractor"), max(len(name) for name, _ in entries))
    lines = [f"{'Extractor'.ljust(width)}  Sparsity [%]",
             "-" * (width + 14)]
    for name, value in entries:
        lines.append(f"{name.ljust(width)}  {value:.2f}")
    return "\n".join(lines) + "\n"
