"""Macro-averaged multi-label metrics, Jaccard overlap and breakdown reports.

Conventions: a label with a zero denominator contributes 0 to the relevant
macro average; per-document Jaccard of two empty sets is 1. All reported
values are percentages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


def per_label_confusion(preds, golds, universe):
    """Global TP/FP/FN counts per label."""
    if len(preds) != len(golds):
        raise ValueError("prediction/gold lengths differ")
    counts = {lab: [0, 0, 0] for lab in universe}
    for p, g in zip(preds, golds):
        for lab in p & g:
            if lab in counts:
                counts[lab][0] += 1
        for lab in p - g:
            if lab in counts:
                counts[lab][1] += 1
        for lab in g - p:
            if lab in counts:
                counts[lab][2] += 1
    return counts


def per_label_prf(preds, golds, universe) -> dict[str, dict]:
    table = {}
    for lab, (tp, fp, fn) in per_label_confusion(preds, golds, universe).items():
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        table[lab] = {"precision": 100.0 * precision, "recall": 100.0 * recall,
                      "f1": 100.0 * f1, "support": tp + fn}
    return table


def macro_prf(preds, golds, universe):
    """Unweighted means over the whole label universe, in percent."""
    if not universe:
        raise ValueError("empty label universe")
    table = per_label_prf(preds, golds, universe)
    n = len(universe)
    macro_p = sum(row["precision"] for row in table.values()) / n
    macro_r = sum(row["recall"] for row in table.values()) / n
    macro_f1 = sum(row["f1"] for row in table.values()) / n
    return macro_p, macro_r, macro_f1


def mean_jaccard(preds, golds) -> float:
    """Mean per-document |pred & gold| / |pred | gold|, in percent."""
    if len(preds) != len(golds):
        raise ValueError("prediction/gold lengths differ")
    if not preds:
        raise ValueError("no documents")
    total = 0.0
    for p, g in zip(preds, golds):
        union = p | g
        total += len(p & g) / len(union) if union else 1.0
    return 100.0 * total / len(preds)


def frequency_group_report(per_label: dict[str, dict], citation_freqs: dict[str, int],
                           universe, n_groups: int = 4):
    """Macro-F1 over consecutive groups of labels sorted by descending
    citation frequency (the caller chooses which corpus the counts come from)."""
    position = {lab: i for i, lab in enumerate(universe)}
    order = sorted(universe, key=lambda lab: (-citation_freqs.get(lab, 0), position[lab]))
    size, remainder = divmod(len(order), n_groups)
    groups, start = [], 0
    for gi in range(n_groups):
        length = size + (1 if gi < remainder else 0)
        members = order[start : start + length]
        f1 = sum(per_label[lab]["f1"] for lab in members) / len(members) if members else 0.0
        groups.append({"rank_range": [start + 1, start + length],
                       "labels": members, "macro_f1": f1})
        start += length
    return groups


def per_court_report(preds, golds, courts, universe):
    """Macro metrics within each court partition; empty partitions cannot
    occur (partitions are induced by the documents present)."""
    if not (len(preds) == len(golds) == len(courts)):
        raise ValueError("prediction/gold/court lengths differ")
    by_court: dict[str, list[int]] = {}
    for i, court in enumerate(courts):
        by_court.setdefault(court, []).append(i)
    report = {}
    for court, idx in sorted(by_court.items()):
        p = [preds[i] for i in idx]
        g = [golds[i] for i in idx]
        mp, mr, mf = macro_prf(p, g, universe)
        report[court] = {"n_docs": len(idx), "macro_p": mp, "macro_r": mr, "macro_f1": mf}
    return report


@dataclass
class EvalReport:
    macro_p: float
    macro_r: float
    macro_f1: float
    jaccard: float
    n_docs: int
    per_label: dict = field(default_factory=dict)
    frequency_groups: list = field(default_factory=list)
    per_court: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)

    def summary(self) -> str:
        lines = [
            f"documents      {self.n_docs}",
            f"macro-P        {self.macro_p:.2f}",
            f"macro-R        {self.macro_r:.2f}",
            f"macro-F1       {self.macro_f1:.2f}",
            f"jaccard        {self.jaccard:.2f}",
        ]
        for group in self.frequency_groups:
            lo, hi = group["rank_range"]
            lines.append(f"freq group {lo:>3}-{hi:<3} macro-F1 {group['macro_f1']:.2f}")
        for court, row in self.per_court.items():
            lines.append(f"court {court:<10} macro-F1 {row['macro_f1']:.2f} ({row['n_docs']} docs)")
        return "\n".join(lines)


def evaluate_predictions(preds, golds, universe, courts=None,
                         citation_freqs: dict[str, int] | None = None) -> EvalReport:
    macro_p, macro_r, macro_f1 = macro_prf(preds, golds, universe)
    table = per_label_prf(preds, golds, universe)
    report = EvalReport(macro_p=macro_p, macro_r=macro_r, macro_f1=macro_f1,
                        jaccard=mean_jaccard(preds, golds), n_docs=len(preds),
                        per_label=table)
    if citation_freqs is None:
        citation_freqs = {lab: sum(1 for g in golds if lab in g) for lab in universe}
    report.frequency_groups = frequency_group_report(table, citation_freqs, list(universe))
    if courts is not None:
        report.per_court = per_court_report(preds, golds, courts, universe)
    return report
