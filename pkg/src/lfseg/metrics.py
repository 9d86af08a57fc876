"""Segmentation metrics and the linearity-thresholding baseline."""
from __future__ import annotations

import dataclasses
import io
from typing import Sequence

import numpy as np

from .lightfield import Mask, ScalarMap


@dataclasses.dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f_measure: float


def prf(pred: Mask, gt: Mask) -> PRF:
    """Precision, recall and their harmonic mean over the foreground label.

    Degenerate denominators (empty prediction or ground truth) count as 0.
    """
    if pred.data.shape != gt.data.shape:
        raise ValueError("prediction and ground truth shapes differ")
    p = pred.data.astype(bool)
    g = gt.data.astype(bool)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision, recall, f)


def threshold_baseline(linearity: ScalarMap, th: float, texture: Mask) -> Mask:
    """Foreground = textured pixels whose raw linearity residual is >= th."""
    if not np.isfinite(th):
        raise ValueError("threshold must be finite")
    keep = (linearity.data >= th) & texture.data.astype(bool)
    return Mask(keep.astype(np.uint8))


def compare_report(
    scenes: Sequence[tuple[str, Mask, Sequence[tuple[str, Mask]]]],
    micro: bool = False,
):
    """Score every (scene, method) pair and average per method across scenes.

    ``scenes`` is a list of ``(scene_name, gt, [(method_name, pred), ...])``.
    Macro averaging (mean of per-scene metrics) is the default; ``micro``
    pools the confusion counts instead.  Returns ``(rows, averages, text,
    csv)`` where rows are ``(scene, method, PRF)``.
    """
    rows: list[tuple[str, str, PRF]] = []
    per_method: dict[str, list[tuple[Mask, Mask]]] = {}
    for scene_name, gt, methods in scenes:
        for method_name, pred in methods:
            rows.append((scene_name, method_name, prf(pred, gt)))
            per_method.setdefault(method_name, []).append((pred, gt))

    averages: dict[str, PRF] = {}
    for method_name, pairs in per_method.items():
        if micro:
            pred_all = Mask(np.concatenate([p.data.ravel() for p, _ in pairs])[None, :])
            gt_all = Mask(np.concatenate([g.data.ravel() for _, g in pairs])[None, :])
            averages[method_name] = prf(pred_all, gt_all)
        else:
            scored = [r for _, m, r in rows if m == method_name]
            averages[method_name] = PRF(
                float(np.mean([r.precision for r in scored])),
                float(np.mean([r.recall for r in scored])),
                float(np.mean([r.f_measure for r in scored])),
            )

    text = io.StringIO()
    header = f"{'scene':<16}{'method':<24}{'precision':>10}{'recall':>10}{'f':>10}"
    print(header, file=text)
    print("-" * len(header), file=text)
    for scene_name, method_name, r in rows:
        print(
            f"{scene_name:<16}{method_name:<24}{r.precision:>10.4f}{r.recall:>10.4f}{r.f_measure:>10.4f}",
            file=text,
        )
    for method_name, r in averages.items():
        print(
            f"{'(average)':<16}{method_name:<24}{r.precision:>10.4f}{r.recall:>10.4f}{r.f_measure:>10.4f}",
            file=text,
        )

    csv = io.StringIO()
    print("scene,method,precision,recall,f", file=csv)
    for scene_name, method_name, r in rows:
        print(f"{scene_name},{method_name},{r.precision:.6f},{r.recall:.6f},{r.f_measure:.6f}", file=csv)
    for method_name, r in averages.items():
        print(f"average,{method_name},{r.precision:.6f},{r.recall:.6f},{r.f_measure:.6f}", file=csv)

    return rows, averages, text.getvalue(), csv.getvalue()
