"""Rotated-box overlap, detection matching, and dataset metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import NonConvexInput, UnknownClass
from .geometry import OrientedBox, is_convex

_MIN_INTERSECTION = 1e-9

TP, FP, IGNORED = "tp", "fp", "ignored"


def _as_box(obj) -> OrientedBox:
    """Accept OrientedBox or anything carrying one under .box."""
    return obj if isinstance(obj, OrientedBox) else obj.box


def _clip_by_edge(points: list[tuple[float, float]], a, b) -> list[tuple[float, float]]:
    """Keep the part of a polygon on the left of directed edge a->b."""
    ax, ay = a
    bx, by = b
    ex, ey = bx - ax, by - ay

    def inside(p):
        return ex * (p[1] - ay) - ey * (p[0] - ax) >= 0.0

    def crossing(p, q):
        dx, dy = q[0] - p[0], q[1] - p[1]
        denom = ex * dy - ey * dx
        if denom == 0.0:
            # pq is parallel to the clip line, so the side test split it
            # only by rounding; the whole segment lies on the line.
            return q
        t = (ex * (ay - p[1]) - ey * (ax - p[0])) / denom
        # Near-parallel edges can push t outside the segment by rounding.
        t = min(max(t, 0.0), 1.0)
        return (p[0] + t * dx, p[1] + t * dy)

    out: list[tuple[float, float]] = []
    for i, p in enumerate(points):
        q = points[(i + 1) % len(points)]
        if inside(p):
            out.append(p)
            if not inside(q):
                out.append(crossing(p, q))
        elif inside(q):
            out.append(crossing(p, q))
    return out


def _polygon_area(points: Sequence[tuple[float, float]]) -> float:
    total = 0.0
    for i, (px, py) in enumerate(points):
        qx, qy = points[(i + 1) % len(points)]
        total += px * qy - qx * py
    return abs(total) / 2.0


def rotated_iou(a: OrientedBox, b: OrientedBox) -> float:
    """Intersection over union of two convex quadrilaterals.

    The intersection polygon comes from clipping one box by the other's
    edges; intersections below 1e-9 square pixels count as empty.
    """
    if not is_convex(a):
        raise NonConvexInput("first box is not convex")
    if not is_convex(b):
        raise NonConvexInput("second box is not convex")
    subject = [(p.x, p.y) for p in a.corners]
    clip = [(p.x, p.y) for p in b.corners]
    for i in range(4):
        subject = _clip_by_edge(subject, clip[i], clip[(i + 1) % 4])
        if not subject:
            return 0.0
    inter = _polygon_area(subject)
    if inter < _MIN_INTERSECTION:
        return 0.0
    return inter / (a.area + b.area - inter)


@dataclass
class MatchResult:
    """Outcome per detection, in descending-score order, plus the miss count.

    outcomes holds "tp", "fp", or "ignored" (best match was a difficult
    ground-truth box, which is excluded from the precision/recall curve).
    """

    outcomes: list[str]
    scores: list[float]
    n_gt: int
    fn: int


def match_detections(
    dets: Sequence,
    gts: Sequence,
    iou_threshold: float = 0.5,
) -> MatchResult:
    """Greedy one-to-one matching, best detections first.

    Detections are visited in descending score order (stable for ties);
    each claims the not-yet-matched same-class ground-truth box of highest
    overlap, provided it reaches the threshold. Difficult ground truth
    never counts as a miss.
    """
    det_boxes = [_as_box(d) for d in dets]
    gt_boxes = [_as_box(g) for g in gts]
    order = sorted(range(len(det_boxes)), key=lambda i: -det_boxes[i].score)
    taken = [False] * len(gt_boxes)
    outcomes: list[str] = []
    scores: list[float] = []
    for i in order:
        det = det_boxes[i]
        best_iou, best_j = 0.0, -1
        for j, gt in enumerate(gt_boxes):
            if taken[j] or gt.class_id != det.class_id:
                continue
            iou = rotated_iou(det, gt)
            if iou > best_iou:
                best_iou, best_j = iou, j
        if best_j >= 0 and best_iou >= iou_threshold:
            taken[best_j] = True
            outcomes.append(IGNORED if gt_boxes[best_j].difficult else TP)
        else:
            outcomes.append(FP)
        scores.append(det.score)
    fn = sum(
        1 for j, gt in enumerate(gt_boxes) if not taken[j] and not gt.difficult
    )
    n_gt = sum(1 for gt in gt_boxes if not gt.difficult)
    return MatchResult(outcomes=outcomes, scores=scores, n_gt=n_gt, fn=fn)


def average_precision(
    tp_flags: Sequence[bool],
    scores: Sequence[float],
    n_gt: int,
    mode: str = "all-point",
) -> float | None:
    """Interpolated average precision over a ranked detection list.

    Returns None when the class is undefined (no ground truth and no
    detections) so callers can skip it; 0.0 when there is no ground truth
    but false positives exist.
    """
    if mode not in ("all-point", "11-point"):
        raise ValueError(f"unknown AP mode {mode!r}")
    if n_gt == 0:
        return None if len(tp_flags) == 0 else 0.0
    order = sorted(range(len(tp_flags)), key=lambda i: -scores[i])
    tp = np.cumsum([1.0 if tp_flags[i] else 0.0 for i in order])
    fp = np.cumsum([0.0 if tp_flags[i] else 1.0 for i in order])
    recall = tp / n_gt
    precision = tp / np.maximum(tp + fp, np.finfo(np.float64).eps)
    if mode == "11-point":
        ap = 0.0
        for r in np.arange(0.0, 1.1, 0.1):
            hits = precision[recall >= r]
            ap += (hits.max() if hits.size else 0.0) / 11.0
        return float(ap)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(mpre.size - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    changed = np.where(mrec[1:] != mrec[:-1])[0]
    return float(((mrec[changed + 1] - mrec[changed]) * mpre[changed + 1]).sum())


@dataclass
class EvalReport:
    """Dataset metrics, either AP-based or micro precision/recall."""

    mode: str
    iou_threshold: float
    counts: dict[str, tuple[int, int, int]]  # class -> (tp, fp, fn)
    per_class_ap: dict[str, float | None] | None = None
    map_score: float | None = None
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None

    def to_json_dict(self) -> dict:
        out: dict = {
            "mode": self.mode,
            "iou_threshold": self.iou_threshold,
            "counts": {k: list(v) for k, v in self.counts.items()},
        }
        if self.mode == "map":
            out["per_class_ap"] = self.per_class_ap
            out["map"] = self.map_score
        else:
            out["precision"] = self.precision
            out["recall"] = self.recall
            out["f1"] = self.f1
        return out

    def format_table(self) -> str:
        rows = []
        if self.mode == "map":
            header = ("class", "ap", "tp", "fp", "fn")
            for name in sorted(self.counts):
                ap = self.per_class_ap.get(name)
                tp, fp, fn = self.counts[name]
                rows.append((name, "-" if ap is None else f"{ap:.4f}", str(tp), str(fp), str(fn)))
            footer = ("mAP", f"{self.map_score:.4f}", "", "", "")
        else:
            header = ("class", "tp", "fp", "fn", "")
            for name in sorted(self.counts):
                tp, fp, fn = self.counts[name]
                rows.append((name, str(tp), str(fp), str(fn), ""))
            footer = (
                "micro",
                f"P={self.precision:.4f}",
                f"R={self.recall:.4f}",
                f"F1={self.f1:.4f}",
                "",
            )
        table = [header, *rows, footer]
        widths = [max(len(r[c]) for r in table) for c in range(len(header))]
        lines = []
        for r in table:
            lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(r)).rstrip())
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines)


def _group_by_image(items) -> Mapping[str, Sequence]:
    if isinstance(items, Mapping):
        return items
    return {"": list(items)}


def evaluate(
    dets,
    gts,
    mode: str = "map",
    iou_threshold: float = 0.5,
    ap_mode: str = "all-point",
    class_names: Sequence[str] | None = None,
) -> EvalReport:
    """Score detections against ground truth.

    dets and gts are either flat sequences (one image) or mappings from
    image id to sequences. mode "map" reports per-class interpolated AP and
    their mean; mode "text" reports micro-averaged precision/recall/F1 at
    the IoU threshold. Matching is always per image and per class.
    """
    if mode not in ("map", "text"):
        raise ValueError(f"unknown eval mode {mode!r}")
    dets_by_image = _group_by_image(dets)
    gts_by_image = _group_by_image(gts)
    highest = -1
    for coll in (*gts_by_image.values(), *dets_by_image.values()):
        for item in coll:
            highest = max(highest, _as_box(item).class_id)
    if class_names is None:
        class_names = [f"class_{i}" for i in range(highest + 1)]
    if highest >= len(class_names):
        raise UnknownClass(
            f"class id {highest} outside vocabulary of {len(class_names)} names"
        )

    per_class_ap: dict[str, float | None] = {}
    counts: dict[str, tuple[int, int, int]] = {}
    total_tp = total_fp = total_fn = 0
    for class_id, name in enumerate(class_names):
        flags: list[bool] = []
        scores: list[float] = []
        n_gt = 0
        tp_count = fp_count = fn_count = 0
        seen_det = False
        for image_id in sorted(set(dets_by_image) | set(gts_by_image)):
            image_dets = [
                d for d in dets_by_image.get(image_id, ())
                if _as_box(d).class_id == class_id
            ]
            image_gts = [
                g for g in gts_by_image.get(image_id, ())
                if _as_box(g).class_id == class_id
            ]
            if not image_dets and not image_gts:
                continue
            seen_det = seen_det or bool(image_dets)
            result = match_detections(image_dets, image_gts, iou_threshold)
            n_gt += result.n_gt
            fn_count += result.fn
            for outcome, score in zip(result.outcomes, result.scores):
                if outcome == IGNORED:
                    continue
                flags.append(outcome == TP)
                scores.append(score)
                if outcome == TP:
                    tp_count += 1
                else:
                    fp_count += 1
        if n_gt == 0 and not seen_det:
            ap = None  # class absent from this dataset entirely
        else:
            ap = average_precision(flags, scores, n_gt, ap_mode)
        per_class_ap[name] = ap
        counts[name] = (tp_count, fp_count, fn_count)
        total_tp += tp_count
        total_fp += fp_count
        total_fn += fn_count

    if mode == "map":
        defined = [ap for ap in per_class_ap.values() if ap is not None]
        map_score = float(np.mean(defined)) if defined else 0.0
        return EvalReport(
            mode=mode, iou_threshold=iou_threshold, counts=counts,
            per_class_ap=per_class_ap, map_score=map_score,
        )
    precision = total_tp / (total_tp + total_fp) if total_tp + total_fp else 0.0
    recall = total_tp / (total_tp + total_fn) if total_tp + total_fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(
        mode=mode, iou_threshold=iou_threshold, counts=counts,
        precision=precision, recall=recall, f1=f1,
    )
