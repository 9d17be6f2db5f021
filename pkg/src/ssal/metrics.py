"""Detection metrics: frame IoU, tube IoU, average precision, f-mAP/v-mAP report."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import DetOutput, detect_boxes


@dataclass
class APResult:
    class_id: int
    precision: list
    recall: list
    ap: float


@dataclass
class MetricsReport:
    f_map50: float
    v_map20: float
    v_map50: float
    mask_iou: float
    per_class_f50: dict = field(default_factory=dict)
    per_class_v50: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "f_map50": self.f_map50,
            "v_map20": self.v_map20,
            "v_map50": self.v_map50,
            "mask_iou": self.mask_iou,
        }


def _check_box(box):
    if box is None:
        return None
    x0, y0, x1, y1 = box
    if x0 > x1 or y0 > y1:
        raise ValueError(f"malformed box {box}")
    return box


def frame_iou(box_a, box_b) -> float:
    """IoU of two inclusive pixel boxes; empty (None) boxes give 0."""
    box_a, box_b = _check_box(box_a), _check_box(box_b)
    if box_a is None or box_b is None:
        return 0.0
    ax0, ay0, ax1, ay1 = box_a
    bx0, by0, bx1, by1 = box_b
    ix0, iy0 = max(ax0, bx0), max(ay0, by0)
    ix1, iy1 = min(ax1, bx1), min(ay1, by1)
    if ix0 > ix1 or iy0 > iy1:
        return 0.0
    inter = (ix1 - ix0 + 1) * (iy1 - iy0 + 1)
    area_a = (ax1 - ax0 + 1) * (ay1 - ay0 + 1)
    area_b = (bx1 - bx0 + 1) * (by1 - by0 + 1)
    return inter / (area_a + area_b - inter)


def tube_iou(pred_boxes: list, gt_boxes: list) -> float:
    """Spatio-temporal IoU: temporal IoU times mean spatial IoU over shared frames.

    A tube's temporal extent is the set of frames where it has a box; frames
    missing on either side are allowed.
    """
    if len(pred_boxes) != len(gt_boxes):
        raise ValueError(
            f"tube length mismatch: {len(pred_boxes)} vs {len(gt_boxes)} frames"
        )
    t_pred = {i for i, b in enumerate(pred_boxes) if b is not None}
    t_gt = {i for i, b in enumerate(gt_boxes) if b is not None}
    inter = t_pred & t_gt
    union = t_pred | t_gt
    if not inter or not union:
        return 0.0
    spatial = float(np.mean([frame_iou(pred_boxes[i], gt_boxes[i]) for i in sorted(inter)]))
    return (len(inter) / len(union)) * spatial


def average_precision(detections: list, gt_count: int, tau: float) -> APResult:
    """All-point interpolated AP from (confidence, iou[, gt_key]) detections.

    Detections are greedily matched in descending confidence order; one with
    iou >= tau counts as a true positive if its ground-truth key is still
    unmatched. Two-tuples get a unique implicit key each.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"IoU threshold must be in (0, 1), got {tau}")
    if gt_count == 0:
        return APResult(class_id=-1, precision=[], recall=[], ap=0.0)
    order = sorted(range(len(detections)), key=lambda i: (-detections[i][0], i))
    matched = set()
    tp = np.zeros(len(detections))
    for rank, i in enumerate(order):
        det = detections[i]
        conf, iou = det[0], det[1]
        key = det[2] if len(det) > 2 else ("__det__", i)
        if iou >= tau and key not in matched:
            matched.add(key)
            tp[rank] = 1.0
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(1.0 - tp)
    recall = cum_tp / gt_count
    precision = cum_tp / np.maximum(cum_tp + cum_fp, 1e-12)
    # interpolate precision to be nonincreasing, then integrate over recall
    interp = precision.copy()
    for i in range(len(interp) - 2, -1, -1):
        interp[i] = max(interp[i], interp[i + 1])
    ap = 0.0
    prev_r = 0.0
    for r, p in zip(recall, interp):
        ap += (r - prev_r) * p
        prev_r = r
    return APResult(class_id=-1, precision=list(precision), recall=list(recall), ap=float(ap))


def binary_mask_iou(pred: np.ndarray, gt: np.ndarray) -> float:
    inter = np.logical_and(pred, gt).sum()
    union = np.logical_or(pred, gt).sum()
    if union == 0:
        return 1.0
    return float(inter / union)


def report(
    outputs: dict,
    annotations: dict,
    num_classes: int,
    thresh: float = 0.5,
    v_taus: tuple = (0.2, 0.5),
) -> MetricsReport:
    """Aggregate test-split metrics from per-video model outputs.

    `outputs` maps video id -> DetOutput, `annotations` maps video id ->
    the ground-truth annotation. One detection per frame and one tube per
    video, as produced by `detect_boxes`.
    """
    vids = sorted(outputs.keys())
    per_video = {vid: detect_boxes(outputs[vid], thresh) for vid in vids}

    frame_dets = {c: [] for c in range(num_classes)}
    frame_gt_count = {c: 0 for c in range(num_classes)}
    tube_dets = {tau: {c: [] for c in range(num_classes)} for tau in v_taus}
    tube_gt_count = {c: 0 for c in range(num_classes)}
    mask_ious = []

    for vid in vids:
        ann = annotations[vid]
        dets = per_video[vid]
        gt_boxes = ann.boxes
        for f, gt_box in enumerate(gt_boxes):
            if gt_box is not None:
                frame_gt_count[ann.class_id] += 1
        for f, det in enumerate(dets):
            if det is None:
                continue
            gt_box = gt_boxes[f] if ann.class_id == det.class_id else None
            iou = frame_iou(det.box, gt_box) if gt_box is not None else 0.0
            frame_dets[det.class_id].append((det.confidence, iou, (vid, f)))

        tube_gt_count[ann.class_id] += 1
        det_frames = [d.box if d is not None else None for d in dets]
        confidences = [d.confidence for d in dets if d is not None]
        if confidences:
            tube_class = dets[next(i for i, d in enumerate(dets) if d is not None)].class_id
            tube_conf = float(np.mean(confidences))
            for tau in v_taus:
                iou = tube_iou(det_frames, gt_boxes) if tube_class == ann.class_id else 0.0
                tube_dets[tau][tube_class].append((tube_conf, iou, vid))

        pred_mask = outputs[vid].det_map > thresh
        mask_ious.append(binary_mask_iou(pred_mask, ann.masks))

    def _mean_ap(dets_by_class, gt_by_class, tau):
        aps = {}
        for c in range(num_classes):
            if gt_by_class[c] == 0 and not dets_by_class[c]:
                continue  # class absent entirely: excluded from the mean
            aps[c] = average_precision(dets_by_class[c], gt_by_class[c], tau).ap
        return aps

    f50 = _mean_ap(frame_dets, frame_gt_count, 0.5)
    v_by_tau = {tau: _mean_ap(tube_dets[tau], tube_gt_count, tau) for tau in v_taus}

    def _mean(d):
        return float(np.mean(list(d.values()))) if d else 0.0

    return MetricsReport(
        f_map50=_mean(f50),
        v_map20=_mean(v_by_tau.get(0.2, {})),
        v_map50=_mean(v_by_tau.get(0.5, {})),
        mask_iou=float(np.mean(mask_ious)) if mask_ious else 0.0,
        per_class_f50=f50,
        per_class_v50=v_by_tau.get(0.5, {}),
    )
