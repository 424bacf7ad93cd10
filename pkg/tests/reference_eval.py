"""Independent brute-force detection evaluator used as a test oracle.

Deliberately shares no code with the library: plain tuples in, dicts out,
naive loops throughout. Matching follows the same contract (predictions by
descending score, unmatched same-category truth with maximal IoU, inclusive
threshold) and AP is the literal 101-level interpolation.
"""

from __future__ import annotations

BoxT = tuple[float, float, float, float]


def box_iou(a: BoxT, b: BoxT) -> float:
    ix1, iy1 = max(a[0], b[0]), max(a[1], b[1])
    ix2, iy2 = min(a[2], b[2]), min(a[3], b[3])
    if ix2 <= ix1 or iy2 <= iy1:
        return 0.0
    inter = (ix2 - ix1) * (iy2 - iy1)
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return inter / union


def match_one_image(preds, truths, threshold):
    """preds: [(box, category, score)], truths: [(box, category)].

    Returns (flags aligned with preds, matched truth count).
    """
    order = sorted(range(len(preds)), key=lambda i: -preds[i][2])
    taken = [False] * len(truths)
    flags = [False] * len(preds)
    for i in order:
        box, category, _score = preds[i]
        best_j = -1
        best_v = -1.0
        for j, (tbox, tcat) in enumerate(truths):
            if taken[j] or tcat != category:
                continue
            v = box_iou(box, tbox)
            if v > best_v:
                best_j, best_v = j, v
        if best_j >= 0 and best_v >= threshold:
            flags[i] = True
            taken[best_j] = True
    return flags, sum(taken)


def ap_101(ranked_flags, num_truths):
    """101-level interpolated AP from flags already in rank order."""
    points = []
    hits = 0
    for k, flag in enumerate(ranked_flags, start=1):
        hits += 1 if flag else 0
        points.append((hits / num_truths, hits / k))
    total = 0.0
    for i in range(101):
        level = i / 100
        best = 0.0
        for recall, precision in points:
            if recall >= level and precision > best:
                best = precision
        total += best
    return total / 101


def evaluate_naive(predictions, truths, thresholds):
    """predictions: {image_id: [(box, category, score)]}, truths: {image_id: [(box, category)]}.

    Returns {"per_threshold": [{"iou_threshold", "ap", "mean_ap", "tp", "fp", "fn"}],
             "aggregate": float}.
    """
    image_ids = sorted(truths)
    cats = sorted({c for boxes in truths.values() for (_b, c) in boxes})
    truth_count = {
        c: sum(1 for boxes in truths.values() for (_b, cc) in boxes if cc == c) for c in cats
    }
    total_preds = sum(len(predictions.get(i, [])) for i in image_ids)
    total_truths = sum(len(truths[i]) for i in image_ids)

    out = []
    for threshold in thresholds:
        matched_total = 0
        pooled = {c: [] for c in cats}  # (score, pool position, flag)
        position = 0
        for image_id in image_ids:
            preds = predictions.get(image_id, [])
            flags, matched = match_one_image(preds, truths[image_id], threshold)
            matched_total += matched
            for (box, category, score), flag in zip(preds, flags):
                if category in pooled:
                    pooled[category].append((score, position, flag))
                position += 1
        ap = {}
        for category in cats:
            rows = sorted(pooled[category], key=lambda r: (-r[0], r[1]))
            ap[category] = ap_101([flag for (_s, _p, flag) in rows], truth_count[category])
        mean_ap = sum(ap.values()) / len(ap) if ap else 0.0
        out.append(
            {
                "iou_threshold": threshold,
                "ap": ap,
                "mean_ap": mean_ap,
                "tp": matched_total,
                "fp": total_preds - matched_total,
                "fn": total_truths - matched_total,
            }
        )
    aggregate = sum(row["mean_ap"] for row in out) / len(out)
    return {"per_threshold": out, "aggregate": aggregate}
