"""Boundary matching and precision/recall/F1 metrics.

A predicted timestamp matches a ground-truth timestamp when their relative
distance (absolute error divided by video duration) is at or below a
threshold; the official operating point is a 5% threshold.  An
absolute-window variant admits pairs by raw ``|p - g| <= window`` seconds
instead.

Two pairing policies are provided:

* ``optimal`` - maximum-cardinality one-to-one matching; among maximum
  matchings the one with minimum total distance, ties broken by
  lexicographically smallest (prediction index, ground-truth index) pairs.
  Because pair costs are absolute differences of points on a line, some
  optimal matching is always non-crossing, and the lexicographically
  smallest optimal matching is itself non-crossing (uncrossing a crossing
  pair never increases cost and strictly lowers lexicographic order), so the
  matcher runs an O(P*G) suffix dynamic program over non-crossing matchings
  and reconstructs pairs greedily in lexicographic order.
* ``greedy_nearest`` - scan predictions in ascending order, each taking the
  nearest still-unmatched admissible ground truth (earlier one on distance
  ties).  Provided for compatibility comparisons; it can under-match.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Equal-cost tolerance: total costs are <= len(pairs) with each term in [0,1],
# so 1e-9 absolute separates genuine ties from rounding noise.
_COST_TOL = 1e-9

POLICIES = ("optimal", "greedy_nearest")


@dataclass
class MatchResult:
    pairs: list = field(default_factory=list)  # (prediction index, gt index)
    rel_distances: list = field(default_factory=list)  # aligned with pairs
    num_predictions: int = 0
    num_ground_truth: int = 0


@dataclass
class PRF:
    precision: float
    recall: float
    f1: float
    threshold: float


def rel_dis(predicted: float, ground_truth: float, duration: float) -> float:
    """Relative distance: |predicted - ground_truth| / duration."""
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    return abs(predicted - ground_truth) / duration


def _check_sorted(values, name):
    for a, b in zip(values, values[1:]):
        if b <= a:
            raise ValueError(f"{name} must be strictly ascending")


def _suffix_table(P, G, dist, limit):
    """Suffix DP over non-crossing matchings.

    card[i][j], cost[i][j]: maximum pair count over predictions i.. and
    ground truths j.., and the minimum total distance achieving it.
    """
    card = [[0] * (G + 1) for _ in range(P + 1)]
    cost = [[0.0] * (G + 1) for _ in range(P + 1)]
    for i in range(P - 1, -1, -1):
        row_d = dist[i]
        for j in range(G - 1, -1, -1):
            best_c, best_w = card[i + 1][j], cost[i + 1][j]
            c, w = card[i][j + 1], cost[i][j + 1]
            if c > best_c or (c == best_c and w < best_w):
                best_c, best_w = c, w
            if row_d[j] <= limit:
                c = card[i + 1][j + 1] + 1
                w = cost[i + 1][j + 1] + row_d[j]
                if c > best_c or (c == best_c and w < best_w - _COST_TOL):
                    best_c, best_w = c, w
            card[i][j] = best_c
            cost[i][j] = best_w
    return card, cost


def _match_optimal(dist, limit):
    P, G = dist.shape
    card, cost = _suffix_table(P, G, dist, limit)
    target_card = card[0][0]
    target_cost = cost[0][0]
    pairs = []
    spent = 0.0
    i = j = 0
    while len(pairs) < target_card:
        found = False
        for ii in range(i, P):
            for jj in range(j, G):
                if dist[ii][jj] > limit:
                    continue
                c = len(pairs) + 1 + card[ii + 1][jj + 1]
                w = spent + dist[ii][jj] + cost[ii + 1][jj + 1]
                if c == target_card and abs(w - target_cost) <= _COST_TOL:
                    pairs.append((ii, jj))
                    spent += dist[ii][jj]
                    i, j = ii + 1, jj + 1
                    found = True
                    break
            if found:
                break
        if not found:  # numerically unreachable; guards a broken table
            raise RuntimeError("optimal matching reconstruction failed")
    return pairs


def _match_greedy(dist, limit):
    P, G = dist.shape
    taken = [False] * G
    pairs = []
    for i in range(P):
        best_j = -1
        best_d = None
        for j in range(G):
            if taken[j] or dist[i][j] > limit:
                continue
            if best_d is None or dist[i][j] < best_d:
                best_d = dist[i][j]
                best_j = j
        if best_j >= 0:
            taken[best_j] = True
            pairs.append((i, best_j))
    return pairs


def _match(predictions, ground_truth, dist, limit, policy):
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}, expected one of {POLICIES}")
    _check_sorted(predictions, "predictions")
    _check_sorted(ground_truth, "ground_truth")
    if len(predictions) == 0 or len(ground_truth) == 0:
        pairs = []
    elif policy == "optimal":
        pairs = _match_optimal(dist, limit)
    else:
        pairs = _match_greedy(dist, limit)
    return MatchResult(
        pairs=pairs,
        rel_distances=[float(dist[i][j]) for i, j in pairs],
        num_predictions=len(predictions),
        num_ground_truth=len(ground_truth),
    )


def match_boundaries(predictions, ground_truth, duration, threshold,
                     policy="optimal") -> MatchResult:
    """Match predicted to ground-truth timestamps at a relative-distance threshold."""
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0,1], got {threshold}")
    p = np.asarray(predictions, dtype=float)
    g = np.asarray(ground_truth, dtype=float)
    dist = np.abs(p[:, None] - g[None, :]) / duration
    return _match(p, g, dist, threshold, policy)


def absolute_window_match(predictions, ground_truth, window,
                          policy="optimal") -> MatchResult:
    """Match with the duration-independent rule ``|p - g| <= window`` seconds.

    ``rel_distances`` in the result hold raw second offsets of the pairs.
    """
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    p = np.asarray(predictions, dtype=float)
    g = np.asarray(ground_truth, dtype=float)
    dist = np.abs(p[:, None] - g[None, :])
    return _match(p, g, dist, window, policy)


def prf_from_match(match: MatchResult, threshold: float = 0.0) -> PRF:
    """Precision/recall/F1 from a match; zero predictions or GT give 0 by convention."""
    n = len(match.pairs)
    precision = n / match.num_predictions if match.num_predictions else 0.0
    recall = n / match.num_ground_truth if match.num_ground_truth else 0.0
    return PRF(precision, recall, f1_from_pr(precision, recall), threshold)


def f1_from_pr(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall (0 when both are 0).

    Works on any common scale - fractions or percentages in, same scale out.
    """
    if precision < 0 or recall < 0:
        raise ValueError("precision and recall must be non-negative")
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def sweep_thresholds(predictions, ground_truth, duration, thresholds,
                     policy="optimal"):
    """One PRF per threshold (ascending, each in (0,1]) with the given policy."""
    thresholds = list(thresholds)
    if not thresholds:
        raise ValueError("threshold list must be non-empty")
    for a, b in zip(thresholds, thresholds[1:]):
        if b <= a:
            raise ValueError("thresholds must be strictly ascending")
    out = []
    for t in thresholds:
        m = match_boundaries(predictions, ground_truth, duration, t, policy)
        out.append(prf_from_match(m, threshold=t))
    return out


@dataclass
class ClassReport:
    top: list  # (class_label, mean_f1) descending
    bottom: list  # (class_label, mean_f1) ascending
    k_clamped: bool = False  # True when k exceeded the number of classes


def per_class_report(per_video_f1, classes, k) -> ClassReport:
    """Mean per-video F1 by class; top-k descending and bottom-k ascending.

    ``per_video_f1`` maps video_id -> F1 at the primary threshold and
    ``classes`` maps video_id -> class label.  Ties order by class name.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    sums = {}
    counts = {}
    for vid, f1 in per_video_f1.items():
        if vid not in classes:
            raise ValueError(f"video {vid!r} has no class label")
        label = classes[vid]
        sums[label] = sums.get(label, 0.0) + f1
        counts[label] = counts.get(label, 0) + 1
    means = [(label, sums[label] / counts[label]) for label in sums]
    clamped = k > len(means)
    kk = min(k, len(means))
    top = sorted(means, key=lambda lv: (-lv[1], lv[0]))[:kk]
    bottom = sorted(means, key=lambda lv: (lv[1], lv[0]))[:kk]
    return ClassReport(top=top, bottom=bottom, k_clamped=clamped)


@dataclass
class EvalReport:
    global_prf: list  # PRF per threshold, micro-aggregated over videos
    per_video: dict  # video_id -> list of PRF over thresholds
    per_class: list  # (class_label, mean per-video F1 at the primary threshold)
    mode: str  # "relative" | "absolute_window"
    primary_threshold: float


def evaluate_corpus(predictions, ground_truth, durations, classes=None,
                    thresholds=(0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5),
                    primary_threshold=0.05, mode="relative", window=None,
                    policy="optimal", class_metric="f1") -> EvalReport:
    """Evaluate per-video boundary lists over a corpus.

    ``predictions`` and ``ground_truth`` map video_id -> ascending timestamp
    list; videos missing from ``predictions`` count as empty prediction
    lists.  Global PRF sums matched/predicted/ground-truth counts over
    videos before dividing, so aggregation is independent of video order.
    In ``absolute_window`` mode the single ``window`` (seconds) replaces the
    threshold sweep and is echoed in the threshold column.  Per-class means
    aggregate per-video F1 at the primary threshold by default;
    ``class_metric="recall"`` aggregates recall instead.
    """
    unknown = sorted(set(predictions) - set(ground_truth))
    if unknown:
        raise KeyError(f"predictions reference unknown video_id(s): {unknown}")
    if mode == "relative":
        grid = list(thresholds)
        if not grid:
            raise ValueError("threshold list must be non-empty")
        for a, b in zip(grid, grid[1:]):
            if b <= a:
                raise ValueError("thresholds must be strictly ascending")
        if primary_threshold not in grid:
            grid = sorted(set(grid) | {primary_threshold})
    elif mode == "absolute_window":
        if window is None or window <= 0:
            raise ValueError("absolute_window mode needs a positive window")
        grid = [window]
        primary_threshold = window
    else:
        raise ValueError(f"unknown mode {mode!r}")

    per_video = {}
    totals = {t: [0, 0, 0] for t in grid}  # matched, preds, gts
    video_ids = sorted(ground_truth)
    for vid in video_ids:
        gt = ground_truth[vid]
        pred = predictions.get(vid, [])
        rows = []
        for t in grid:
            if mode == "relative":
                m = match_boundaries(pred, gt, durations[vid], t, policy)
            else:
                m = absolute_window_match(pred, gt, t, policy)
            rows.append(prf_from_match(m, threshold=t))
            acc = totals[t]
            acc[0] += len(m.pairs)
            acc[1] += m.num_predictions
            acc[2] += m.num_ground_truth
        per_video[vid] = rows

    global_prf = []
    for t in grid:
        matched, n_pred, n_gt = totals[t]
        precision = matched / n_pred if n_pred else 0.0
        recall = matched / n_gt if n_gt else 0.0
        global_prf.append(PRF(precision, recall, f1_from_pr(precision, recall), t))

    per_class = []
    if classes is not None:
        if class_metric not in ("f1", "recall"):
            raise ValueError(f"unknown class_metric {class_metric!r}")
        idx = grid.index(primary_threshold)
        values = {vid: getattr(per_video[vid][idx], class_metric)
                  for vid in video_ids}
        rep = per_class_report(values, classes,
                               k=max(1, len(set(classes.values()))))
        per_class = rep.top  # full descending list
    return EvalReport(global_prf, per_video, per_class, mode, primary_threshold)


def write_global_csv(path, report: EvalReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("threshold,precision,recall,f1\n")
        for r in report.global_prf:
            fh.write(f"{r.threshold:.6g},{r.precision:.6f},{r.recall:.6f},{r.f1:.6f}\n")


def write_per_video_csv(path, report: EvalReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("video_id,threshold,precision,recall,f1\n")
        for vid in sorted(report.per_video):
            for r in report.per_video[vid]:
                fh.write(f"{vid},{r.threshold:.6g},{r.precision:.6f},"
                         f"{r.recall:.6f},{r.f1:.6f}\n")


def write_per_class_csv(path, report: EvalReport, classes) -> None:
    counts = {}
    for vid in report.per_video:
        label = classes[vid]
        counts[label] = counts.get(label, 0) + 1
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("class,mean_f1,n_videos\n")
        for label, mean_f1 in report.per_class:
            fh.write(f"{label},{mean_f1:.6f},{counts[label]}\n")
