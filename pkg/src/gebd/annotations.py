"""Annotation data model: parsing, validation, normalization, ground-truth selection.

A video carries several annotator tracks (typically 5).  Boundaries are
either instants or ranges; ranges normalize to their middle timestamp.  Each
annotator gets an F1-consistency score - the mean F1 of their boundaries
scored against every other annotator's - which drives two ground-truth
selection policies: take the most consistent annotator, or sample one
annotator with probability proportional to consistency.

The file format is a JSON list, one object per video::

    {"video_id": "...", "class_label": "...", "duration": 10.0,
     "fps": 10.0, "num_frames": 100,
     "annotators": [
        {"annotator_id": "a0", "f1_consistency": 0.8,   # optional
         "boundaries": [{"t": 2.5}, {"start": 4.0, "end": 5.0}]},
        ...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .evaluation import match_boundaries, prf_from_match


class AnnotationParseError(ValueError):
    """Malformed annotation file syntax."""


class AnnotationValidationError(ValueError):
    """Schema or invariant violation; message names the video and field."""


@dataclass(frozen=True)
class VideoMeta:
    video_id: str
    class_label: str
    duration: float
    fps: float
    num_frames: int


@dataclass(frozen=True)
class RawBoundary:
    kind: str  # "instant" | "range"
    start: float
    end: float | None = None


@dataclass
class AnnotatorTrack:
    annotator_id: str
    boundaries: list  # of RawBoundary, ascending by start
    f1_consistency: float | None = None


@dataclass
class AnnotationSet:
    meta: VideoMeta
    tracks: list  # of AnnotatorTrack


@dataclass
class BoundaryList:
    video_id: str
    timestamps: list  # strictly ascending seconds


def validate_meta(meta: VideoMeta) -> None:
    vid = meta.video_id
    if meta.duration <= 0:
        raise AnnotationValidationError(f"{vid}: duration must be positive")
    if meta.fps <= 0:
        raise AnnotationValidationError(f"{vid}: fps must be positive")
    if meta.num_frames < 1:
        raise AnnotationValidationError(f"{vid}: num_frames must be >= 1")
    if abs(meta.num_frames / meta.fps - meta.duration) > 1.0 / meta.fps:
        raise AnnotationValidationError(
            f"{vid}: num_frames inconsistent with duration and fps")


def validate_set(aset: AnnotationSet) -> None:
    validate_meta(aset.meta)
    vid = aset.meta.video_id
    dur = aset.meta.duration
    if not aset.tracks:
        raise AnnotationValidationError(f"{vid}: annotators must be non-empty")
    seen = set()
    for track in aset.tracks:
        if track.annotator_id in seen:
            raise AnnotationValidationError(
                f"{vid}: duplicate annotator_id {track.annotator_id!r}")
        seen.add(track.annotator_id)
        prev = None
        for b in track.boundaries:
            if b.kind == "instant":
                if not 0 <= b.start <= dur:
                    raise AnnotationValidationError(
                        f"{vid}/{track.annotator_id}: boundary t out of [0,duration]")
            elif b.kind == "range":
                if b.end is None or not 0 <= b.start <= b.end <= dur:
                    raise AnnotationValidationError(
                        f"{vid}/{track.annotator_id}: range start/end out of order "
                        f"or outside [0,duration]")
            else:
                raise AnnotationValidationError(
                    f"{vid}/{track.annotator_id}: unknown boundary kind {b.kind!r}")
            if prev is not None and b.start < prev:
                raise AnnotationValidationError(
                    f"{vid}/{track.annotator_id}: boundaries not sorted by start")
            prev = b.start
        if track.f1_consistency is not None and not 0 <= track.f1_consistency <= 1:
            raise AnnotationValidationError(
                f"{vid}/{track.annotator_id}: f1_consistency outside [0,1]")


def _boundary_from_json(obj, where):
    if not isinstance(obj, dict):
        raise AnnotationValidationError(f"{where}: boundary entries must be objects")
    if "t" in obj:
        return RawBoundary("instant", float(obj["t"]))
    if "start" in obj and "end" in obj:
        return RawBoundary("range", float(obj["start"]), float(obj["end"]))
    raise AnnotationValidationError(
        f"{where}: boundary needs either 't' or 'start'+'end'")


def parse_annotations(text: str) -> list:
    """Parse annotation JSON text into validated AnnotationSets."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise AnnotationParseError(
            f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    if not isinstance(raw, list):
        raise AnnotationValidationError("top level must be a list of video objects")
    sets = []
    for entry in raw:
        if not isinstance(entry, dict):
            raise AnnotationValidationError("each video entry must be an object")
        vid = entry.get("video_id")
        if not isinstance(vid, str) or not vid:
            raise AnnotationValidationError("entry missing field video_id")
        for key in ("class_label", "duration", "fps", "num_frames", "annotators"):
            if key not in entry:
                raise AnnotationValidationError(f"{vid}: missing field {key}")
        meta = VideoMeta(
            video_id=vid,
            class_label=str(entry["class_label"]),
            duration=float(entry["duration"]),
            fps=float(entry["fps"]),
            num_frames=int(entry["num_frames"]),
        )
        tracks = []
        for ann in entry["annotators"]:
            if "annotator_id" not in ann:
                raise AnnotationValidationError(f"{vid}: missing field annotator_id")
            where = f"{vid}/{ann['annotator_id']}"
            boundaries = [_boundary_from_json(b, where)
                          for b in ann.get("boundaries", [])]
            cons = ann.get("f1_consistency")
            tracks.append(AnnotatorTrack(
                annotator_id=str(ann["annotator_id"]),
                boundaries=boundaries,
                f1_consistency=None if cons is None else float(cons),
            ))
        aset = AnnotationSet(meta=meta, tracks=tracks)
        validate_set(aset)
        sets.append(aset)
    return sets


def serialize_annotations(sets) -> str:
    """Inverse of :func:`parse_annotations` (field-for-field round trip)."""
    out = []
    for aset in sets:
        annotators = []
        for track in aset.tracks:
            bounds = []
            for b in track.boundaries:
                if b.kind == "instant":
                    bounds.append({"t": b.start})
                else:
                    bounds.append({"start": b.start, "end": b.end})
            ann = {"annotator_id": track.annotator_id, "boundaries": bounds}
            if track.f1_consistency is not None:
                ann["f1_consistency"] = track.f1_consistency
            annotators.append(ann)
        out.append({
            "video_id": aset.meta.video_id,
            "class_label": aset.meta.class_label,
            "duration": aset.meta.duration,
            "fps": aset.meta.fps,
            "num_frames": aset.meta.num_frames,
            "annotators": annotators,
        })
    return json.dumps(out, indent=1)


def load_annotations(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_annotations(fh.read())


def normalize_track(track: AnnotatorTrack, meta: VideoMeta) -> BoundaryList:
    """Instants map to their timestamp, ranges to their midpoint.

    The result is sorted and strictly ascending; timestamps that coincide
    after midpointing collapse to a single boundary.
    """
    stamps = []
    for b in track.boundaries:
        t = b.start if b.kind == "instant" else 0.5 * (b.start + b.end)
        if not 0 <= t <= meta.duration:
            raise AnnotationValidationError(
                f"{meta.video_id}/{track.annotator_id}: normalized timestamp "
                f"{t} outside [0,duration]")
        stamps.append(t)
    stamps.sort()
    dedup = []
    for t in stamps:
        if not dedup or t != dedup[-1]:
            dedup.append(t)
    return BoundaryList(video_id=meta.video_id, timestamps=dedup)


def pairwise_f1(aset: AnnotationSet, threshold: float = 0.05):
    """F1 of annotator i's boundaries scored against annotator j's, all i, j.

    Row i holds annotator i as predictions versus annotator j as ground
    truth; the diagonal is 1 by construction (identical lists).
    """
    n = len(aset.tracks)
    lists = [normalize_track(t, aset.meta).timestamps for t in aset.tracks]
    out = np.ones((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            m = match_boundaries(lists[i], lists[j], aset.meta.duration, threshold)
            out[i, j] = prf_from_match(m).f1
    return out


def compute_f1_consistency(aset: AnnotationSet, threshold: float = 0.05):
    """Mean F1 of each annotator against every other, in track order.

    Returns ``[(annotator_id, consistency), ...]``.  Requires at least two
    tracks; an annotator with no boundaries scores 0 against everyone (the
    degenerate F1 convention).
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0,1), got {threshold}")
    n = len(aset.tracks)
    if n < 2:
        raise ValueError("consistency undefined for fewer than 2 annotators")
    f1 = pairwise_f1(aset, threshold)
    out = []
    for i, track in enumerate(aset.tracks):
        others = [f1[i, j] for j in range(n) if j != i]
        out.append((track.annotator_id, float(np.mean(others))))
    return out


def attach_consistency(aset: AnnotationSet, threshold: float = 0.05) -> None:
    """Compute and store f1_consistency on every track, in place."""
    for track, (_, c) in zip(aset.tracks, compute_f1_consistency(aset, threshold)):
        track.f1_consistency = c


def select_gt_highest(aset: AnnotationSet) -> BoundaryList:
    """Normalized boundaries of the most consistent annotator.

    Ties break to the lexicographically smallest annotator_id.
    """
    for track in aset.tracks:
        if track.f1_consistency is None:
            raise ValueError(
                f"{aset.meta.video_id}/{track.annotator_id}: f1_consistency "
                "missing; run compute_f1_consistency first")
    best = min(aset.tracks, key=lambda t: (-t.f1_consistency, t.annotator_id))
    return normalize_track(best, aset.meta)


FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


def fnv1a64(text: str) -> int:
    """FNV-1a 64-bit hash of the UTF-8 encoding of ``text``."""
    h = FNV64_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * FNV64_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def per_video_rng(seed: int, video_id: str) -> np.random.Generator:
    """Deterministic per-video RNG stream: sub-seed = seed XOR FNV-1a-64(video_id).

    Independent of processing order, so parallel schedules cannot change
    any per-video draw.
    """
    return np.random.default_rng((int(seed) & 0xFFFFFFFFFFFFFFFF) ^ fnv1a64(video_id))


def select_gt_weighted(aset: AnnotationSet, seed: int) -> BoundaryList:
    """Sample one annotator with probability proportional to consistency.

    Uses the per-video RNG stream, so the same (seed, video_id) always picks
    the same track no matter how many other videos were processed before.
    """
    weights = []
    for track in aset.tracks:
        if track.f1_consistency is None:
            raise ValueError(
                f"{aset.meta.video_id}/{track.annotator_id}: f1_consistency "
                "missing; run compute_f1_consistency first")
        weights.append(track.f1_consistency)
    total = sum(weights)
    if total <= 0:
        raise ValueError("weighted selection undefined: all consistencies zero")
    rng = per_video_rng(seed, aset.meta.video_id)
    u = rng.random() * total
    acc = 0.0
    pick = len(weights) - 1
    for i, w in enumerate(weights):
        acc += w
        if u < acc:
            pick = i
            break
    return normalize_track(aset.tracks[pick], aset.meta)
