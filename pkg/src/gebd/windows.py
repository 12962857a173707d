"""Temporal windows: candidate timestamps, frame windows, labels, tensors.

A candidate timestamp ``t`` is classified from the ``m`` frames before and
the ``m`` frames after it.  This module turns a directory of per-frame
images (``frame_%06d.pgm``/``.ppm``) plus a per-video flow store into the
two window tensors

    rgb  : (2m, 3, S, S)   frame intensities in [0,1]
    flow : (2m, 2, S, S)   (dx, dy) in resized-pixel units

and assigns each candidate a boundary/background label from a ground-truth
boundary list.  Window frames are consecutive at native fps; candidates
near the clip edges clamp-and-repeat frames so the candidate grid stays
uniform.  Flow slot ``k`` holds the flow between the frames at window
positions ``k-1`` and ``k``; position 0 (and any clamped repeat) is zero.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .annotations import VideoMeta
from .container import read_tensor_file, write_tensor_file
from .flow import FlowConfig, bilinear_resize, farneback_flow, to_gray
from .pnm import read_pnm

logger = logging.getLogger(__name__)

LABEL_BOUNDARY = "boundary"
LABEL_BACKGROUND = "background"


@dataclass(frozen=True)
class WindowSpec:
    m: int = 5
    candidate_stride: float = 0.25
    image_side: int = 224
    label_tolerance: float = 0.125

    def validate(self) -> None:
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.candidate_stride <= 0:
            raise ValueError("candidate_stride must be positive")
        if self.image_side < 32:
            raise ValueError("image_side must be >= 32")
        if self.label_tolerance < 0:
            raise ValueError("label_tolerance must be >= 0")


def frame_name(index: int) -> str:
    return f"frame_{index:06d}"


class FrameSequence:
    """Read-only view of a decoded-frame directory for one video."""

    def __init__(self, meta: VideoMeta, frame_dir):
        self.meta = meta
        self.frame_dir = str(frame_dir)
        self._ext_cache = {}
        count = 0
        for name in os.listdir(self.frame_dir):
            stem, ext = os.path.splitext(name)
            if ext in (".pgm", ".ppm") and stem.startswith("frame_"):
                count += 1
        if count != meta.num_frames:
            raise ValueError(
                f"{meta.video_id}: frame directory holds {count} frames, "
                f"metadata says {meta.num_frames}")

    def _frame_path(self, index: int) -> str:
        if index in self._ext_cache:
            return self._ext_cache[index]
        base = os.path.join(self.frame_dir, frame_name(index))
        for ext in (".pgm", ".ppm"):
            path = base + ext
            if os.path.exists(path):
                self._ext_cache[index] = path
                return path
        raise FileNotFoundError(
            f"{self.meta.video_id}: missing frame index {index} "
            f"({base}.pgm/.ppm)")

    def frame(self, index: int) -> np.ndarray:
        """Frame as (H,W,3) floats in [0,1]; grayscale inputs replicate channels."""
        if not 0 <= index < self.meta.num_frames:
            raise IndexError(f"frame index {index} out of range")
        img = read_pnm(self._frame_path(index))
        if img.ndim == 2:
            img = np.repeat(img[:, :, None], 3, axis=2)
        return img


def candidate_timestamps(meta: VideoMeta, stride: float):
    """Grid t_k = (k + 0.5) * stride for every t_k < duration."""
    if stride <= 0:
        raise ValueError("stride must be positive")
    if stride >= meta.duration:
        raise ValueError(
            f"stride {stride} must be smaller than duration {meta.duration}")
    out = []
    k = 0
    while True:
        t = (k + 0.5) * stride
        if t >= meta.duration:
            break
        out.append(t)
        k += 1
    return out


def window_frame_indices(t: float, meta: VideoMeta, m: int):
    """2m consecutive frame indices around t, clamped at the clip edges."""
    if not 0 <= t < meta.duration:
        raise ValueError(f"t={t} outside [0, duration)")
    last = meta.num_frames - 1
    center = min(max(int(round(t * meta.fps)), 0), last)
    return [min(max(center + off, 0), last) for off in range(-m, m)]


def label_windows(candidates, gt_timestamps, tolerance: float):
    """Label each candidate boundary/background by distance to ground truth.

    A candidate is a boundary when some ground-truth timestamp lies within
    ``tolerance`` seconds.  A ground-truth boundary that no candidate covers
    still claims its nearest candidate (logged, never silently dropped), so
    a too-coarse grid cannot lose boundaries.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    if len(candidates) == 0:
        raise ValueError("candidate list must be non-empty")
    cand = np.asarray(candidates, dtype=float)
    labels = [LABEL_BACKGROUND] * len(cand)
    for g in gt_timestamps:
        dist = np.abs(cand - g)
        covered = dist <= tolerance
        if covered.any():
            for i in np.flatnonzero(covered):
                labels[i] = LABEL_BOUNDARY
        else:
            i = int(np.argmin(dist))
            labels[i] = LABEL_BOUNDARY
            logger.warning(
                "ground-truth boundary at %.3fs is %.3fs from its nearest "
                "candidate (tolerance %.3fs); claiming that candidate",
                g, float(dist[i]), tolerance)
    return labels


class FlowStore:
    """Per-video flow cache: one GEBT file per consecutive frame pair.

    ``pair_flow(k)`` is the flow between frames ``k-1`` and ``k``; it reads
    ``flow_%06d.gebt`` when present, otherwise computes it on demand (and
    writes it back when the store directory is set).
    """

    def __init__(self, seq: FrameSequence, flow_dir=None,
                 config: FlowConfig = FlowConfig()):
        self.seq = seq
        self.flow_dir = str(flow_dir) if flow_dir is not None else None
        self.config = config

    def _path(self, k: int) -> str | None:
        if self.flow_dir is None:
            return None
        return os.path.join(self.flow_dir, f"flow_{k:06d}.gebt")

    def pair_flow(self, k: int) -> np.ndarray:
        if not 1 <= k < self.seq.meta.num_frames:
            raise IndexError(f"pair index {k} out of range")
        path = self._path(k)
        if path is not None and os.path.exists(path):
            dims, data = read_tensor_file(path)
            if len(dims) != 3 or dims[2] != 2:
                raise ValueError(f"{path}: expected dims [H,W,2], got {dims}")
            return data.astype(np.float64).reshape(dims)
        flow = farneback_flow(to_gray(self.seq.frame(k - 1)),
                              to_gray(self.seq.frame(k)), self.config)
        if path is not None:
            os.makedirs(self.flow_dir, exist_ok=True)
            write_tensor_file(path, flow.shape, flow.astype(np.float32))
        return flow

    def compute_all(self) -> None:
        """Materialize flow for every consecutive pair plus a config sidecar."""
        if self.flow_dir is None:
            raise ValueError("flow store directory not set")
        os.makedirs(self.flow_dir, exist_ok=True)
        for k in range(1, self.seq.meta.num_frames):
            path = self._path(k)
            if not os.path.exists(path):
                flow = farneback_flow(to_gray(self.seq.frame(k - 1)),
                                      to_gray(self.seq.frame(k)), self.config)
                write_tensor_file(path, flow.shape, flow.astype(np.float32))
        sidecar = os.path.join(self.flow_dir, "flow_config.json")
        with open(sidecar, "w", encoding="utf-8") as fh:
            json.dump({
                "pyramid_levels": self.config.pyramid_levels,
                "pyramid_scale": self.config.pyramid_scale,
                "iterations_per_level": self.config.iterations_per_level,
                "poly_window": self.config.poly_window,
                "poly_sigma": self.config.poly_sigma,
                "averaging_window": self.config.averaging_window,
            }, fh, indent=1, sort_keys=True)


def _resize_frame(frame: np.ndarray, side: int) -> np.ndarray:
    if frame.shape[0] == side and frame.shape[1] == side:
        return frame.copy()
    return bilinear_resize(frame, side, side)


def _resize_flow(flow: np.ndarray, side: int) -> np.ndarray:
    h, w = flow.shape[:2]
    out = flow if (h == side and w == side) else bilinear_resize(flow, side, side)
    out = out.copy()
    out[..., 0] *= side / w
    out[..., 1] *= side / h
    return out


def extract_window(seq: FrameSequence, spec: WindowSpec, t: float,
                   flow_store: FlowStore, frame_cache=None):
    """RGB and flow window tensors at candidate ``t``.

    Returns float32 arrays shaped (2m, 3, S, S) and (2m, 2, S, S).  Frames
    resize bilinearly to S x S; flow components scale by the spatial resize
    ratio.  ``frame_cache`` (dict) avoids re-reading frames shared between
    overlapping windows.
    """
    spec.validate()
    indices = window_frame_indices(t, seq.meta, spec.m)
    side = spec.image_side
    rgb = np.zeros((2 * spec.m, 3, side, side), dtype=np.float32)
    flo = np.zeros((2 * spec.m, 2, side, side), dtype=np.float32)
    shape = None
    for slot, idx in enumerate(indices):
        if frame_cache is not None and idx in frame_cache:
            frame = frame_cache[idx]
        else:
            frame = seq.frame(idx)
            if frame_cache is not None:
                frame_cache[idx] = frame
        if shape is None:
            shape = frame.shape
        elif frame.shape != shape:
            raise ValueError(
                f"{seq.meta.video_id}: frame {idx} has shape {frame.shape}, "
                f"expected {shape}")
        rgb[slot] = np.transpose(_resize_frame(frame, side), (2, 0, 1))
        if slot > 0 and indices[slot] != indices[slot - 1]:
            pair = flow_store.pair_flow(idx)
            flo[slot] = np.transpose(_resize_flow(pair, side), (2, 0, 1))
    return rgb, flo
