"""Overlapped temporal segments with weighted cross-fades at the seams.

A clip of T frames is cut into windows of 2L frames advancing by L, so
consecutive windows share L frames.  The last window is anchored at
T - 2L, which for ragged T shortens its distance to the previous start;
blending treats that irregular overlap the same way as the regular ones.
Each window is processed independently (renderers are free to do so in
parallel) and the results are merged by cross-fading every overlap.

Within an overlap of length L the frame at local offset j keeps the
earlier segment with weight gamma_j and takes the later segment with
weight 1 - gamma_j:

    cosine:  gamma_j = (1 + cos(pi * j / L)) / 2
    linear:  gamma_j = 1 - j / L

Both start at 1, so the earlier segment fully owns the first overlapped
frame and hands over smoothly; the first frame past the overlap belongs
to the later segment alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_model import DataError, Frame, VideoClip

BLEND_MODES = ("cosine", "linear")


@dataclass(frozen=True)
class SegmentPlan:
    """Window layout over a clip: [start, end) ranges plus the overlap L."""

    total: int
    overlap: int
    segments: tuple

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(tuple(s) for s in self.segments))


def plan_segments(num_frames: int, overlap: int, segment_len: int = 0) -> SegmentPlan:
    """Lay out processing windows of segment_len frames (default 2x overlap).

    Windows stride by segment_len - overlap; the final window is pinned
    to max(0, num_frames - segment_len) so no frame past the end is
    needed.  A clip no longer than one window yields a single segment.
    """
    if num_frames < 1:
        raise DataError("clip must have at least one frame")
    if overlap < 1:
        raise DataError("overlap must be >= 1")
    if segment_len == 0:
        segment_len = 2 * overlap
    if segment_len <= overlap:
        raise DataError("segment_len must exceed overlap")
    last = max(0, num_frames - segment_len)
    stride = segment_len - overlap
    starts = list(range(0, last, stride))
    starts.append(last)
    segments = [(s, min(s + segment_len, num_frames)) for s in starts]
    return SegmentPlan(total=num_frames, overlap=overlap, segments=tuple(segments))


def blend_weight(j: float, length: int, mode: str = "cosine") -> float:
    """Weight gamma_j of the earlier segment at overlap-local offset j."""
    if mode not in BLEND_MODES:
        raise DataError(f"unknown blend mode {mode!r}")
    if length < 1:
        raise DataError("overlap length must be >= 1")
    if not 0 <= j <= length:
        raise DataError(f"overlap offset {j} outside [0, {length}]")
    if mode == "cosine":
        return (1.0 + math.cos(math.pi * j / length)) / 2.0
    return 1.0 - j / length


def blend_weights(length: int, mode: str = "cosine") -> np.ndarray:
    """gamma_j for j = 0 .. length-1 as a float64 vector."""
    return np.array([blend_weight(j, length, mode) for j in range(length)])


def blend_segments(
    segments: list,
    starts: list,
    num_frames: int,
    mode: str = "cosine",
) -> np.ndarray:
    """Merge processed (len, H, W, C) segment arrays into one (T, H, W, C).

    Segments must arrive in start order.  Each one is folded onto the
    frames already covered: over the shared range it cross-fades from
    the accumulated result to the new segment, past that range it simply
    takes over.  Frames touched by three windows (possible next to the
    anchored final start) are blended pairwise in sequence, so weights
    always sum to 1.
    """
    if len(segments) != len(starts):
        raise DataError("segments and starts must pair up")
    if not segments:
        raise DataError("need at least one segment")
    if any(b < a for a, b in zip(starts, starts[1:])):
        raise DataError("segments must be ordered by start")
    first = np.asarray(segments[0], dtype=np.float64)
    out = np.zeros((num_frames,) + first.shape[1:], dtype=np.float64)
    covered = 0
    for start, seg in zip(starts, segments):
        seg = np.asarray(seg, dtype=np.float64)
        end = start + seg.shape[0]
        if start < 0 or end > num_frames:
            raise DataError(f"segment [{start}, {end}) falls outside the clip")
        if start > covered:
            raise DataError(f"gap before segment starting at {start}")
        shared = min(covered, end) - start
        if shared > 0:
            gamma = blend_weights(shared, mode).reshape((-1,) + (1,) * (seg.ndim - 1))
            out[start : start + shared] = (
                gamma * out[start : start + shared] + (1.0 - gamma) * seg[:shared]
            )
            out[start + shared : end] = seg[shared:]
        else:
            out[start:end] = seg
        covered = max(covered, end)
    if covered < num_frames:
        raise DataError("segments do not cover the full clip")
    return out


def merge_segments(plan: SegmentPlan, rendered: list, mode: str = "cosine") -> VideoClip:
    """Stitch per-segment rendered clips back into one clip."""
    if len(rendered) != len(plan.segments):
        raise DataError(
            f"plan has {len(plan.segments)} segments but {len(rendered)} were rendered"
        )
    arrays = []
    frame_rate = 25.0
    for (start, end), piece in zip(plan.segments, rendered):
        frames = piece.frames if isinstance(piece, VideoClip) else tuple(piece)
        if isinstance(piece, VideoClip):
            frame_rate = piece.frame_rate
        if len(frames) != end - start:
            raise DataError(
                f"segment [{start}, {end}) expects {end - start} frames, got {len(frames)}"
            )
        arrays.append(np.stack([f.pixels for f in frames]))
    merged = blend_segments(arrays, [s for s, _ in plan.segments], plan.total, mode)
    out = [Frame(np.clip(merged[t], 0.0, 1.0).astype(np.float32)) for t in range(plan.total)]
    return VideoClip(tuple(out), frame_rate=frame_rate)


def process_in_segments(
    clip: VideoClip,
    process,
    segment_len: int = 8,
    overlap: int = 4,
    mode: str = "cosine",
) -> VideoClip:
    """Run a per-segment video operator and stitch the pieces.

    ``process(subclip, start)`` receives each window as a VideoClip plus
    its absolute first-frame index and must return a clip (or frame
    list) of identical length and size.
    """
    plan = plan_segments(len(clip), overlap, segment_len)
    pieces = []
    for start, end in plan.segments:
        sub = VideoClip(clip.frames[start:end], frame_rate=clip.frame_rate)
        result = process(sub, start)
        frames = result.frames if isinstance(result, VideoClip) else tuple(result)
        pieces.append(VideoClip(tuple(frames), frame_rate=clip.frame_rate))
    return merge_segments(plan, pieces, mode)
