"""Geometric consistency for newly estimated depth: affine disparity
alignment against rendered targets and re-rendering disocclusion repair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    CameraIntrinsics,
    CameraPose,
    DisparityMap,
    PointCloud,
)
from . import renderer


class AlignmentError(RuntimeError):
    pass


@dataclass(frozen=True)
class AlignmentTargets:
    """Target depths per pixel: hinge-constrained background, L2 foreground."""

    bg_pixels: np.ndarray  # (Nb, 2) int (row, col)
    bg_depths: np.ndarray  # (Nb,)
    fg_pixels: np.ndarray  # (Nf, 2) int
    fg_depths: np.ndarray  # (Nf,)

    def __post_init__(self):
        bp = np.asarray(self.bg_pixels, dtype=np.int64).reshape(-1, 2)
        fp = np.asarray(self.fg_pixels, dtype=np.int64).reshape(-1, 2)
        bd = np.asarray(self.bg_depths, dtype=np.float64).reshape(-1)
        fd = np.asarray(self.fg_depths, dtype=np.float64).reshape(-1)
        if len(bp) != len(bd) or len(fp) != len(fd):
            raise ValueError("pixel/target length mismatch")
        if np.any(bd <= 0) or np.any(fd <= 0):
            raise ValueError("target depths must be positive")
        both = set(map(tuple, bp)) & set(map(tuple, fp))
        if both:
            raise ValueError("bg and fg pixel sets must be disjoint")
        object.__setattr__(self, "bg_pixels", bp)
        object.__setattr__(self, "fg_pixels", fp)
        object.__setattr__(self, "bg_depths", bd)
        object.__setattr__(self, "fg_depths", fd)

    def __len__(self) -> int:
        return len(self.bg_depths) + len(self.fg_depths)


@dataclass(frozen=True)
class DepthCorrection:
    """Affine correction in the disparity domain: d' = scale * d + offset."""

    scale: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def apply(self, d: DisparityMap) -> DisparityMap:
        return DisparityMap(np.maximum(self.scale * d.values + self.offset, 0.0))

    def to_dict(self) -> dict:
        return {"scale": self.scale, "offset": self.offset}

    @staticmethod
    def from_dict(d: dict) -> "DepthCorrection":
        return DepthCorrection(scale=float(d["scale"]), offset=float(d["offset"]))


def alignment_loss(
    depth_at_bg: np.ndarray, depth_at_fg: np.ndarray, targets: AlignmentTargets
) -> float:
    """Hinge on background (only nearer-than-target is penalized) plus the
    RMS residual over foreground pixels."""
    depth_at_bg = np.asarray(depth_at_bg, dtype=np.float64)
    depth_at_fg = np.asarray(depth_at_fg, dtype=np.float64)
    if np.any(~np.isfinite(depth_at_bg)) or np.any(~np.isfinite(depth_at_fg)):
        raise AlignmentError("invalid depth at a target pixel")
    loss = 0.0
    if len(depth_at_bg):
        loss += float(np.mean(np.maximum(0.0, targets.bg_depths - depth_at_bg)))
    if len(depth_at_fg):
        loss += float(np.sqrt(np.mean((targets.fg_depths - depth_at_fg) ** 2)))
    return loss


def _corrected_loss(
    raw_bg: np.ndarray,
    raw_fg: np.ndarray,
    targets: AlignmentTargets,
    scale: float,
    offset: float,
    depth_shift: float,
) -> float:
    eps = 1e-12
    db = 1.0 / np.maximum(scale * raw_bg + offset, eps) + depth_shift
    df = 1.0 / np.maximum(scale * raw_fg + offset, eps) + depth_shift
    return alignment_loss(db, df, targets)


def align_depth(
    raw: DisparityMap,
    targets: AlignmentTargets,
    iters: int = 200,
    step: float = 0.1,
    depth_shift: float = 0.0001,
) -> tuple[DepthCorrection, list[float]]:
    """Fit a disparity-domain affine correction by gradient descent with
    backtracking, minimizing the alignment loss of the corrected depth.

    Returns the correction and the (non-increasing) loss sequence.
    """
    if len(targets) == 0:
        raise ValueError("targets must be non-empty")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    raw_bg = raw.values[targets.bg_pixels[:, 0], targets.bg_pixels[:, 1]]
    raw_fg = raw.values[targets.fg_pixels[:, 0], targets.fg_pixels[:, 1]]

    s, b = 1.0, 0.0
    loss = _corrected_loss(raw_bg, raw_fg, targets, s, b, depth_shift)
    if not np.isfinite(loss):
        raise AlignmentError("non-finite initial loss")
    history = [loss]
    # per-coordinate adaptive steps (sign-based), with the offset step scaled
    # to the disparity magnitude; plain gradient steps stall in the narrow
    # valley this loss has when disparities span several decades
    disp_scale = max(float(np.median(np.concatenate([raw_bg, raw_fg]))), 1e-9)
    ds, db = step, step * disp_scale
    prev_gs = prev_gb = 0.0
    for _ in range(iters):
        hs = 1e-6 * max(abs(s), 1.0)
        hb = 1e-6 * max(abs(b), disp_scale)
        gs = (
            _corrected_loss(raw_bg, raw_fg, targets, s + hs, b, depth_shift)
            - _corrected_loss(raw_bg, raw_fg, targets, s - hs, b, depth_shift)
        ) / (2 * hs)
        gb = (
            _corrected_loss(raw_bg, raw_fg, targets, s, b + hb, depth_shift)
            - _corrected_loss(raw_bg, raw_fg, targets, s, b - hb, depth_shift)
        ) / (2 * hb)
        if abs(gs) < 1e-18 and abs(gb) < 1e-18:
            history.append(loss)
            continue
        ds *= 1.2 if gs * prev_gs > 0 else (0.5 if gs * prev_gs < 0 else 1.0)
        db *= 1.2 if gb * prev_gb > 0 else (0.5 if gb * prev_gb < 0 else 1.0)
        prev_gs, prev_gb = gs, gb
        accepted = False
        trial_s, trial_b = ds, db
        for _bt in range(30):
            s_new = s - np.sign(gs) * trial_s
            b_new = b - np.sign(gb) * trial_b
            if s_new <= 0:
                trial_s *= 0.5
                trial_b *= 0.5
                continue
            new_loss = _corrected_loss(raw_bg, raw_fg, targets, s_new, b_new, depth_shift)
            if np.isfinite(new_loss) and new_loss <= loss:
                s, b, loss = s_new, b_new, new_loss
                accepted = True
                break
            trial_s *= 0.5
            trial_b *= 0.5
        if not accepted:
            ds *= 0.5
            db *= 0.5
        history.append(loss)
    if not np.isfinite(loss):
        raise AlignmentError("alignment diverged")
    return DepthCorrection(scale=s, offset=b), history


def build_targets(
    out: "renderer.RenderOutput", backdrop_depth: float, margin: float = 0.8
) -> AlignmentTargets:
    """Split a render's front depths into background (at/behind the backdrop
    dome) and foreground targets."""
    front = out.front_depth()
    valid = out.valid
    is_bg = valid & (front >= margin * backdrop_depth)
    is_fg = valid & ~is_bg
    bg = np.argwhere(is_bg)
    fg = np.argwhere(is_fg)
    return AlignmentTargets(
        bg_pixels=bg,
        bg_depths=front[is_bg],
        fg_pixels=fg,
        fg_depths=front[is_fg],
    )


def resolve_disocclusions(
    existing: PointCloud,
    added: PointCloud,
    intr: CameraIntrinsics,
    pose: CameraPose,
    epsilon: float = 1e-4,
    splat_radius: int = renderer.DEFAULT_SPLAT_RADIUS,
) -> tuple[PointCloud, int]:
    """Push added points behind whatever existing geometry they would occlude
    in the old camera's view.

    Re-renders the existing cloud at `pose`; any added point rasterizing in
    front of the existing front surface is translated along its camera ray to
    (front depth + epsilon). Returns the repaired added cloud and the number
    of moved points.
    """
    if len(added) == 0:
        return added, 0
    base = renderer.rasterize(existing, intr, pose, splat_radius=splat_radius)
    front = base.front_depth()
    h, w = front.shape

    pts_cam = pose.world_to_camera(added.points)
    z = pts_cam[:, 2]
    new_z = z.copy()
    offs = renderer._splat_offsets(splat_radius)
    in_front = z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.px + intr.focal * pts_cam[:, 0] / z
        v = intr.py + intr.focal * pts_cam[:, 1] / z
    u0 = np.zeros(len(z), dtype=np.int64)
    v0 = np.zeros(len(z), dtype=np.int64)
    u0[in_front] = np.rint(u[in_front]).astype(np.int64)
    v0[in_front] = np.rint(v[in_front]).astype(np.int64)
    for dx, dy in offs:
        uu = u0 + dx
        vv = v0 + dy
        ok = in_front & (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h)
        fd = np.full(len(z), -np.inf)
        fd[ok] = front[vv[ok], uu[ok]]
        conflict = ok & np.isfinite(fd) & (z < fd)
        req = np.where(conflict, fd + epsilon, -np.inf)
        new_z = np.maximum(new_z, req)
    moved = new_z > z
    if not moved.any():
        return added, 0
    scale = np.where(z > 0, new_z / np.where(z > 0, z, 1.0), 1.0)
    pts_cam_new = pts_cam * scale[:, None]
    pts_world = pose.camera_to_world(pts_cam_new)
    repaired = PointCloud(
        points=pts_world, colors=added.colors, scene_id=added.scene_id
    )
    return repaired, int(moved.sum())
