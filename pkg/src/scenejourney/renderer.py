"""Point-cloud rasterization with an 8-deep z-buffer and softmax
disparity-weighted color compositing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, CameraPose, PointCloud, project
from .depth_refine import RefineConfig, morphology

ZBUFFER_DEPTH = 8
DEFAULT_SPLAT_RADIUS = 1


@dataclass(frozen=True)
class ZBufferEntry:
    point_index: int
    disparity: float
    color: np.ndarray


@dataclass(frozen=True)
class RenderOutput:
    """Composited color, validity mask, and the per-pixel z-buffer.

    The z-buffer is stored flat: entries are sorted by (pixel, descending
    disparity, point index); `zbuffer_start` has H*W+1 offsets into the
    entry arrays.
    """

    color: np.ndarray  # (H, W, 3)
    valid: np.ndarray  # (H, W) bool
    zbuffer_start: np.ndarray  # (H*W + 1,) int
    zbuffer_disparity: np.ndarray  # (M,)
    zbuffer_point_index: np.ndarray  # (M,) int
    zbuffer_color: np.ndarray  # (M, 3)

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape

    def zbuffer_at(self, row: int, col: int) -> list[ZBufferEntry]:
        lin = row * self.shape[1] + col
        lo, hi = self.zbuffer_start[lin], self.zbuffer_start[lin + 1]
        return [
            ZBufferEntry(
                int(self.zbuffer_point_index[i]),
                float(self.zbuffer_disparity[i]),
                self.zbuffer_color[i],
            )
            for i in range(lo, hi)
        ]

    def front_depth(self) -> np.ndarray:
        """Camera depth of the nearest z-buffer entry per pixel (inf if empty)."""
        h, w = self.shape
        d = np.full(h * w, np.inf)
        lo = self.zbuffer_start[:-1]
        hi = self.zbuffer_start[1:]
        has = hi > lo
        d[has] = 1.0 / self.zbuffer_disparity[lo[has]]
        return d.reshape(h, w)

    def front_point_index(self) -> np.ndarray:
        """Index of the nearest point per pixel (-1 if empty)."""
        h, w = self.shape
        idx = np.full(h * w, -1, dtype=np.int64)
        lo = self.zbuffer_start[:-1]
        hi = self.zbuffer_start[1:]
        has = hi > lo
        idx[has] = self.zbuffer_point_index[lo[has]]
        return idx.reshape(h, w)


def _splat_offsets(radius: int) -> np.ndarray:
    r = int(radius)
    offs = [
        (dx, dy)
        for dy in range(-r, r + 1)
        for dx in range(-r, r + 1)
        if dx * dx + dy * dy <= r * r
    ]
    return np.array(offs, dtype=np.int64)


def rasterize(
    cloud: PointCloud,
    intr: CameraIntrinsics,
    pose: CameraPose,
    splat_radius: int = DEFAULT_SPLAT_RADIUS,
    temperature: float = 1.0,
) -> RenderOutput:
    """Rasterize a point cloud; deterministic regardless of point order ties.

    Each point splats to the pixels within `splat_radius` of its projected
    location; per pixel the 8 highest-disparity contributors are kept and
    composited with softmax(disparity) weights.
    """
    if splat_radius < 0:
        raise ValueError("splat_radius must be non-negative")
    h, w = intr.height, intr.width
    n_pix = h * w
    pixels, depths, colors, idx = project(cloud, intr, pose)

    if len(idx) == 0:
        return RenderOutput(
            color=np.zeros((h, w, 3)),
            valid=np.zeros((h, w), dtype=bool),
            zbuffer_start=np.zeros(n_pix + 1, dtype=np.int64),
            zbuffer_disparity=np.zeros(0),
            zbuffer_point_index=np.zeros(0, dtype=np.int64),
            zbuffer_color=np.zeros((0, 3)),
        )

    u0 = np.rint(pixels[:, 0]).astype(np.int64)
    v0 = np.rint(pixels[:, 1]).astype(np.int64)
    disparity = 1.0 / depths

    offs = _splat_offsets(splat_radius)
    uu = (u0[:, None] + offs[None, :, 0]).ravel()
    vv = (v0[:, None] + offs[None, :, 1]).ravel()
    pt = np.repeat(np.arange(len(idx)), len(offs))
    inb = (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h)
    uu, vv, pt = uu[inb], vv[inb], pt[inb]
    lin = vv * w + uu
    disp_c = disparity[pt]
    orig = idx[pt]

    # canonical order: pixel, nearest first, then point index for ties
    order = np.lexsort((orig, -disp_c, lin))
    lin, disp_c, orig, pt = lin[order], disp_c[order], orig[order], pt[order]

    # keep at most 8 entries per pixel
    starts = np.ones(len(lin), dtype=bool)
    starts[1:] = lin[1:] != lin[:-1]
    group_id = np.cumsum(starts) - 1
    first_of_group = np.flatnonzero(starts)
    rank = np.arange(len(lin)) - first_of_group[group_id]
    keep = rank < ZBUFFER_DEPTH
    lin, disp_c, orig, pt = lin[keep], disp_c[keep], orig[keep], pt[keep]
    cols = colors[pt]

    # stabilized softmax compositing per pixel
    dmax = np.full(n_pix, -np.inf)
    np.maximum.at(dmax, lin, disp_c)
    wgt = np.exp(temperature * (disp_c - dmax[lin]))
    wsum = np.bincount(lin, weights=wgt, minlength=n_pix)
    color = np.zeros((n_pix, 3))
    for ch in range(3):
        color[:, ch] = np.bincount(lin, weights=wgt * cols[:, ch], minlength=n_pix)
    covered = wsum > 0
    color[covered] /= wsum[covered, None]

    counts = np.bincount(lin, minlength=n_pix)
    start = np.zeros(n_pix + 1, dtype=np.int64)
    np.cumsum(counts, out=start[1:])

    return RenderOutput(
        color=color.reshape(h, w, 3),
        valid=covered.reshape(h, w),
        zbuffer_start=start,
        zbuffer_disparity=disp_c,
        zbuffer_point_index=orig.astype(np.int64),
        zbuffer_color=cols,
    )


def inpaint_mask(out: RenderOutput, cfg: RefineConfig) -> np.ndarray:
    """Pixels to inpaint: the invalid set, dilated over the upper rows."""
    mask = ~out.valid
    if cfg.upper_dilation_radius > 0 and mask.any():
        dilated = morphology(mask, "dilate", cfg.upper_dilation_radius)
        upper = np.zeros_like(mask)
        upper[: int(round(cfg.upper_fraction * mask.shape[0]))] = True
        mask = mask | (dilated & upper)
    return mask


def empty_ratio(out: RenderOutput) -> float:
    return float((~out.valid).mean())
