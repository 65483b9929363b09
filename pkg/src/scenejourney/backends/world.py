"""Procedural true-world oracle: a seeded 3D scene (textured ground, sky
dome, primitive objects) that can answer exact depth, exact masks, and
exact novel views.

Scales match the estimator-domain constants used by the pipeline: the
ground sits ~0.001 scene units below the camera, objects a few thousandths
away, and the sky dome at depth 1/0.025 so its disparity equals the
default sky value exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..geometry import (
    CameraIntrinsics,
    CameraPose,
    DisparityMap,
    pixel_grid,
)
from ..depth_refine import SegmentSet, SkyMask

SKY_DISPARITY = 0.025
DEPTH_SHIFT = 0.0001


@dataclass(frozen=True)
class WorldConfig:
    ground_height: float = 0.0012  # camera starts this far above the ground
    object_count: int = 4
    object_depth_range: tuple[float, float] = (0.004, 0.02)
    object_radius_range: tuple[float, float] = (0.0008, 0.002)
    sky_depth: float = 1.0 / SKY_DISPARITY + DEPTH_SHIFT
    depth_shift: float = DEPTH_SHIFT
    texture_frequency: float = 500.0


@dataclass
class _Sphere:
    center: np.ndarray
    radius: float
    color: np.ndarray


@dataclass
class _Box:
    lo: np.ndarray
    hi: np.ndarray
    color: np.ndarray


class SyntheticWorld:
    """Fully determined by its integer seed (plus any spawned objects)."""

    def __init__(self, seed: int, config: WorldConfig | None = None):
        self.seed = int(seed)
        self.config = config or WorldConfig()
        rng = np.random.default_rng(self.seed)
        cfg = self.config
        self.ground_y = cfg.ground_height
        self._phases = rng.uniform(0, 2 * np.pi, size=6)
        self.spheres: list[_Sphere] = []
        self.boxes: list[_Box] = []
        for _ in range(cfg.object_count):
            z = rng.uniform(*cfg.object_depth_range)
            r = rng.uniform(*cfg.object_radius_range)
            x = rng.uniform(-0.5, 0.5) * z
            color = rng.uniform(0.2, 0.9, size=3)
            if rng.random() < 0.5:
                self.spheres.append(
                    _Sphere(np.array([x, self.ground_y - r, z]), r, color)
                )
            else:
                half = np.array([r, r, r])
                center = np.array([x, self.ground_y - r, z])
                self.boxes.append(_Box(center - half, center + half, color))

    # -- intersection ------------------------------------------------------

    def _trace(self, origins: np.ndarray, dirs: np.ndarray):
        """Intersect rays (param z = camera depth; dirs have unit camera-z
        component scaled into world). Returns (depth, hit_id) flat arrays.

        hit ids: -1 sky, 0 ground, 1.. objects (spheres then boxes).
        """
        n = len(dirs)
        cfg = self.config
        depth = np.full(n, cfg.sky_depth)
        hit = np.full(n, -1, dtype=np.int64)

        dy = dirs[:, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            zg = (self.ground_y - origins[:, 1]) / dy
        ok = (dy > 1e-12) & (zg > 1e-9) & (zg < depth)
        depth[ok] = zg[ok]
        hit[ok] = 0

        obj_id = 1
        for s in self.spheres:
            oc = origins - s.center
            a = np.einsum("ij,ij->i", dirs, dirs)
            b = 2 * np.einsum("ij,ij->i", dirs, oc)
            c = np.einsum("ij,ij->i", oc, oc) - s.radius**2
            disc = b * b - 4 * a * c
            okd = disc > 0
            z = np.full(n, np.inf)
            z[okd] = (-b[okd] - np.sqrt(disc[okd])) / (2 * a[okd])
            okz = okd & (z > 1e-9) & (z < depth)
            depth[okz] = z[okz]
            hit[okz] = obj_id
            obj_id += 1
        for bx in self.boxes:
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (bx.lo - origins) / dirs
                t2 = (bx.hi - origins) / dirs
            tmin = np.nanmax(np.minimum(t1, t2), axis=1)
            tmax = np.nanmin(np.maximum(t1, t2), axis=1)
            okz = (tmax >= tmin) & (tmin > 1e-9) & (tmin < depth)
            depth[okz] = tmin[okz]
            hit[okz] = obj_id
            obj_id += 1
        return depth, hit

    def _shade(self, points: np.ndarray, dirs: np.ndarray, hit: np.ndarray):
        """Smooth colors so that blending nearby surface samples stays local."""
        cfg = self.config
        n = len(hit)
        color = np.zeros((n, 3))

        sky = hit == -1
        if sky.any():
            d = dirs[sky] / np.linalg.norm(dirs[sky], axis=1, keepdims=True)
            t = np.clip(-d[:, 1] * 0.5 + 0.5, 0, 1)[:, None]
            horizon = np.array([0.85, 0.88, 0.95])
            zenith = np.array([0.35, 0.55, 0.90])
            color[sky] = (1 - t) * zenith + t * horizon

        ground = hit == 0
        if ground.any():
            p = points[ground]
            f = cfg.texture_frequency
            ph = self._phases
            r = 0.45 + 0.25 * np.sin(f * p[:, 0] + 0.7 * f * p[:, 2] + ph[0])
            g = 0.40 + 0.25 * np.sin(0.8 * f * p[:, 2] + ph[1])
            b = 0.30 + 0.20 * np.sin(0.6 * f * (p[:, 0] - p[:, 2]) + ph[2])
            color[ground] = np.stack([r, g, b], axis=-1)

        obj_id = 1
        for s in self.spheres:
            m = hit == obj_id
            if m.any():
                nrm = (points[m] - s.center) / s.radius
                shade = 0.65 + 0.35 * np.clip(-nrm[:, 1], 0, 1)
                color[m] = s.color[None, :] * shade[:, None]
            obj_id += 1
        for bx in self.boxes:
            m = hit == obj_id
            if m.any():
                p = points[m]
                f = cfg.texture_frequency
                shade = 0.75 + 0.25 * np.sin(f * (p[:, 0] + p[:, 1] + p[:, 2]))
                color[m] = bx.color[None, :] * shade[:, None]
            obj_id += 1
        return np.clip(color, 0, 1)

    # -- rendering ---------------------------------------------------------

    def _rays(self, intr: CameraIntrinsics, pose: CameraPose):
        u, v = pixel_grid(intr)
        d_cam = np.stack(
            [
                (u - intr.px) / intr.focal,
                (v - intr.py) / intr.focal,
                np.ones_like(u),
            ],
            axis=-1,
        ).reshape(-1, 3)
        dirs = d_cam @ pose.rotation.T
        origins = np.broadcast_to(pose.translation, dirs.shape)
        return origins, dirs

    def render(self, intr: CameraIntrinsics, pose: CameraPose):
        """Exact novel view: (image HxWx3, depth HxW, hit_id HxW)."""
        origins, dirs = self._rays(intr, pose)
        depth, hit = self._trace(origins, dirs)
        points = origins + depth[:, None] * dirs
        color = self._shade(points, dirs, hit)
        h, w = intr.height, intr.width
        return (
            color.reshape(h, w, 3),
            depth.reshape(h, w),
            hit.reshape(h, w),
        )

    def disparity(self, intr: CameraIntrinsics, pose: CameraPose) -> DisparityMap:
        """Exact disparity such that 1/d + depth_shift reproduces true depth."""
        _, depth, _ = self.render(intr, pose)
        return DisparityMap(1.0 / (depth - self.config.depth_shift))

    def masks(
        self, intr: CameraIntrinsics, pose: CameraPose
    ) -> tuple[SegmentSet, SkyMask]:
        _, _, hit = self.render(intr, pose)
        segs = []
        for k in range(0, int(hit.max()) + 1):
            m = hit == k
            if m.any():
                segs.append(m)
        return SegmentSet(segs), SkyMask(hit == -1)

    # -- growth ------------------------------------------------------------

    def spawn_sphere(self, center: np.ndarray, radius: float, color: np.ndarray):
        self.spheres.append(_Sphere(np.asarray(center, float), float(radius), color))

    def spawn_box(self, center: np.ndarray, half: float, color: np.ndarray):
        c = np.asarray(center, float)
        h = np.array([half, half, half])
        self.boxes.append(_Box(c - h, c + h, color))


def largest_masked_square(mask: np.ndarray) -> tuple[int, tuple[int, int]]:
    """Side length and center of the largest square fully inside the mask."""
    if not mask.any():
        return 0, (0, 0)
    # the image border counts as outside the mask
    padded = np.pad(mask, 1)
    dist = ndimage.distance_transform_cdt(padded, metric="chessboard")[1:-1, 1:-1]
    center = np.unravel_index(int(np.argmax(dist)), mask.shape)
    side = 2 * int(dist[center]) - 1
    return max(side, 0), (int(center[0]), int(center[1]))
