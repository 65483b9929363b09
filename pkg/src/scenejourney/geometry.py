"""Pinhole camera model, disparity/depth conversion, and the point cloud container.

Camera convention (fixed for all archives): x right, y down, z forward
(OpenCV-style), right-handed. A pose stores the world-from-camera rotation
and the camera position in world coordinates, so

    p_world = R @ p_cam + t
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Defaults in the estimator's inverse-depth (disparity) domain.
DEFAULT_DEPTH_SHIFT = 0.0001
DEFAULT_FAR_FLOOR = 0.0015
DEFAULT_RESOLUTION = 512


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int = DEFAULT_RESOLUTION
    height: int = DEFAULT_RESOLUTION
    focal: float = float(DEFAULT_RESOLUTION) / 2.0
    principal_point: tuple[float, float] | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.focal <= 0:
            raise GeometryError("width, height and focal must be positive")
        if self.principal_point is None:
            object.__setattr__(
                self, "principal_point", (self.width / 2.0, self.height / 2.0)
            )
        px, py = self.principal_point
        if not (0 <= px <= self.width and 0 <= py <= self.height):
            raise GeometryError("principal point outside image bounds")

    @property
    def px(self) -> float:
        return self.principal_point[0]

    @property
    def py(self) -> float:
        return self.principal_point[1]

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "focal": self.focal,
            "principal_point": [self.px, self.py],
        }

    @staticmethod
    def from_dict(d: dict) -> "CameraIntrinsics":
        return CameraIntrinsics(
            width=int(d["width"]),
            height=int(d["height"]),
            focal=float(d["focal"]),
            principal_point=tuple(d["principal_point"]),
        )


@dataclass(frozen=True)
class CameraPose:
    """World-from-camera rigid transform."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise GeometryError("rotation must be 3x3")
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-6):
            raise GeometryError("rotation is not orthonormal")
        if not np.isclose(np.linalg.det(R), 1.0, atol=1e-6):
            raise GeometryError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "CameraPose":
        return CameraPose()

    def world_to_camera(self, pts: np.ndarray) -> np.ndarray:
        return (pts - self.translation) @ self.rotation

    def camera_to_world(self, pts: np.ndarray) -> np.ndarray:
        return pts @ self.rotation.T + self.translation

    @property
    def forward(self) -> np.ndarray:
        """Viewing direction (+z of the camera frame) in world coordinates."""
        return self.rotation[:, 2]

    @property
    def backward(self) -> np.ndarray:
        return -self.rotation[:, 2]

    @property
    def up(self) -> np.ndarray:
        """Up direction in world coordinates (image y points down)."""
        return -self.rotation[:, 1]

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "CameraPose":
        m = np.asarray(m, dtype=np.float64)
        return CameraPose(rotation=m[:3, :3], translation=m[:3, 3])


@dataclass(frozen=True)
class DisparityMap:
    """H x W grid of non-negative inverse-depth values."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise GeometryError("disparity must be a 2D grid")
        if not np.all(np.isfinite(v)):
            raise GeometryError("disparity contains non-finite values")
        if np.any(v < 0):
            raise GeometryError("disparity contains negative values")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class DepthMap:
    """H x W positive depths in scene units with a validity mask."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        m = np.asarray(self.valid, dtype=bool)
        if v.ndim != 2 or m.shape != v.shape:
            raise GeometryError("depth values and valid mask must be same 2D shape")
        if np.any(~np.isfinite(v[m])) or np.any(v[m] <= 0):
            raise GeometryError("valid depths must be finite and positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "valid", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class PointCloud:
    """Colored world-frame points tagged with the generation step they came from."""

    points: np.ndarray  # (N, 3) float64
    colors: np.ndarray  # (N, 3) float64 in [0, 1]
    scene_id: np.ndarray  # (N,) int32

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        c = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        s = np.asarray(self.scene_id, dtype=np.int32).reshape(-1)
        if not (len(p) == len(c) == len(s)):
            raise GeometryError("points, colors and scene_id must have equal length")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "colors", c)
        object.__setattr__(self, "scene_id", s)

    def __len__(self) -> int:
        return len(self.points)

    @staticmethod
    def empty() -> "PointCloud":
        return PointCloud(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0, np.int32))

    def concat(self, other: "PointCloud") -> "PointCloud":
        return PointCloud(
            np.concatenate([self.points, other.points]),
            np.concatenate([self.colors, other.colors]),
            np.concatenate([self.scene_id, other.scene_id]),
        )


def disparity_to_depth(
    d: DisparityMap,
    far_floor: float = DEFAULT_FAR_FLOOR,
    depth_shift: float = DEFAULT_DEPTH_SHIFT,
) -> DepthMap:
    """Convert disparity to depth, cutting off pixels beyond the far plane.

    Pixels with disparity below `far_floor` are removed (marked invalid)
    rather than clamped; valid pixels get depth = 1/disparity + depth_shift.
    """
    if far_floor <= 0:
        raise GeometryError("far_floor must be positive")
    if depth_shift < 0:
        raise GeometryError("depth_shift must be non-negative")
    valid = d.values >= far_floor
    depth = np.full(d.shape, np.inf)
    depth[valid] = 1.0 / d.values[valid] + depth_shift
    depth[~valid] = 1.0  # placeholder; excluded by the mask
    return DepthMap(values=depth, valid=valid)


def depth_to_disparity(depth: DepthMap, depth_shift: float = DEFAULT_DEPTH_SHIFT) -> DisparityMap:
    """Inverse of disparity_to_depth on the valid domain; invalid pixels get 0."""
    v = np.zeros(depth.shape)
    shifted = depth.values[depth.valid] - depth_shift
    if np.any(shifted <= 0):
        raise GeometryError("depth below the shift floor cannot be inverted")
    v[depth.valid] = 1.0 / shifted
    return DisparityMap(values=v)


def pixel_grid(intr: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinate grids (u, v), each H x W."""
    u = np.arange(intr.width, dtype=np.float64)
    v = np.arange(intr.height, dtype=np.float64)
    return np.meshgrid(u, v, indexing="xy")


def unproject(
    depth: DepthMap,
    colors: np.ndarray,
    intr: CameraIntrinsics,
    pose: CameraPose,
    scene_id: int = 0,
    pixel_mask: np.ndarray | None = None,
) -> PointCloud:
    """Lift valid depth pixels to a world-frame point cloud.

    `pixel_mask` optionally restricts which pixels produce points (it is
    intersected with the depth validity mask).
    """
    h, w = depth.shape
    colors = np.asarray(colors, dtype=np.float64)
    if colors.shape[:2] != (h, w) or (h, w) != (intr.height, intr.width):
        raise GeometryError("depth/color dimensions do not match intrinsics")
    mask = depth.valid if pixel_mask is None else (depth.valid & pixel_mask)
    u, v = pixel_grid(intr)
    z = depth.values[mask]
    x = (u[mask] - intr.px) * z / intr.focal
    y = (v[mask] - intr.py) * z / intr.focal
    pts_cam = np.stack([x, y, z], axis=-1)
    pts_world = pose.camera_to_world(pts_cam)
    cols = colors[mask].reshape(-1, 3)
    ids = np.full(len(pts_world), scene_id, dtype=np.int32)
    return PointCloud(points=pts_world, colors=cols, scene_id=ids)


def project(
    cloud: PointCloud, intr: CameraIntrinsics, pose: CameraPose
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Project points into the image; returns (pixels, depths, colors, indices).

    Points behind the camera or outside the image are omitted. Pixels are
    continuous (sub-pixel) coordinates.
    """
    pts_cam = pose.world_to_camera(cloud.points)
    z = pts_cam[:, 2]
    in_front = z > 0
    u = np.empty(len(z))
    v = np.empty(len(z))
    u[in_front] = intr.px + intr.focal * pts_cam[in_front, 0] / z[in_front]
    v[in_front] = intr.py + intr.focal * pts_cam[in_front, 1] / z[in_front]
    # pixel centers at integer coordinates; a point is inside if it rounds
    # into the image
    inside = in_front.copy()
    inside[in_front] &= (
        (u[in_front] > -0.5)
        & (u[in_front] < intr.width - 0.5)
        & (v[in_front] > -0.5)
        & (v[in_front] < intr.height - 0.5)
    )
    idx = np.nonzero(inside)[0]
    pixels = np.stack([u[idx], v[idx]], axis=-1)
    return pixels, z[idx], cloud.colors[idx], idx
