"""Next-scene camera placement and dense trajectory interpolation with
easing ramps and sine height perturbation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation as _R

from .geometry import CameraPose

STRAIGHT_TRANSLATION = 0.0005
ROTATION_TRANSLATION = 0.0001
ROTATION_ANGLE = 0.45


@dataclass(frozen=True)
class MoveSpec:
    kind: str = "straight"  # straight | rotation
    translation: float = STRAIGHT_TRANSLATION
    rotation_angle: float = ROTATION_ANGLE
    direction: str = "left"  # left | right

    def __post_init__(self):
        if self.kind not in ("straight", "rotation"):
            raise ValueError(f"unknown move kind {self.kind!r}")
        if self.direction not in ("left", "right"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.translation < 0:
            raise ValueError("translation must be non-negative")
        if not (0 <= self.rotation_angle < np.pi):
            raise ValueError("rotation_angle must be in [0, pi)")

    @staticmethod
    def straight(translation: float = STRAIGHT_TRANSLATION) -> "MoveSpec":
        return MoveSpec(kind="straight", translation=translation)

    @staticmethod
    def rotation(
        direction: str = "left",
        angle: float = ROTATION_ANGLE,
        translation: float = ROTATION_TRANSLATION,
    ) -> "MoveSpec":
        return MoveSpec(
            kind="rotation",
            translation=translation,
            rotation_angle=angle,
            direction=direction,
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "translation": self.translation,
            "rotation_angle": self.rotation_angle,
            "direction": self.direction,
        }

    @staticmethod
    def from_dict(d: dict) -> "MoveSpec":
        return MoveSpec(
            kind=d["kind"],
            translation=float(d["translation"]),
            rotation_angle=float(d["rotation_angle"]),
            direction=d["direction"],
        )


def next_scene_camera(current: CameraPose, move: MoveSpec) -> CameraPose:
    """Place the next camera: retreat along the backward axis, optionally
    yawing about the camera's up axis (left = positive yaw)."""
    t_new = current.translation + move.translation * current.backward
    if move.kind == "straight" or move.rotation_angle == 0.0:
        return CameraPose(rotation=current.rotation.copy(), translation=t_new)
    sign = 1.0 if move.direction == "left" else -1.0
    yaw = _R.from_rotvec(current.up * sign * move.rotation_angle).as_matrix()
    return CameraPose(rotation=yaw @ current.rotation, translation=t_new)


@dataclass(frozen=True)
class CameraTrajectory:
    keyposes: list[CameraPose]
    moves: list[MoveSpec] = field(default_factory=list)
    frames_per_move: int = 30
    sine_amplitude: float = 0.00005
    sine_periods: int = 1
    easing_frames: int = 8

    def __post_init__(self):
        if len(self.keyposes) < 1:
            raise ValueError("at least one keypose required")
        if len(self.moves) != len(self.keyposes) - 1:
            raise ValueError("need exactly one move per keypose pair")

    def to_json(self) -> dict:
        return {
            "keyposes": [p.matrix().tolist() for p in self.keyposes],
            "moves": [m.to_dict() for m in self.moves],
            "frames_per_move": self.frames_per_move,
            "sine_amplitude": self.sine_amplitude,
            "sine_periods": self.sine_periods,
            "easing_frames": self.easing_frames,
        }

    @staticmethod
    def from_json(d: dict) -> "CameraTrajectory":
        return CameraTrajectory(
            keyposes=[CameraPose.from_matrix(np.array(m)) for m in d["keyposes"]],
            moves=[MoveSpec.from_dict(m) for m in d["moves"]],
            frames_per_move=int(d["frames_per_move"]),
            sine_amplitude=float(d["sine_amplitude"]),
            sine_periods=int(d["sine_periods"]),
            easing_frames=int(d["easing_frames"]),
        )


def _ease_params(n: int, ease_in: bool, ease_out: bool, window: int) -> np.ndarray:
    """Interpolation parameters in (0, 1] for n frames; speed ramps linearly
    over the easing windows (linear acceleration)."""
    speed = np.ones(n)
    w = min(window, n)
    if w > 0:
        ramp = np.arange(1, w + 1) / w
        if ease_in:
            speed[:w] = np.minimum(speed[:w], ramp)
        if ease_out:
            speed[n - w:] = np.minimum(speed[n - w:], ramp[::-1])
    t = np.cumsum(speed)
    return t / t[-1]


def _interp_move(
    start: CameraPose, end: CameraPose, move: MoveSpec, params: np.ndarray
) -> list[CameraPose]:
    poses = []
    if move.kind == "rotation":
        sign = 1.0 if move.direction == "left" else -1.0
        axis = start.up
        for t in params:
            yaw = _R.from_rotvec(axis * sign * move.rotation_angle * t).as_matrix()
            rot = yaw @ start.rotation
            trans = (1 - t) * start.translation + t * end.translation
            poses.append(CameraPose(rotation=rot, translation=trans))
    else:
        for t in params:
            trans = (1 - t) * start.translation + t * end.translation
            poses.append(CameraPose(rotation=start.rotation.copy(), translation=trans))
    # snap the final frame to the keypose exactly
    poses[-1] = CameraPose(rotation=end.rotation.copy(), translation=end.translation.copy())
    return poses


def interpolate(traj: CameraTrajectory) -> list[CameraPose]:
    """Dense camera sequence through the keyposes: yaw/translation linear per
    move, sine height perturbation zeroed at keyposes, linear-acceleration
    easing at the journey ends and around rotations.

    Returns moves * frames_per_move + 1 poses.
    """
    if traj.frames_per_move < 2:
        raise ValueError("frames_per_move must be >= 2")
    world_up = np.array([0.0, -1.0, 0.0])
    out = [traj.keyposes[0]]
    n_moves = len(traj.moves)
    for k, move in enumerate(traj.moves):
        prev_rot = k > 0 and traj.moves[k - 1].kind == "rotation"
        next_rot = k + 1 < n_moves and traj.moves[k + 1].kind == "rotation"
        ease_in = k == 0 or prev_rot or move.kind == "rotation"
        ease_out = k == n_moves - 1 or next_rot or move.kind == "rotation"
        params = _ease_params(
            traj.frames_per_move, ease_in, ease_out, traj.easing_frames
        )
        poses = _interp_move(traj.keyposes[k], traj.keyposes[k + 1], move, params)
        if traj.sine_amplitude != 0.0:
            for j, t in enumerate(params[:-1]):
                h = traj.sine_amplitude * np.sin(2 * np.pi * traj.sine_periods * t)
                poses[j] = CameraPose(
                    rotation=poses[j].rotation,
                    translation=poses[j].translation + h * world_up,
                )
        out.extend(poses)
    return out


@dataclass(frozen=True)
class MoveSchedule:
    """Which move each journey step takes; default two straight then one
    rotation, alternating rotation direction."""

    pattern: tuple[str, ...] = ("straight", "straight", "rotation")
    straight_translation: float = STRAIGHT_TRANSLATION
    rotation_translation: float = ROTATION_TRANSLATION
    rotation_angle: float = ROTATION_ANGLE

    def move_for(self, step: int) -> MoveSpec:
        kind = self.pattern[step % len(self.pattern)]
        if kind == "straight":
            return MoveSpec.straight(self.straight_translation)
        n_rot = sum(
            1
            for j in range(step + 1)
            if self.pattern[j % len(self.pattern)] == "rotation"
        )
        direction = "left" if n_rot % 2 == 1 else "right"
        return MoveSpec.rotation(
            direction=direction,
            angle=self.rotation_angle,
            translation=self.rotation_translation,
        )

    def to_dict(self) -> dict:
        return {
            "pattern": list(self.pattern),
            "straight_translation": self.straight_translation,
            "rotation_translation": self.rotation_translation,
            "rotation_angle": self.rotation_angle,
        }

    @staticmethod
    def from_dict(d: dict) -> "MoveSchedule":
        return MoveSchedule(
            pattern=tuple(d["pattern"]),
            straight_translation=float(d["straight_translation"]),
            rotation_translation=float(d["rotation_translation"]),
            rotation_angle=float(d["rotation_angle"]),
        )
