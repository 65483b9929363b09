"""Journey archive: on-disk record of a generated sequence, bit-exact
round-trippable and safe to rewrite scene by scene."""

from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path

import numpy as np

from . import io as sio
from .camera_path import CameraTrajectory, MoveSchedule, MoveSpec
from .depth_refine import RefineConfig, SegmentSet, SkyMask
from .geometry import CameraPose, DepthMap, DisparityMap
from .journey import (
    DescriptionMemory,
    JourneyArchive,
    JourneyConfig,
    SceneDescription,
    SceneRecord,
)
from .registration import DepthCorrection

FORMAT_VERSION = 1


class ArchiveError(RuntimeError):
    pass


def _dump_json(path: Path, payload: dict):
    data = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


def _write_bytes(path: Path, data: bytes):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _load_json(path: Path) -> dict:
    if not path.exists():
        raise ArchiveError(f"archive member missing: {path.name}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ArchiveError(
            f"{path.name}: unsupported format_version {version!r}"
            f" (expected {FORMAT_VERSION})"
        )
    return payload


def config_to_json(cfg: JourneyConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["schedule"] = cfg.schedule.to_dict()
    d["refine"] = dataclasses.asdict(cfg.refine)
    d["effects"] = list(cfg.effects)
    return d


def config_from_json(d: dict) -> JourneyConfig:
    d = dict(d)
    schedule = MoveSchedule.from_dict(d.pop("schedule"))
    refine = RefineConfig(**d.pop("refine"))
    d["effects"] = tuple(d["effects"])
    return JourneyConfig(schedule=schedule, refine=refine, **d)


def save_archive(archive: JourneyArchive, path: str | Path):
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    _dump_json(
        root / "config.json",
        {"format_version": FORMAT_VERSION, "config": config_to_json(archive.config)},
    )
    _dump_json(
        root / "memory.json",
        {"format_version": FORMAT_VERSION, "entries": archive.memory.to_json()},
    )
    for rec in archive.scenes:
        sdir = root / f"scene_{rec.index:03d}"
        sdir.mkdir(exist_ok=True)
        _write_bytes(sdir / "image.png", sio.image_to_png(rec.image))
        depth_grid = np.where(rec.depth.valid, rec.depth.values, 0.0)
        _write_bytes(sdir / "depth.pfm", sio.write_pfm(depth_grid))
        _write_bytes(sdir / "disparity.pfm", sio.write_pfm(rec.disparity.values))
        _dump_json(
            sdir / "segments.json",
            {
                "format_version": FORMAT_VERSION,
                "segments": rec.segments.to_json(),
                "sky": rec.sky.to_json(),
            },
        )
        _dump_json(
            sdir / "camera.json",
            {
                "format_version": FORMAT_VERSION,
                "index": rec.index,
                "intrinsics": archive.config.intrinsics().to_dict(),
                "pose": rec.pose.matrix().tolist(),
                "move": rec.move.to_dict() if rec.move else None,
                "point_range": list(rec.point_range),
                "description": rec.description.to_json(),
            },
        )
        _dump_json(
            sdir / "correction.json",
            {"format_version": FORMAT_VERSION, **rec.correction.to_dict()},
        )
    _write_bytes(root / "cloud.ply", sio.write_ply(archive.cloud))
    _dump_json(
        root / "trajectory.json",
        {"format_version": FORMAT_VERSION, **archive.trajectory.to_json()},
    )


def load_archive(path: str | Path) -> JourneyArchive:
    root = Path(path)
    if not root.is_dir():
        raise ArchiveError(f"not an archive directory: {root}")
    cfg = config_from_json(_load_json(root / "config.json")["config"])
    memory = DescriptionMemory.from_json(_load_json(root / "memory.json")["entries"])
    traj_json = _load_json(root / "trajectory.json")
    traj_json.pop("format_version")
    trajectory = CameraTrajectory.from_json(traj_json)

    ply_path = root / "cloud.ply"
    if not ply_path.exists():
        raise ArchiveError("archive member missing: cloud.ply")
    try:
        cloud = sio.read_ply(ply_path.read_bytes())
    except sio.FormatError as e:
        raise ArchiveError(f"cloud.ply: {e}") from e

    scenes = []
    for sdir in sorted(root.glob("scene_*")):
        cam = _load_json(sdir / "camera.json")
        seg_json = _load_json(sdir / "segments.json")
        corr = _load_json(sdir / "correction.json")
        for member in ("image.png", "depth.pfm", "disparity.pfm"):
            if not (sdir / member).exists():
                raise ArchiveError(f"archive member missing: {sdir.name}/{member}")
        image = sio.png_to_image((sdir / "image.png").read_bytes())
        depth_grid = sio.read_pfm((sdir / "depth.pfm").read_bytes()).astype(np.float64)
        valid = depth_grid > 0
        depth = DepthMap(values=np.where(valid, depth_grid, 1.0), valid=valid)
        disparity = DisparityMap(
            sio.read_pfm((sdir / "disparity.pfm").read_bytes()).astype(np.float64)
        )
        scenes.append(
            SceneRecord(
                index=int(cam["index"]),
                description=SceneDescription.from_json(cam["description"]),
                image=image,
                disparity=disparity,
                depth=depth,
                segments=SegmentSet.from_json(seg_json["segments"]),
                sky=SkyMask.from_json(seg_json["sky"]),
                pose=CameraPose.from_matrix(np.array(cam["pose"])),
                correction=DepthCorrection.from_dict(corr),
                point_range=tuple(cam["point_range"]),
                move=MoveSpec.from_dict(cam["move"]) if cam["move"] else None,
            )
        )
    scenes.sort(key=lambda r: r.index)
    if not scenes:
        raise ArchiveError("archive contains no scenes")
    return JourneyArchive(
        config=cfg, memory=memory, scenes=scenes, cloud=cloud, trajectory=trajectory
    )
