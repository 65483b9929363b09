"""Command-line surface: generate journeys, export fly-through frames,
inspect archives, and run the effect detector on single images."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from . import archive as arch
from . import io as sio
from .backends import (
    HttpEndpoints,
    SyntheticWorld,
    make_http_suite,
    make_synthetic_suite,
)
from .backends.detector import DetectorThresholds, heuristic_border_detect
from .camera_path import interpolate
from .geometry import CameraPose
from .journey import JourneyConfig, JourneyError, SceneError, run_journey
from .prompts import DEFAULT_EFFECTS
from .renderer import rasterize

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SCENE = 2

log = logging.getLogger("scenejourney")


class _JsonLogFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps(
            {
                "level": record.levelname,
                "logger": record.name,
                "message": record.getMessage(),
            },
            sort_keys=True,
        )


def _setup_logging(verbose: bool):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonLogFormatter())
    root = logging.getLogger("scenejourney")
    root.handlers = [handler]
    root.setLevel(logging.INFO if verbose else logging.WARNING)


def _load_toml(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as f:
        return tomllib.load(f)


def _build_config(args, file_cfg: dict) -> JourneyConfig:
    cfg = JourneyConfig()
    merged = dict(file_cfg.get("journey", {}))
    for key in ("seed", "scenes", "style", "size", "empty_ratio_min"):
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    fields = {f.name for f in dataclasses.fields(JourneyConfig)}
    rename = {"scenes": "scene_count", "size": "resolution"}
    kwargs = {}
    for k, v in merged.items():
        k = rename.get(k, k)
        if k in fields:
            kwargs[k] = v
    if "effects" in kwargs:
        kwargs["effects"] = tuple(kwargs["effects"])
    return dataclasses.replace(cfg, **kwargs)


def _make_suite(args, cfg: JourneyConfig, file_cfg: dict):
    if args.backend == "synthetic":
        world = SyntheticWorld(cfg.seed)
        return make_synthetic_suite(
            world, cfg.intrinsics(), CameraPose.identity()
        )
    endpoints = HttpEndpoints.from_env(
        base_url=getattr(args, "server", "") or file_cfg.get("http", {}).get("base_url", "")
    )
    return make_http_suite(endpoints)


def cmd_generate(args) -> int:
    try:
        file_cfg = _load_toml(args.config)
        cfg = _build_config(args, file_cfg)
        if (args.image is None) == (args.text is None):
            print("error: provide exactly one of --image or --text", file=sys.stderr)
            return EXIT_CONFIG
        suite = _make_suite(args, cfg, file_cfg)
        image = None
        if args.image:
            image = sio.png_to_image(Path(args.image).read_bytes())
    except (OSError, ValueError, JourneyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)

    def persist(partial):
        arch.save_archive(partial, out_dir)

    try:
        result = run_journey(
            cfg, suite, input_image=image, input_text=args.text, on_scene=persist
        )
    except SceneError as e:
        log.warning("scene error: %s (partial archive kept)", e)
        print(f"scene error: {e}", file=sys.stderr)
        return EXIT_SCENE
    except JourneyError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    arch.save_archive(result, out_dir)
    print(f"archive written to {out_dir} ({len(result.scenes)} scenes)")
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        journey = arch.load_archive(args.archive)
    except arch.ArchiveError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = journey.config
    intr = cfg.intrinsics()
    poses = interpolate(journey.trajectory)
    for i, pose in enumerate(poses):
        out = rasterize(
            journey.cloud, intr, pose, splat_radius=cfg.splat_radius,
            temperature=cfg.temperature,
        )
        (out_dir / f"frame_{i:05d}.png").write_bytes(sio.image_to_png(out.color))
    manifest = {
        "format_version": arch.FORMAT_VERSION,
        "fps": args.fps,
        "frame_count": len(poses),
        "pattern": "frame_%05d.png",
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=1)
    )
    print(f"wrote {len(poses)} frames to {out_dir}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        journey = arch.load_archive(args.archive)
    except arch.ArchiveError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    counts = {}
    for rec in journey.scenes:
        lo, hi = rec.point_range
        counts[rec.index] = hi - lo
    summary = {
        "scenes": len(journey.scenes),
        "points": len(journey.cloud),
        "style": journey.memory.entries[0].style if len(journey.memory) else None,
        "points_per_scene": counts,
        "descriptions": [e.to_json() for e in journey.memory.entries],
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_validate_image(args) -> int:
    try:
        image = sio.png_to_image(Path(args.image).read_bytes())
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    effects = args.effects.split(",") if args.effects else list(DEFAULT_EFFECTS)
    results = {
        e: heuristic_border_detect(image, e, DetectorThresholds()) for e in effects
    }
    print(json.dumps(results, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="scenejourney",
        description="Generate and export auto-regressive 3D scene journeys.",
    )
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="run a journey and write an archive")
    g.add_argument("--config", help="TOML config file")
    g.add_argument("--image", help="seed image (PNG)")
    g.add_argument("--text", help="seed text description")
    g.add_argument("--scenes", type=int, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--style", default=None)
    g.add_argument("--size", type=int, default=None, help="image resolution")
    g.add_argument("--empty-ratio-min", dest="empty_ratio_min", type=float, default=None)
    g.add_argument("--backend", choices=["synthetic", "http"], default="synthetic")
    g.add_argument("--server", default="", help="base URL for --backend http")
    g.add_argument("--out", default="journey")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("render", help="export fly-through frames from an archive")
    r.add_argument("archive")
    r.add_argument("--fps", type=int, default=30)
    r.add_argument("--out", default="frames")
    r.set_defaults(func=cmd_render)

    i = sub.add_parser("inspect", help="print an archive summary")
    i.add_argument("archive")
    i.set_defaults(func=cmd_inspect)

    v = sub.add_parser("validate-image", help="run the effect detector on a file")
    v.add_argument("image")
    v.add_argument("--effects", default="")
    v.set_defaults(func=cmd_validate_image)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
