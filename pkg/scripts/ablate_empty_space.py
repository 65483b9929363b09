#!/usr/bin/env python
"""Empty-space requirement ablation.

For each seed, run one scene expansion with the oracle inpainter and record
whether the prompted object was spawned. Two arms:

  - control: empty_ratio_min = 0.25, full camera step
  - ablated: empty_ratio_min = 0, camera step scaled down (default 1/10)

With the requirement active the camera retreats until the inpainting region
is large enough for the object to fit; without it the region stays too small
and the object rarely appears.

Usage:
    python scripts/ablate_empty_space.py --runs 40 --size 64
"""

import argparse
import sys

from scenejourney.backends.synthetic import make_synthetic_suite
from scenejourney.backends.world import SyntheticWorld
from scenejourney.camera_path import MoveSchedule
from scenejourney.depth_refine import RefineConfig
from scenejourney.geometry import CameraPose
from scenejourney.journey import (
    JourneyConfig,
    SceneDescription,
    generate_next_scene,
    run_journey,
)


def spawn_run(seed, empty_min, step_scale, res, span):
    # morphology radii scaled with resolution (defaults assume 512)
    radius = max(res // 64, 1)
    cfg = JourneyConfig(
        seed=seed, scene_count=1, resolution=res,
        empty_ratio_min=empty_min, validate=False,
        refine=RefineConfig(
            sky_erosion_radius=radius,
            boundary_strip_radius=radius,
            upper_dilation_radius=radius,
        ),
        schedule=MoveSchedule(straight_translation=0.0005 * step_scale),
    )
    world = SyntheticWorld(cfg.seed)
    suite = make_synthetic_suite(
        world, cfg.intrinsics(), CameraPose.identity(), min_spawn_span=span
    )
    journey = run_journey(cfg, suite, input_text="a quiet meadow")
    desc = SceneDescription(cfg.style, ("sphere",), "open meadow")
    journey.memory.append(desc)
    generate_next_scene(
        journey.scenes[0], journey.cloud, desc, journey.memory, suite, cfg
    )
    return bool(suite.inpainter.spawned)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=40)
    ap.add_argument("--seed0", type=int, default=100)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--span", type=int, default=None,
                    help="min free square side for a spawn (default size/8)")
    ap.add_argument("--step-scale", type=float, default=0.1,
                    help="camera step multiplier in the ablated arm")
    args = ap.parse_args(argv)
    span = args.span if args.span is not None else max(args.size // 8, 1)

    arms = [
        ("empty_ratio_min=0.25, full step", 0.25, 1.0),
        (f"empty_ratio_min=0, {args.step_scale}x step", 0.0, args.step_scale),
    ]
    for name, empty_min, scale in arms:
        hits = sum(
            spawn_run(args.seed0 + k, empty_min, scale, args.size, span)
            for k in range(args.runs)
        )
        print(f"{name}: spawned {hits}/{args.runs} ({hits / args.runs:.0%})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
