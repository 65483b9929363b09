#!/usr/bin/env python
"""Border-validation ablation.

Wrap the oracle inpainter so a fraction of its outputs get a uniform photo
frame, then run one scene expansion per seed with and without the validation
loop, counting how many accepted scenes are frame-free. The validation loop
should reject framed candidates and regenerate; without it they slip into
the point cloud.

Usage:
    python scripts/ablate_border_validation.py --runs 40 --frame-prob 0.3
"""

import argparse
import dataclasses
import sys

import numpy as np

from scenejourney.backends.detector import add_frame
from scenejourney.backends.synthetic import _stable_int, make_synthetic_suite
from scenejourney.backends.world import SyntheticWorld
from scenejourney.depth_refine import RefineConfig
from scenejourney.geometry import CameraPose
from scenejourney.journey import (
    JourneyConfig,
    SceneError,
    generate_next_description,
    generate_next_scene,
    run_journey,
)


class FramingInpainter:
    """Injects a uniform black frame into a fraction of inpainter outputs,
    deterministically per seed."""

    def __init__(self, inner, prob):
        self.inner = inner
        self.prob = prob
        self.last_framed = False

    def inpaint(self, image, mask, prompt, seed, ctx):
        out = self.inner.inpaint(image, mask, prompt, seed, ctx)
        rng = np.random.default_rng(_stable_int("frame", seed))
        self.last_framed = bool(rng.random() < self.prob)
        if self.last_framed:
            out = add_frame(out, 4, np.zeros(3))
        return out


def arm(validate, runs, seed0, res, prob):
    radius = max(res // 64, 1)
    framed = accepted = errors = 0
    for k in range(runs):
        cfg = JourneyConfig(
            seed=seed0 + k, scene_count=1, resolution=res,
            effects=("photo border",), validate=validate,
            refine=RefineConfig(
                sky_erosion_radius=radius,
                boundary_strip_radius=radius,
                upper_dilation_radius=radius,
            ),
        )
        world = SyntheticWorld(cfg.seed)
        suite = make_synthetic_suite(world, cfg.intrinsics(), CameraPose.identity())
        journey = run_journey(cfg, suite, input_text="a quiet meadow")
        inpainter = FramingInpainter(suite.inpainter, prob)
        suite = dataclasses.replace(suite, inpainter=inpainter)
        desc = generate_next_description(journey.memory, suite.describer)
        try:
            generate_next_scene(
                journey.scenes[0], journey.cloud, desc, journey.memory, suite, cfg
            )
        except SceneError:
            errors += 1
            continue
        accepted += 1
        framed += inpainter.last_framed
    return accepted, framed, errors


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=40)
    ap.add_argument("--seed0", type=int, default=200)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--frame-prob", type=float, default=0.3)
    args = ap.parse_args(argv)

    for validate in (True, False):
        accepted, framed, errors = arm(
            validate, args.runs, args.seed0, args.size, args.frame_prob
        )
        clean = (accepted - framed) / max(accepted, 1)
        label = "validated" if validate else "ablated  "
        print(
            f"{label}: {accepted} accepted ({errors} rejected outright), "
            f"{framed} framed slipped through, {clean:.0%} frame-free"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
