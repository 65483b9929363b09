"""Deterministic synthetic backends driven by the procedural world oracle."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..geometry import DisparityMap
from .detector import DetectorThresholds, heuristic_border_detect
from .interfaces import BackendSuite, RenderContext
from .world import SyntheticWorld, largest_masked_square

# nouns the oracle inpainter knows how to spawn
SPAWNABLE = ("sphere", "box")

_SCENE_NOUNS = [
    ["meadow", "stream", "willow"],
    ["village", "lantern", "bridge"],
    ["harbor", "boat", "lighthouse"],
    ["forest", "deer", "cottage"],
    ["canyon", "river", "eagle"],
    ["garden", "fountain", "statue"],
]

_BACKGROUNDS = [
    "quiet green meadow under a bright sky",
    "small stone village with warm light",
    "calm harbor water and distant hills",
    "deep mossy forest with soft mist",
    "red canyon walls above a narrow river",
    "old walled garden with gravel paths",
]


def _stable_int(*parts) -> int:
    h = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(h[:8], "little")


@dataclass(frozen=True)
class SyntheticDepthCorruption:
    """Seeded affine error plus boundary smoothing, emulating monocular
    estimator failure modes."""

    scale: float = 1.0
    offset: float = 0.0
    smoothing_radius: int = 0


class SyntheticDepthEstimator:
    def __init__(self, world: SyntheticWorld, corruption: SyntheticDepthCorruption | None = None):
        self.world = world
        self.corruption = corruption or SyntheticDepthCorruption()

    def estimate(self, image: np.ndarray, ctx: RenderContext) -> DisparityMap:
        d = self.world.disparity(ctx.intr, ctx.pose).values
        c = self.corruption
        if c.smoothing_radius > 0:
            d = ndimage.uniform_filter(d, size=2 * c.smoothing_radius + 1)
        d = c.scale * d + c.offset
        return DisparityMap(np.maximum(d, 0.0))


class SyntheticSegmenter:
    def __init__(self, world: SyntheticWorld):
        self.world = world

    def segment(self, image: np.ndarray, ctx: RenderContext):
        return self.world.masks(ctx.intr, ctx.pose)


class OracleInpainter:
    """Fills masked pixels with the world's true rendering; if the prompt
    names a spawnable object and the mask leaves enough room, the world
    grows that object in the unobserved region first."""

    def __init__(self, world: SyntheticWorld, min_spawn_span: int = 64):
        self.world = world
        self.min_spawn_span = min_spawn_span
        self.spawned: list[tuple[int, str]] = []

    def inpaint(self, image, mask, prompt, seed, ctx: RenderContext):
        mask = np.asarray(mask, dtype=bool)
        wanted = [w for w in SPAWNABLE if w in prompt.lower()]
        if wanted:
            self._maybe_spawn(wanted[0], mask, seed, ctx)
        if not mask.any():
            return np.asarray(image, dtype=np.float64).copy()
        color, _, _ = self.world.render(ctx.intr, ctx.pose)
        out = np.asarray(image, dtype=np.float64).copy()
        out[mask] = color[mask]
        return out

    def _maybe_spawn(self, kind: str, mask: np.ndarray, seed: int, ctx: RenderContext):
        side, (row, col) = largest_masked_square(mask)
        if side < self.min_spawn_span:
            return
        rng = np.random.default_rng(_stable_int(self.world.seed, seed, len(self.spawned)))
        intr, pose = ctx.intr, ctx.pose
        d_cam = np.array(
            [(col - intr.px) / intr.focal, (row - intr.py) / intr.focal, 1.0]
        )
        dir_world = pose.rotation @ d_cam
        # place the object along the masked ray, in front of whatever the
        # world already has there
        hit_depth, _hit = self.world._trace(
            pose.translation.reshape(1, 3), dir_world.reshape(1, 3)
        )
        depth = float(min(hit_depth[0] * 0.7, 0.02))
        radius = 0.35 * depth * side / intr.focal
        center = pose.translation + depth * dir_world
        color = rng.uniform(0.3, 0.9, size=3)
        if kind == "sphere":
            self.world.spawn_sphere(center, radius, color)
        else:
            self.world.spawn_box(center, radius, color)
        self.spawned.append((len(self.spawned), kind))


class ScriptedDescriber:
    """Deterministic stand-in for the description LLM."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def describe(self, task: str, memory: list[dict]) -> dict:
        step = len(memory)
        rng = np.random.default_rng(_stable_int(self.seed, step))
        i = int(rng.integers(0, len(_SCENE_NOUNS)))
        style = memory[0]["style"] if memory else "plein air painting"
        return {
            "style": style,
            "objects": list(_SCENE_NOUNS[i]),
            "background": _BACKGROUNDS[i],
        }


class SyntheticPairing:
    """Text-to-image pairing: renders the shared world at the start pose."""

    def __init__(self, world: SyntheticWorld, intr, pose):
        self.world = world
        self.intr = intr
        self.pose = pose
        self.calls = 0

    def pair(self, text: str, seed: int) -> np.ndarray:
        self.calls += 1
        color, _, _ = self.world.render(self.intr, self.pose)
        return color


class HeuristicEffectDetector:
    def __init__(self, thresholds: DetectorThresholds | None = None):
        self.thresholds = thresholds or DetectorThresholds()
        self.queries = 0

    def detect(self, image: np.ndarray, effects: list[str]) -> list[bool]:
        self.queries += len(effects)
        return [
            heuristic_border_detect(image, e, self.thresholds) for e in effects
        ]


def make_synthetic_suite(
    world: SyntheticWorld,
    intr,
    start_pose,
    corruption: SyntheticDepthCorruption | None = None,
    min_spawn_span: int = 64,
) -> BackendSuite:
    return BackendSuite(
        depth_estimator=SyntheticDepthEstimator(world, corruption),
        segmenter=SyntheticSegmenter(world),
        inpainter=OracleInpainter(world, min_spawn_span=min_spawn_span),
        describer=ScriptedDescriber(world.seed),
        pairing=SyntheticPairing(world, intr, start_pose),
        effect_detector=HeuristicEffectDetector(),
        mode="synthetic",
    )
