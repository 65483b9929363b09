"""The auto-regressive journey loop: description memory, per-scene visual
generation, validation with regeneration, complete-as-you-go filling, and
the end-to-end run."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from . import lexicon, prompts, renderer
from .backends.interfaces import BackendSuite, BackendUnavailable, RenderContext
from .camera_path import CameraTrajectory, MoveSchedule, MoveSpec, next_scene_camera
from .depth_refine import (
    RefineConfig,
    SegmentSet,
    SkyMask,
    apply_sky,
    refine_with_segments,
)
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    DepthMap,
    DisparityMap,
    PointCloud,
    depth_to_disparity,
    disparity_to_depth,
    unproject,
)
from .registration import (
    DepthCorrection,
    align_depth,
    build_targets,
    resolve_disocclusions,
)

log = logging.getLogger("scenejourney")


class JourneyError(RuntimeError):
    pass


class SceneError(JourneyError):
    """A scene could not be generated; carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def _stable_seed(*parts) -> int:
    h = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(h[:4], "little")


@dataclass(frozen=True)
class SceneDescription:
    style: str
    objects: tuple[str, ...]
    background: str

    def __post_init__(self):
        if not (1 <= len(self.objects) <= 3):
            raise ValueError("a scene needs between 1 and 3 entities")
        object.__setattr__(self, "objects", tuple(self.objects))

    def prompt(self) -> str:
        return f"{self.style}, {', '.join(self.objects)}, {self.background}"

    def to_json(self) -> dict:
        return {
            "style": self.style,
            "objects": list(self.objects),
            "background": self.background,
        }

    @staticmethod
    def from_json(d: dict) -> "SceneDescription":
        return SceneDescription(
            style=d["style"], objects=tuple(d["objects"]), background=d["background"]
        )


class DescriptionMemory:
    """Append-only history of scene descriptions."""

    def __init__(self, entries: list[SceneDescription] | None = None):
        self._entries: list[SceneDescription] = list(entries or [])

    @property
    def entries(self) -> tuple[SceneDescription, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def append(self, desc: SceneDescription):
        self._entries.append(desc)

    def amend_last(self, desc: SceneDescription):
        """Replace the newest entry; only the regeneration path may use this."""
        if not self._entries:
            raise JourneyError("cannot amend an empty memory")
        self._entries[-1] = desc

    def to_json(self) -> list[dict]:
        return [e.to_json() for e in self._entries]

    @staticmethod
    def from_json(items: list[dict]) -> "DescriptionMemory":
        return DescriptionMemory([SceneDescription.from_json(d) for d in items])


@dataclass
class SceneRecord:
    index: int
    description: SceneDescription
    image: np.ndarray  # (H, W, 3) in [0, 1]
    disparity: DisparityMap  # raw estimate
    depth: DepthMap  # refined + aligned
    segments: SegmentSet
    sky: SkyMask
    pose: CameraPose
    correction: DepthCorrection
    point_range: tuple[int, int]  # [start, end) into the journey cloud
    move: MoveSpec | None = None  # move that led to this scene (None for scene 0)


@dataclass
class JourneyConfig:
    seed: int = 0
    scene_count: int = 3
    style: str = "plein air painting"
    effects: tuple[str, ...] = prompts.DEFAULT_EFFECTS
    empty_ratio_min: float = 0.25
    max_regenerations: int = 4
    hole_threshold: float = 0.002
    resolution: int = 512
    far_floor: float = 0.0015
    depth_shift: float = 0.0001
    splat_radius: int = 1
    temperature: float = 1.0
    disocclusion_epsilon: float = 1e-4
    align_iters: int = 200
    align_step: float = 0.1
    completion_cameras: int = 5
    frames_per_move: int = 30
    sine_amplitude: float = 0.00005
    sine_periods: int = 1
    easing_frames: int = 8
    max_points: int = 20_000_000
    validate: bool = True
    schedule: MoveSchedule = field(default_factory=MoveSchedule)
    refine: RefineConfig = field(default_factory=RefineConfig)

    def __post_init__(self):
        if self.scene_count < 1:
            raise ValueError("scene_count must be >= 1")
        if not (0.0 <= self.empty_ratio_min < 1.0):
            raise ValueError("empty_ratio_min must be in [0, 1)")

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(
            width=self.resolution,
            height=self.resolution,
            focal=self.resolution / 2.0,
        )


@dataclass
class JourneyArchive:
    config: JourneyConfig
    memory: DescriptionMemory
    scenes: list[SceneRecord]
    cloud: PointCloud
    trajectory: CameraTrajectory


# ---------------------------------------------------------------------------
# description generation

def generate_next_description(
    memory: DescriptionMemory,
    describer,
    max_attempts: int = 3,
    passthrough: bool = False,
) -> SceneDescription:
    """Ask the describer for the next scene and lexically filter the answer;
    the memory is extended with the accepted description."""
    if len(memory) == 0:
        raise JourneyError("description memory must be non-empty")
    desc = _describe_filtered(memory, describer, max_attempts, passthrough)
    memory.append(desc)
    return desc


def _describe_filtered(
    memory: DescriptionMemory, describer, max_attempts: int, passthrough: bool
) -> SceneDescription:
    style = memory.entries[0].style if len(memory) else None
    last_error = None
    for _ in range(max_attempts):
        raw = describer.describe(prompts.DESCRIBE_TASK, memory.to_json())
        objects = lexicon.filter_entities(list(raw.get("objects", [])), passthrough)[:3]
        if not objects:
            last_error = "no entities survived the lexical filter"
            continue
        background = " ".join(
            lexicon.filter_words(str(raw.get("background", "")), passthrough)
        )
        return SceneDescription(
            style=style if style is not None else str(raw.get("style", "")),
            objects=tuple(objects),
            background=background,
        )
    raise JourneyError(f"describer failed: {last_error}")


# ---------------------------------------------------------------------------
# validation

def validate_scene(image: np.ndarray, detector, cfg: JourneyConfig):
    """(accepted, None) or (rejected, first detected effect). Raises
    BackendUnavailable when the detector transport fails, so the caller can
    engage the render-large-and-crop fallback."""
    if not cfg.effects:
        raise ValueError("effects list must be non-empty")
    for effect in cfg.effects:
        if detector.detect(image, [effect])[0]:
            return "rejected", effect
    return "accepted", None


# ---------------------------------------------------------------------------
# depth lifting shared by scene 0 and later scenes

def _lift_depth(
    image: np.ndarray,
    ctx: RenderContext,
    backends: BackendSuite,
    cfg: JourneyConfig,
    targets=None,
):
    """Estimate, refine, and optionally align depth for an image.

    Returns (raw disparity, refined DepthMap, segments, sky, correction).
    """
    raw = backends.depth_estimator.estimate(image, ctx)
    segs, sky = backends.segmenter.segment(image, ctx)
    correction = DepthCorrection()
    disparity = raw
    depth = disparity_to_depth(disparity, cfg.far_floor, cfg.depth_shift)
    depth = refine_with_segments(depth, segs, cfg.refine)
    if targets is not None and len(targets) > 0:
        refined_disp = depth_to_disparity(depth, cfg.depth_shift)
        # fit on the refined disparity, but only where depth survived
        correction, _ = align_depth(
            refined_disp,
            _valid_targets(targets, depth),
            iters=cfg.align_iters,
            step=cfg.align_step,
            depth_shift=cfg.depth_shift,
        )
        corrected = correction.apply(refined_disp)
        masked = np.where(depth.valid, corrected.values, 0.0)
        depth = disparity_to_depth(DisparityMap(masked), cfg.far_floor, cfg.depth_shift)
    depth = apply_sky(depth, sky, cfg.refine)
    return raw, depth, segs, sky, correction


def _valid_targets(targets, depth: DepthMap):
    from .registration import AlignmentTargets

    def keep(pix, d):
        ok = depth.valid[pix[:, 0], pix[:, 1]]
        return pix[ok], d[ok]

    bp, bd = keep(targets.bg_pixels, targets.bg_depths)
    fp, fd = keep(targets.fg_pixels, targets.fg_depths)
    if len(bd) + len(fd) == 0:
        return targets
    return AlignmentTargets(bp, bd, fp, fd)


# ---------------------------------------------------------------------------
# scene generation

def generate_next_scene(
    current: SceneRecord,
    cloud: PointCloud,
    desc: SceneDescription,
    memory: DescriptionMemory,
    backends: BackendSuite,
    cfg: JourneyConfig,
) -> tuple[SceneRecord, PointCloud, MoveSpec]:
    """Generate scene i+1: place the camera, inpaint the partial render,
    validate, lift to registered 3D. Returns the new record, the cloud with
    the new points appended, and the move actually taken."""
    intr = cfg.intrinsics()
    index = current.index + 1
    move = cfg.schedule.move_for(current.index)

    # 1. camera placement with the empty-space requirement
    out = None
    pose = None
    for attempt in range(cfg.max_regenerations + 1):
        pose = next_scene_camera(current.pose, move)
        out = renderer.rasterize(
            cloud, intr, pose, splat_radius=cfg.splat_radius,
            temperature=cfg.temperature,
        )
        ratio = renderer.empty_ratio(out)
        if cfg.empty_ratio_min <= 0 or ratio >= cfg.empty_ratio_min:
            break
        log.info(
            "scene %d: empty ratio %.3f < %.3f, extending move",
            index, ratio, cfg.empty_ratio_min,
        )
        move = replace(move, translation=move.translation * 1.5)
    else:
        raise SceneError(
            f"scene {index}: could not reach empty ratio {cfg.empty_ratio_min}",
            {"last_ratio": renderer.empty_ratio(out)},
        )

    ctx = RenderContext(intr=intr, pose=pose)
    mask = renderer.inpaint_mask(out, cfg.refine)

    # 2+3. inpaint and validate, regenerating on rejection
    image = None
    seed_bumps = 0
    desc_bumps = 0
    for attempt in range(cfg.max_regenerations + 1):
        seed = _stable_seed(cfg.seed, index, seed_bumps, desc_bumps)
        # the inpainter's output is the scene image; the validation loop is
        # what guards against an inpainter that corrupts rendered pixels
        candidate = backends.inpainter.inpaint(
            out.color, mask, desc.prompt(), seed, ctx
        )
        if not cfg.validate:
            image = candidate
            break
        try:
            verdict, effect = validate_scene(candidate, backends.effect_detector, cfg)
        except BackendUnavailable:
            log.warning("scene %d: detector unavailable, crop fallback", index)
            image = _crop_fallback(cloud, pose, desc, seed, backends, cfg)
            break
        if verdict == "accepted":
            image = candidate
            break
        log.info("scene %d: rejected (%s), regenerating", index, effect)
        if seed_bumps < 2:
            seed_bumps += 1
        elif desc_bumps < 2:
            desc_bumps += 1
            desc = _describe_filtered(memory, backends.describer, 3, False)
            memory.amend_last(desc)
        else:
            raise SceneError(
                f"scene {index}: validation kept rejecting",
                {"last_effect": effect, "attempts": attempt + 1},
            )
    if image is None:
        raise SceneError(f"scene {index}: ran out of regeneration attempts")

    # 4. lift to 3D, register against the existing geometry
    targets = build_targets(out, backdrop_depth=1.0 / cfg.refine.sky_disparity)
    raw, depth, segs, sky, correction = _lift_depth(image, ctx, backends, cfg, targets)
    added = unproject(depth, image, intr, pose, scene_id=index, pixel_mask=mask)
    added, moved = resolve_disocclusions(
        cloud,
        added,
        intr,
        current.pose,
        epsilon=cfg.disocclusion_epsilon,
        splat_radius=cfg.splat_radius,
    )
    if moved:
        log.info("scene %d: moved %d disoccluding points back", index, moved)

    start = len(cloud)
    new_cloud = cloud.concat(added)
    record = SceneRecord(
        index=index,
        description=desc,
        image=image,
        disparity=raw,
        depth=depth,
        segments=segs,
        sky=sky,
        pose=pose,
        correction=correction,
        point_range=(start, len(new_cloud)),
        move=move,
    )
    return record, new_cloud, move


def _crop_fallback(
    cloud: PointCloud,
    pose: CameraPose,
    desc: SceneDescription,
    seed: int,
    backends: BackendSuite,
    cfg: JourneyConfig,
) -> np.ndarray:
    """Detector-less mode: render and inpaint at a larger canvas, then
    center-crop, so any generated frame falls outside the kept region."""
    big = cfg.resolution + 48
    intr_big = CameraIntrinsics(
        width=big, height=big, focal=cfg.resolution / 2.0
    )
    ctx = RenderContext(intr=intr_big, pose=pose)
    out = renderer.rasterize(
        cloud, intr_big, pose, splat_radius=cfg.splat_radius,
        temperature=cfg.temperature,
    )
    mask = renderer.inpaint_mask(out, cfg.refine)
    image = backends.inpainter.inpaint(out.color, mask, desc.prompt(), seed, ctx)
    lo = (big - cfg.resolution) // 2
    return image[lo:lo + cfg.resolution, lo:lo + cfg.resolution]


# ---------------------------------------------------------------------------
# completion

def complete_scene(
    record: SceneRecord,
    prev_pose: CameraPose,
    cloud: PointCloud,
    backends: BackendSuite,
    cfg: JourneyConfig,
) -> PointCloud:
    """Fill holes visible from cameras interpolated between the previous and
    the new scene camera; newly inpainted pixels take the depth of their
    nearest valid neighbor."""
    if record.move is None:
        return cloud
    intr = cfg.intrinsics()
    traj = CameraTrajectory(
        keyposes=[prev_pose, record.pose],
        moves=[record.move],
        frames_per_move=max(cfg.completion_cameras + 1, 2),
        sine_amplitude=0.0,
        easing_frames=0,
    )
    from .camera_path import interpolate

    cameras = interpolate(traj)[1:-1]
    for cam in cameras:
        out = renderer.rasterize(
            cloud, intr, cam, splat_radius=cfg.splat_radius,
            temperature=cfg.temperature,
        )
        holes = ~out.valid
        ratio = float(holes.mean())
        if ratio <= cfg.hole_threshold:
            continue
        ctx = RenderContext(intr=intr, pose=cam)
        seed = _stable_seed(cfg.seed, "complete", record.index, len(cloud))
        image = backends.inpainter.inpaint(
            out.color, holes, record.description.prompt(), seed, ctx
        )
        image = np.where(holes[..., None], image, out.color)
        if not out.valid.any():
            continue
        front = out.front_depth()
        idx = ndimage.distance_transform_edt(
            holes, return_distances=False, return_indices=True
        )
        neighbor_depth = front[idx[0], idx[1]]
        depth = DepthMap(values=np.where(holes, neighbor_depth, 1.0), valid=holes)
        added = unproject(
            depth, image, intr, cam, scene_id=record.index, pixel_mask=holes
        )
        cloud = cloud.concat(added)
    return cloud


# ---------------------------------------------------------------------------
# end-to-end

def run_journey(
    cfg: JourneyConfig,
    backends: BackendSuite,
    input_image: np.ndarray | None = None,
    input_text: str | None = None,
    on_scene=None,
) -> JourneyArchive:
    """Run the full auto-regressive loop from a seed image or text.

    `on_scene(archive)` is invoked after every completed scene so callers
    can persist partial progress.
    """
    if (input_image is None) == (input_text is None):
        raise JourneyError("provide exactly one of input image or text")
    intr = cfg.intrinsics()
    pose0 = CameraPose.identity()

    if input_image is None:
        input_image = backends.pairing.pair(input_text, cfg.seed)
        background = " ".join(lexicon.filter_words(input_text)) or input_text
    else:
        background = ""
    if input_image.shape[:2] != (intr.height, intr.width):
        raise JourneyError(
            f"input image must be {intr.height}x{intr.width}"
        )

    memory = DescriptionMemory()
    if input_text is not None and background:
        first_objects = tuple(lexicon.filter_entities([input_text])[:3]) or None
    else:
        first_objects = None
    if first_objects:
        first = SceneDescription(cfg.style, first_objects, background)
    else:
        seeded = DescriptionMemory(
            [SceneDescription(cfg.style, ("scene",), background)]
        )
        raw = _describe_filtered(seeded, backends.describer, 3, False)
        first = SceneDescription(cfg.style, raw.objects, raw.background or background)
    memory.append(first)

    ctx0 = RenderContext(intr=intr, pose=pose0)
    raw0, depth0, segs0, sky0, corr0 = _lift_depth(input_image, ctx0, backends, cfg)
    cloud = unproject(depth0, input_image, intr, pose0, scene_id=0)
    scene0 = SceneRecord(
        index=0,
        description=first,
        image=np.asarray(input_image, dtype=np.float64),
        disparity=raw0,
        depth=depth0,
        segments=segs0,
        sky=sky0,
        pose=pose0,
        correction=corr0,
        point_range=(0, len(cloud)),
        move=None,
    )
    scenes = [scene0]
    moves: list[MoveSpec] = []

    def archive() -> JourneyArchive:
        traj = CameraTrajectory(
            keyposes=[s.pose for s in scenes],
            moves=list(moves),
            frames_per_move=cfg.frames_per_move,
            sine_amplitude=cfg.sine_amplitude,
            sine_periods=cfg.sine_periods,
            easing_frames=cfg.easing_frames,
        )
        return JourneyArchive(
            config=cfg, memory=memory, scenes=scenes, cloud=cloud, trajectory=traj
        )

    if on_scene:
        on_scene(archive())

    for i in range(cfg.scene_count - 1):
        desc = generate_next_description(memory, backends.describer)
        record, cloud, move = generate_next_scene(
            scenes[-1], cloud, desc, memory, backends, cfg
        )
        cloud = complete_scene(record, scenes[-1].pose, cloud, backends, cfg)
        scenes.append(record)
        moves.append(move)
        if on_scene:
            on_scene(archive())
    return archive()
