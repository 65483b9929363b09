import dataclasses

import numpy as np
import pytest

from scenejourney import renderer
from scenejourney.backends.interfaces import BackendSuite, BackendUnavailable, RenderContext
from scenejourney.backends.synthetic import make_synthetic_suite
from scenejourney.backends.world import SyntheticWorld
from scenejourney.geometry import CameraPose, PointCloud
from scenejourney.journey import (
    DescriptionMemory,
    JourneyConfig,
    JourneyError,
    SceneDescription,
    SceneError,
    complete_scene,
    generate_next_description,
    generate_next_scene,
    run_journey,
    validate_scene,
)


def small_config(**kw):
    base = {"seed": 0, "scene_count": 3, "resolution": 64}
    base.update(kw)
    return JourneyConfig(**base)


def suite_for(cfg):
    world = SyntheticWorld(cfg.seed)
    return make_synthetic_suite(world, cfg.intrinsics(), CameraPose.identity())


def run_small(cfg=None, text="a quiet meadow with a stream"):
    cfg = cfg or small_config()
    suite = suite_for(cfg)
    return run_journey(cfg, suite, input_text=text), suite


class RejectingDetector:
    """Rejects the first `reject_first` candidate images, then accepts."""

    def __init__(self, reject_first):
        self.reject_first = reject_first
        self.candidates = 0
        self.queries = 0

    def detect(self, image, effects):
        self.queries += len(effects)
        # the first effect query of a candidate decides its fate
        self.candidates += 1
        reject = self.candidates <= self.reject_first
        return [reject] + [False] * (len(effects) - 1)


class UnavailableDetector:
    def detect(self, image, effects):
        raise BackendUnavailable("detector offline")


class RecordingInpainter:
    def __init__(self, inner):
        self.inner = inner
        self.seeds = []
        self.prompts = []

    def inpaint(self, image, mask, prompt, seed, ctx):
        self.seeds.append(seed)
        self.prompts.append(prompt)
        return self.inner.inpaint(image, mask, prompt, seed, ctx)


class StubDescriber:
    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = 0

    def describe(self, task, memory):
        reply = self.replies[min(self.calls, len(self.replies) - 1)]
        self.calls += 1
        return reply


class TestDescriptionMemory:
    def test_append_only_growth(self):
        m = DescriptionMemory()
        for i in range(4):
            m.append(SceneDescription("s", ("river",), f"bg {i}"))
            assert len(m) == i + 1
        assert m.entries[0].background == "bg 0"

    def test_amend_replaces_newest(self):
        m = DescriptionMemory([SceneDescription("s", ("river",), "old")])
        m.amend_last(SceneDescription("s", ("stone",), "new"))
        assert len(m) == 1
        assert m.entries[0].objects == ("stone",)

    def test_amend_empty_rejected(self):
        with pytest.raises(JourneyError):
            DescriptionMemory().amend_last(SceneDescription("s", ("river",), ""))

    def test_json_round_trip(self):
        m = DescriptionMemory(
            [SceneDescription("oil painting", ("river", "stone"), "green meadow")]
        )
        back = DescriptionMemory.from_json(m.to_json())
        assert back.entries == m.entries

    def test_object_count_bounds(self):
        with pytest.raises(ValueError):
            SceneDescription("s", (), "bg")
        with pytest.raises(ValueError):
            SceneDescription("s", ("a", "b", "c", "d"), "bg")


class TestGenerateNextDescription:
    def test_appends_filtered_description(self):
        memory = DescriptionMemory([SceneDescription("s", ("scene",), "")])
        d = StubDescriber(
            [{"style": "s", "objects": ["shimmering river"], "background": "a mossy stone"}]
        )
        desc = generate_next_description(memory, d)
        assert len(memory) == 2
        assert desc.objects == ("river",)
        assert "mossy" in desc.background and "stone" in desc.background
        assert "a " not in desc.background  # function words filtered

    def test_retries_then_fails_on_unknown_words(self):
        memory = DescriptionMemory([SceneDescription("s", ("scene",), "")])
        d = StubDescriber([{"style": "s", "objects": ["zorp blarg"], "background": ""}])
        with pytest.raises(JourneyError):
            generate_next_description(memory, d, max_attempts=3)
        assert d.calls == 3
        assert len(memory) == 1  # nothing appended on failure

    def test_style_pinned_to_first_entry(self):
        memory = DescriptionMemory([SceneDescription("woodcut print", ("scene",), "")])
        d = StubDescriber([{"style": "other", "objects": ["river"], "background": ""}])
        desc = generate_next_description(memory, d)
        assert desc.style == "woodcut print"

    def test_empty_memory_rejected(self):
        with pytest.raises(JourneyError):
            generate_next_description(DescriptionMemory(), StubDescriber([{}]))


class TestValidateScene:
    def test_single_query_per_effect_short_circuits(self):
        cfg = small_config(effects=("photo border", "painting frame", "out-of-focus objects"))
        det = RejectingDetector(reject_first=10)
        verdict, effect = validate_scene(np.zeros((8, 8, 3)), det, cfg)
        assert verdict == "rejected"
        assert effect == "photo border"
        assert det.queries == 1  # stopped at the first hit

    def test_accept_queries_all_effects(self):
        cfg = small_config()
        det = RejectingDetector(reject_first=0)
        verdict, effect = validate_scene(np.zeros((8, 8, 3)), det, cfg)
        assert verdict == "accepted" and effect is None
        assert det.queries == len(cfg.effects)

    def test_empty_effects_rejected(self):
        cfg = small_config(effects=())
        with pytest.raises(ValueError):
            validate_scene(np.zeros((8, 8, 3)), RejectingDetector(0), cfg)


class TestRunJourney:
    def test_memory_grows_one_per_scene(self):
        arc, _ = run_small()
        assert len(arc.memory) == len(arc.scenes) == 3

    def test_pairing_called_once_for_text(self):
        arc, suite = run_small()
        assert suite.pairing.calls == 1

    def test_image_input_skips_pairing(self):
        cfg = small_config()
        suite = suite_for(cfg)
        image, _, _ = suite.pairing.world.render(cfg.intrinsics(), CameraPose.identity())
        arc = run_journey(cfg, suite, input_image=image)
        assert suite.pairing.calls == 0
        assert len(arc.scenes) == 3

    def test_single_scene_journey(self):
        cfg = small_config(scene_count=1)
        arc, _ = run_small(cfg)
        assert len(arc.scenes) == 1
        assert arc.scenes[0].move is None
        assert set(np.unique(arc.cloud.scene_id)) == {0}

    def test_five_scene_journey(self):
        cfg = small_config(scene_count=5)
        arc, _ = run_small(cfg)
        assert len(arc.scenes) == 5
        assert set(np.unique(arc.cloud.scene_id)) == set(range(5))
        assert len(arc.trajectory.moves) == 4

    def test_three_detector_queries_per_generated_scene(self):
        cfg = small_config()
        arc, suite = run_small(cfg)
        # synthetic journeys pass validation first try: one query per effect
        assert suite.effect_detector.queries == len(cfg.effects) * (len(arc.scenes) - 1)

    def test_point_ranges_tag_scene_ids(self):
        arc, _ = run_small()
        for rec in arc.scenes:
            lo, hi = rec.point_range
            assert hi > lo
            assert (arc.cloud.scene_id[lo:hi] == rec.index).all()

    def test_deterministic(self):
        a, _ = run_small()
        b, _ = run_small()
        assert np.array_equal(a.cloud.points, b.cloud.points)
        assert np.array_equal(a.cloud.colors, b.cloud.colors)
        for ra, rb in zip(a.scenes, b.scenes):
            assert np.array_equal(ra.image, rb.image)
            assert np.array_equal(ra.pose.matrix(), rb.pose.matrix())
        assert a.memory.entries == b.memory.entries

    def test_empty_space_extends_translation(self):
        arc, _ = run_small()
        cfg = arc.config
        base = cfg.schedule.straight_translation
        for rec in arc.scenes[1:]:
            if rec.move.kind == "straight":
                k = round(np.log(rec.move.translation / base) / np.log(1.5))
                assert np.isclose(rec.move.translation, base * 1.5**k)

    def test_empty_ratio_met_at_each_new_camera(self):
        arc, _ = run_small()
        cfg = arc.config
        intr = cfg.intrinsics()
        for rec in arc.scenes[1:]:
            lo = rec.point_range[0]
            prefix = PointCloud(
                arc.cloud.points[:lo], arc.cloud.colors[:lo], arc.cloud.scene_id[:lo]
            )
            out = renderer.rasterize(
                prefix, intr, rec.pose, splat_radius=cfg.splat_radius
            )
            assert renderer.empty_ratio(out) >= cfg.empty_ratio_min

    def test_rendered_pixels_survive_inpainting_exactly(self):
        arc, _ = run_small()
        cfg = arc.config
        intr = cfg.intrinsics()
        rec = arc.scenes[1]
        lo = rec.point_range[0]
        prefix = PointCloud(
            arc.cloud.points[:lo], arc.cloud.colors[:lo], arc.cloud.scene_id[:lo]
        )
        out = renderer.rasterize(prefix, intr, rec.pose, splat_radius=cfg.splat_radius)
        mask = renderer.inpaint_mask(out, cfg.refine)
        assert np.array_equal(rec.image[~mask], out.color[~mask])

    def test_input_arguments_exclusive(self):
        cfg = small_config()
        suite = suite_for(cfg)
        with pytest.raises(JourneyError):
            run_journey(cfg, suite)
        with pytest.raises(JourneyError):
            run_journey(
                cfg, suite, input_text="x", input_image=np.zeros((64, 64, 3))
            )

    def test_wrong_image_size_rejected(self):
        cfg = small_config()
        suite = suite_for(cfg)
        with pytest.raises(JourneyError):
            run_journey(cfg, suite, input_image=np.zeros((32, 32, 3)))

    def test_on_scene_called_per_scene(self):
        cfg = small_config()
        suite = suite_for(cfg)
        snapshots = []
        run_journey(
            cfg, suite, input_text="a meadow",
            on_scene=lambda a: snapshots.append(len(a.scenes)),
        )
        assert snapshots == [1, 2, 3]


def _first_scene_state(cfg, suite):
    arc = run_journey(
        dataclasses.replace(cfg, scene_count=1), suite, input_text="a meadow"
    )
    return arc.scenes[0], arc.cloud, arc.memory


class TestRegenerationPolicy:
    def _generate(self, detector, cfg=None):
        cfg = cfg or small_config()
        suite = suite_for(cfg)
        current, cloud, memory = _first_scene_state(cfg, suite)
        inpainter = RecordingInpainter(suite.inpainter)
        suite = dataclasses.replace(
            suite, effect_detector=detector, inpainter=inpainter
        )
        desc = generate_next_description(memory, suite.describer)
        record, new_cloud, move = generate_next_scene(
            current, cloud, desc, memory, suite, cfg
        )
        return record, inpainter, memory

    def test_accept_first_try_single_seed(self):
        det = RejectingDetector(0)
        record, inpainter, _ = self._generate(det)
        assert len(inpainter.seeds) == 1

    def test_rejections_bump_seed_first(self):
        det = RejectingDetector(2)
        record, inpainter, memory = self._generate(det)
        assert len(inpainter.seeds) == 3
        assert len(set(inpainter.seeds)) == 3  # fresh seed per attempt
        # the description was not changed during seed bumps
        assert len(set(inpainter.prompts)) == 1

    def test_then_description_regenerated(self):
        det = RejectingDetector(3)
        record, inpainter, memory = self._generate(det)
        assert len(inpainter.seeds) == 4
        # fourth attempt came from an amended description
        assert len(memory) == 2

    def test_exhaustion_raises_scene_error(self):
        det = RejectingDetector(10)
        with pytest.raises(SceneError):
            self._generate(det)

    def test_detector_unavailable_uses_crop_fallback(self):
        cfg = small_config()
        record, inpainter, _ = self._generate(UnavailableDetector(), cfg)
        assert record.image.shape == (cfg.resolution, cfg.resolution, 3)
        assert inpainter.seeds  # inpainter was used

    def test_validation_disabled_skips_detector(self):
        cfg = small_config(validate=False)

        class ExplodingDetector:
            def detect(self, image, effects):
                raise AssertionError("must not be called")

        record, inpainter, _ = self._generate(ExplodingDetector(), cfg)
        assert len(inpainter.seeds) == 1


class TestCompleteScene:
    def test_scene_zero_untouched(self):
        cfg = small_config()
        suite = suite_for(cfg)
        record, cloud, _ = _first_scene_state(cfg, suite)
        out = complete_scene(record, record.pose, cloud, suite, cfg)
        assert out is cloud

    def test_high_threshold_adds_nothing(self):
        cfg = small_config(hole_threshold=1.0)
        arc, suite = run_small(cfg)
        # with an impossible threshold, all cloud points come from scene lifts
        for rec in arc.scenes:
            lo, hi = rec.point_range
            assert (arc.cloud.scene_id[lo:hi] == rec.index).all()
        total = sum(hi - lo for (lo, hi) in (r.point_range for r in arc.scenes))
        assert total == len(arc.cloud)

    def test_completion_points_tagged_with_scene(self):
        cfg = small_config(scene_count=2)
        arc, _ = run_small(cfg)
        lo, hi = arc.scenes[1].point_range
        extra = arc.cloud.scene_id[hi:]
        if len(extra):
            assert (extra == 1).all()

    def test_completion_reduces_holes(self):
        cfg = small_config(scene_count=2)
        arc, _ = run_small(cfg)
        # after completion every intermediate camera renders nearly hole-free
        from scenejourney.camera_path import CameraTrajectory

        rec = arc.scenes[1]
        traj = CameraTrajectory(
            keyposes=[arc.scenes[0].pose, rec.pose],
            moves=[rec.move],
            frames_per_move=max(cfg.completion_cameras + 1, 2),
            sine_amplitude=0.0,
            easing_frames=0,
        )
        from scenejourney.camera_path import interpolate

        intr = cfg.intrinsics()
        for cam in interpolate(traj)[1:-1]:
            out = renderer.rasterize(
                arc.cloud, intr, cam, splat_radius=cfg.splat_radius
            )
            assert renderer.empty_ratio(out) <= cfg.hole_threshold
