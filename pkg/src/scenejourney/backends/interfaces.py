"""Uniform interfaces for the learned components of the pipeline.

Every model the journey depends on (depth, segmentation, inpainting,
description, pairing, effect detection) is hidden behind one of these
protocols, so the loop runs identically against deterministic synthetic
oracles and real model servers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from ..geometry import CameraIntrinsics, CameraPose, DisparityMap
from ..depth_refine import SegmentSet, SkyMask


class BackendError(RuntimeError):
    pass


class BackendUnavailable(BackendError):
    """Transport-level failure after retries; callers may engage fallbacks."""


@dataclass(frozen=True)
class RenderContext:
    """Camera state of the view an image was rendered from.

    Synthetic oracle backends need it to answer exactly; remote backends
    ignore it.
    """

    intr: CameraIntrinsics
    pose: CameraPose


@runtime_checkable
class DepthEstimator(Protocol):
    def estimate(self, image: np.ndarray, ctx: RenderContext) -> DisparityMap: ...


@runtime_checkable
class Segmenter(Protocol):
    def segment(
        self, image: np.ndarray, ctx: RenderContext
    ) -> tuple[SegmentSet, SkyMask]: ...


@runtime_checkable
class Inpainter(Protocol):
    def inpaint(
        self,
        image: np.ndarray,
        mask: np.ndarray,
        prompt: str,
        seed: int,
        ctx: RenderContext,
    ) -> np.ndarray: ...


@runtime_checkable
class Describer(Protocol):
    def describe(self, task: str, memory: list[dict]) -> dict: ...


@runtime_checkable
class PairingGenerator(Protocol):
    def pair(self, text: str, seed: int) -> np.ndarray: ...


@runtime_checkable
class EffectDetector(Protocol):
    def detect(self, image: np.ndarray, effects: list[str]) -> list[bool]: ...


@dataclass
class BackendSuite:
    depth_estimator: DepthEstimator
    segmenter: Segmenter
    inpainter: Inpainter
    describer: Describer
    pairing: PairingGenerator
    effect_detector: EffectDetector
    mode: str = "synthetic"  # synthetic | http
