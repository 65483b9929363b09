"""Procedural fallback handlers.

Every handler is a pure function of the raw request bytes: the request's
SHA-256 digest seeds a generator, so identical request bytes always produce
identical responses, with no models loaded.
"""

from __future__ import annotations

import hashlib

import numpy as np

from . import wire

# disparity range served by the fallback depth model: near-field surfaces,
# nearest at the bottom of the image (inverse depth, larger = nearer)
DISPARITY_TOP = 30.0
DISPARITY_BOTTOM = 800.0

_NOUNS = (
    "meadow", "river", "tree", "mountain", "house", "lake",
    "forest", "path", "stream", "valley", "hill", "bridge",
)


class FallbackError(ValueError):
    """Raised for requests that validate against the schema but are
    semantically inconsistent (e.g. mask/image size mismatch)."""

    def __init__(self, path: str, message: str):
        super().__init__(message)
        self.path = path


def _rng(body: bytes) -> np.random.Generator:
    digest = hashlib.sha256(body).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


def depth(request: dict, body: bytes) -> dict:
    image = wire.png_to_image(wire.b64decode(request["image"]))
    h, w = image.shape[:2]
    rng = _rng(body)
    scale = float(rng.uniform(0.9, 1.1))
    rows = np.linspace(DISPARITY_TOP, DISPARITY_BOTTOM, h) * scale
    disparity = np.broadcast_to(rows[:, None], (h, w)).astype(np.float32)
    return {
        "disparity": wire.b64encode(wire.write_pfm(disparity)),
        "width": w,
        "height": h,
    }


def segment(request: dict, body: bytes) -> dict:
    image = wire.png_to_image(wire.b64decode(request["image"]))
    h, w = image.shape[:2]
    bands = min(4, h)
    edges = np.linspace(0, h, bands + 1).astype(int)
    segments = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = np.zeros((h, w), dtype=bool)
        mask[lo:hi] = True
        segments.append({"rle": wire.mask_to_rle(mask), "area": int(mask.sum())})
    sky = np.zeros((h, w), dtype=bool)
    sky[: h // 8] = True
    return {
        "segments": segments,
        "sky": {"rle": wire.mask_to_rle(sky), "area": int(sky.sum())},
    }


def inpaint(request: dict, body: bytes) -> dict:
    image = wire.png_to_image(wire.b64decode(request["image"]))
    mask = wire.rle_to_mask(request["mask"])
    if mask.shape != image.shape[:2]:
        raise FallbackError(
            "$.mask.size",
            f"mask {mask.shape} does not match image {image.shape[:2]}",
        )
    rng = _rng(body)
    h, w = mask.shape
    c0 = rng.integers(40, 216, 3).astype(np.float64)
    c1 = rng.integers(40, 216, 3).astype(np.float64)
    t = np.linspace(0.0, 1.0, h)[:, None, None]
    fill = np.rint((1 - t) * c0 + t * c1).astype(np.uint8)
    fill = np.broadcast_to(fill, (h, w, 3))
    out = image.copy()
    out[mask] = fill[mask]
    return {"image": wire.b64encode(wire.image_to_png(out))}


def pair(request: dict, body: bytes, size: int) -> dict:
    rng = _rng(body)
    h = w = size
    c0 = rng.integers(40, 216, 3).astype(np.float64)
    c1 = rng.integers(40, 216, 3).astype(np.float64)
    t = np.linspace(0.0, 1.0, h)[:, None, None]
    image = (1 - t) * c0 + t * c1
    # a few soft blobs so the image is not a pure gradient
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(4):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(0.08, 0.2) * size
        col = rng.integers(40, 216, 3).astype(np.float64)
        weight = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))
        image = (1 - weight[..., None]) * image + weight[..., None] * col
    out = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    return {"image": wire.b64encode(wire.image_to_png(out))}


def describe(request: dict, body: bytes) -> dict:
    rng = _rng(body)
    memory = request["memory"]
    style = memory[0]["style"] if memory else "plein air painting"
    picks = rng.choice(len(_NOUNS), size=3, replace=False)
    objects = [_NOUNS[int(i)] for i in picks[:2]]
    background = _NOUNS[int(picks[2])]
    return {"style": style, "objects": objects, "background": background}


def detect(request: dict, body: bytes) -> dict:
    return {"detected": [False] * len(request["effects"])}
