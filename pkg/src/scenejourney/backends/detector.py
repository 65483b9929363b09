"""Heuristic detection of unwanted image effects: uniform borders/frames
and out-of-focus (low high-frequency) border bands."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class DetectorThresholds:
    max_frame_width: int = 12
    variance_max: float = 0.001
    contrast_min: float = 0.15
    focus_energy_ratio: float = 0.25


_BORDER_EFFECTS = ("border", "frame", "stripe")


def _side_bands(image: np.ndarray, w: int) -> list[np.ndarray]:
    return [
        image[:w, :].reshape(-1, 3),
        image[-w:, :].reshape(-1, 3),
        image[:, :w].reshape(-1, 3),
        image[:, -w:].reshape(-1, 3),
    ]


def _interior_rings(image: np.ndarray, w: int) -> list[np.ndarray]:
    return [
        image[w:2 * w, :].reshape(-1, 3),
        image[-2 * w:-w, :].reshape(-1, 3),
        image[:, w:2 * w].reshape(-1, 3),
        image[:, -2 * w:-w].reshape(-1, 3),
    ]


def _has_uniform_frame(image: np.ndarray, th: DetectorThresholds) -> bool:
    h, w_img = image.shape[:2]
    for w in range(1, th.max_frame_width + 1):
        if 4 * w >= min(h, w_img):
            break
        bands = _side_bands(image, w)
        rings = _interior_rings(image, w)
        ok = True
        contrasts = []
        for band, ring in zip(bands, rings):
            if band.var(axis=0).mean() >= th.variance_max:
                ok = False
                break
            contrasts.append(
                float(np.abs(band.mean(axis=0) - ring.mean(axis=0)).mean())
            )
        if ok and min(contrasts) > th.contrast_min:
            return True
    return False


def _is_out_of_focus_border(image: np.ndarray, th: DetectorThresholds) -> bool:
    gray = image.mean(axis=-1)
    lap = ndimage.laplace(gray)
    band = max(8, min(gray.shape) // 8)
    edge = np.zeros(gray.shape, dtype=bool)
    edge[:band] = edge[-band:] = True
    edge[:, :band] = edge[:, -band:] = True
    border_energy = float(np.mean(lap[edge] ** 2))
    interior_energy = float(np.mean(lap[~edge] ** 2))
    if interior_energy <= 0:
        return False
    return border_energy < th.focus_energy_ratio * interior_energy


def heuristic_border_detect(
    image: np.ndarray, effect: str, thresholds: DetectorThresholds | None = None
) -> bool:
    """True if the named unwanted effect is present in the image."""
    th = thresholds or DetectorThresholds()
    image = np.asarray(image, dtype=np.float64)
    name = effect.lower()
    if any(k in name for k in _BORDER_EFFECTS):
        return _has_uniform_frame(image, th)
    if "focus" in name or "blur" in name:
        return _is_out_of_focus_border(image, th)
    return False


def add_frame(image: np.ndarray, width: int, color: np.ndarray) -> np.ndarray:
    """Paint a uniform frame of the given width onto a copy of the image."""
    out = np.asarray(image, dtype=np.float64).copy()
    if width > 0:
        out[:width] = color
        out[-width:] = color
        out[:, :width] = color
        out[:, -width:] = color
    return out


def make_frame_corpus(
    n: int, seed: int, size: int = 128
) -> list[tuple[np.ndarray, bool]]:
    """Generated evaluation corpus: half framed, half unframed images."""
    rng = np.random.default_rng(seed)
    corpus = []
    for i in range(n):
        framed = i % 2 == 0
        kind = rng.integers(0, 3)
        if kind == 0:
            img = rng.uniform(0.2, 0.8, size=(size, size, 3))
        elif kind == 1:
            g = np.linspace(0.25, 0.75, size)
            img = np.stack([np.tile(g, (size, 1))] * 3, axis=-1)
            img = img + rng.normal(0, 0.05, img.shape)
        else:
            y, x = np.mgrid[0:size, 0:size] / size
            img = np.stack(
                [
                    0.5 + 0.3 * np.sin(7 * x + rng.uniform(0, 6)),
                    0.5 + 0.3 * np.sin(5 * y + rng.uniform(0, 6)),
                    0.5 + 0.3 * np.sin(4 * (x + y) + rng.uniform(0, 6)),
                ],
                axis=-1,
            ) + rng.normal(0, 0.04, (size, size, 3))
        img = np.clip(img, 0, 1)
        if framed:
            width = int(rng.integers(1, 9))
            shade = rng.uniform(0.0, 0.05) if rng.random() < 0.5 else rng.uniform(0.95, 1.0)
            img = add_frame(img, width, np.full(3, shade))
        corpus.append((img, framed))
    return corpus
