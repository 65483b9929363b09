"""Wire-format codecs: base64 PNG images, grayscale PFM disparity, and
COCO-style compressed run-length masks (column-major, first run counts
zeros, charmap-compressed counts)."""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image


class WireError(ValueError):
    pass


def b64encode(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def b64decode(s: str) -> bytes:
    try:
        return base64.b64decode(s.encode("ascii"), validate=True)
    except (ValueError, UnicodeEncodeError) as e:
        raise WireError(f"invalid base64 payload: {e}") from e


def png_to_image(data: bytes) -> np.ndarray:
    """Decode PNG bytes to an H x W x 3 uint8 array."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except OSError as e:
        raise WireError(f"invalid PNG payload: {e}") from e
    return np.asarray(img.convert("RGB"), dtype=np.uint8)


def image_to_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def write_pfm(values: np.ndarray) -> bytes:
    """Grayscale little-endian PFM, rows bottom-to-top, scale -1.0."""
    a = np.asarray(values, dtype=np.float32)
    if a.ndim != 2:
        raise WireError("PFM payload must be 2D")
    h, w = a.shape
    return f"Pf\n{w} {h}\n-1.0\n".encode("ascii") + a[::-1].tobytes()


def read_pfm(data: bytes) -> np.ndarray:
    buf = io.BytesIO(data)
    if buf.readline().strip() != b"Pf":
        raise WireError("not a grayscale PFM")
    w, h = (int(x) for x in buf.readline().split())
    if float(buf.readline()) >= 0:
        raise WireError("big-endian PFM is not supported")
    raw = buf.read(w * h * 4)
    if len(raw) != w * h * 4:
        raise WireError("truncated PFM payload")
    return np.frombuffer(raw, dtype="<f4").reshape(h, w)[::-1].copy()


def _counts_to_string(counts: list[int]) -> str:
    out = []
    for i, x in enumerate(counts):
        if i > 2:
            x -= counts[i - 2]
        more = True
        while more:
            c = x & 0x1F
            x >>= 5
            more = (x != -1) if (c & 0x10) else (x != 0)
            if more:
                c |= 0x20
            out.append(chr(c + 48))
    return "".join(out)


def _string_to_counts(s: str) -> list[int]:
    counts: list[int] = []
    i = 0
    while i < len(s):
        x = 0
        k = 0
        more = True
        while more:
            c = ord(s[i]) - 48
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            if not more and (c & 0x10):
                x |= -1 << (5 * (k + 1))
            i += 1
            k += 1
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return counts


def mask_to_rle(mask: np.ndarray) -> dict:
    mask = np.asarray(mask, dtype=bool)
    flat = mask.flatten(order="F")
    counts = []
    prev = False
    run = 0
    for bit in flat:
        if bit == prev:
            run += 1
        else:
            counts.append(run)
            prev = bit
            run = 1
    counts.append(run)
    return {
        "size": [int(mask.shape[0]), int(mask.shape[1])],
        "counts": _counts_to_string(counts),
    }


def rle_to_mask(rle: dict) -> np.ndarray:
    h, w = (int(x) for x in rle["size"])
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    val = False
    for c in _string_to_counts(str(rle["counts"])):
        if c < 0 or pos + c > h * w:
            raise WireError("RLE counts do not fit the mask")
        if val:
            flat[pos:pos + c] = True
        pos += c
        val = not val
    if pos != h * w:
        raise WireError("RLE counts do not cover the mask")
    return flat.reshape((h, w), order="F")
