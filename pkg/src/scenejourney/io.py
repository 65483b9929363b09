"""Binary and wire serialization: PFM, PLY, PNG, and COCO-style mask RLE."""

from __future__ import annotations

import base64
import io as _io

import numpy as np
from PIL import Image

from .geometry import PointCloud


class FormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# PFM (little-endian, scale -1.0)

def write_pfm(values: np.ndarray) -> bytes:
    """Serialize a 2D float grid as a grayscale PFM (rows bottom-to-top)."""
    a = np.asarray(values, dtype=np.float32)
    if a.ndim != 2:
        raise FormatError("PFM payload must be 2D")
    h, w = a.shape
    header = f"Pf\n{w} {h}\n-1.0\n".encode("ascii")
    return header + a[::-1].tobytes()


def read_pfm(data: bytes) -> np.ndarray:
    buf = _io.BytesIO(data)
    magic = buf.readline().strip()
    if magic != b"Pf":
        raise FormatError(f"not a grayscale PFM (magic {magic!r})")
    w, h = (int(x) for x in buf.readline().split())
    scale = float(buf.readline())
    if scale >= 0:
        raise FormatError("big-endian PFM is not supported")
    raw = buf.read(w * h * 4)
    if len(raw) != w * h * 4:
        raise FormatError("truncated PFM payload")
    a = np.frombuffer(raw, dtype="<f4").reshape(h, w)
    return a[::-1].copy()


# ---------------------------------------------------------------------------
# PLY (binary little-endian; x,y,z float32, rgb uint8, scene_id int32)

_PLY_HEADER = """ply
format binary_little_endian 1.0
comment scenejourney point cloud
element vertex {n}
property float x
property float y
property float z
property uchar red
property uchar green
property uchar blue
property int scene_id
end_header
"""


def write_ply(cloud: PointCloud) -> bytes:
    n = len(cloud)
    header = _PLY_HEADER.format(n=n).encode("ascii")
    rec = np.zeros(
        n,
        dtype=[
            ("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
            ("r", "u1"), ("g", "u1"), ("b", "u1"),
            ("sid", "<i4"),
        ],
    )
    pts = cloud.points.astype(np.float32)
    rec["x"], rec["y"], rec["z"] = pts[:, 0], pts[:, 1], pts[:, 2]
    rgb = np.clip(np.rint(cloud.colors * 255.0), 0, 255).astype(np.uint8)
    rec["r"], rec["g"], rec["b"] = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    rec["sid"] = cloud.scene_id
    return header + rec.tobytes()


def read_ply(data: bytes) -> PointCloud:
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise FormatError("not a PLY file")
    header = data[:end].decode("ascii", errors="replace")
    n = None
    for line in header.splitlines():
        if line.startswith("element vertex"):
            n = int(line.split()[-1])
    if n is None:
        raise FormatError("PLY header missing vertex element")
    if "format binary_little_endian" not in header:
        raise FormatError("only binary little-endian PLY is supported")
    body = data[end + len(b"end_header\n"):]
    rec = np.frombuffer(
        body,
        dtype=[
            ("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
            ("r", "u1"), ("g", "u1"), ("b", "u1"),
            ("sid", "<i4"),
        ],
        count=n,
    )
    pts = np.stack([rec["x"], rec["y"], rec["z"]], axis=-1).astype(np.float64)
    cols = np.stack([rec["r"], rec["g"], rec["b"]], axis=-1).astype(np.float64) / 255.0
    return PointCloud(points=pts, colors=cols, scene_id=rec["sid"].astype(np.int32))


# ---------------------------------------------------------------------------
# PNG and base64 wire helpers

def image_to_png(image: np.ndarray) -> bytes:
    """Encode an H x W x 3 float image in [0,1] (or uint8) as PNG bytes."""
    a = np.asarray(image)
    if a.dtype != np.uint8:
        a = np.clip(np.rint(a * 255.0), 0, 255).astype(np.uint8)
    buf = _io.BytesIO()
    Image.fromarray(a).save(buf, format="PNG")
    return buf.getvalue()


def png_to_image(data: bytes) -> np.ndarray:
    """Decode PNG bytes to an H x W x 3 float image in [0,1]."""
    img = Image.open(_io.BytesIO(data)).convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def mask_to_png(mask: np.ndarray) -> bytes:
    buf = _io.BytesIO()
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(
        buf, format="PNG"
    )
    return buf.getvalue()


def png_to_mask(data: bytes) -> np.ndarray:
    img = Image.open(_io.BytesIO(data)).convert("L")
    return np.asarray(img) > 127


def b64encode(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def b64decode(s: str) -> bytes:
    return base64.b64decode(s.encode("ascii"))


# ---------------------------------------------------------------------------
# COCO-style run-length encoding for binary masks (column-major runs,
# first run counts zeros; compressed string per the COCO charmap scheme)

def mask_to_rle_counts(mask: np.ndarray) -> list[int]:
    flat = np.asarray(mask, dtype=bool).flatten(order="F")
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
    return counts


def rle_counts_to_mask(counts: list[int], shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    total = h * w
    flat = np.zeros(total, dtype=bool)
    pos = 0
    val = False
    for c in counts:
        if val:
            flat[pos:pos + c] = True
        pos += c
        val = not val
    if pos != total:
        raise FormatError("RLE counts do not cover the mask")
    return flat.reshape((h, w), order="F")


def rle_counts_to_string(counts: list[int]) -> str:
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


def rle_string_to_counts(s: str) -> list[int]:
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
    return {
        "size": [int(mask.shape[0]), int(mask.shape[1])],
        "counts": rle_counts_to_string(mask_to_rle_counts(mask)),
    }


def rle_to_mask(rle: dict) -> np.ndarray:
    shape = (int(rle["size"][0]), int(rle["size"][1]))
    return rle_counts_to_mask(rle_string_to_counts(rle["counts"]), shape)
