import json
from pathlib import Path

import numpy as np
import pytest

from model_server import wire
from model_server.config import ALL_ENDPOINTS, default_schema_dir


def sample_image(h=64, w=64, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, (h, w, 3), dtype=np.uint8)


def sample_image_b64(h=64, w=64, seed=0):
    return wire.b64encode(wire.image_to_png(sample_image(h, w, seed)))


def valid_requests(h=64, w=64):
    """One schema-valid request per endpoint."""
    mask = np.zeros((h, w), dtype=bool)
    mask[: h // 2] = True
    return {
        "depth": {"image": sample_image_b64(h, w)},
        "segment": {"image": sample_image_b64(h, w)},
        "inpaint": {
            "image": sample_image_b64(h, w),
            "mask": wire.mask_to_rle(mask),
            "prompt": "a quiet meadow",
            "seed": 7,
        },
        "pair": {"text": "a quiet meadow", "seed": 7},
        "describe": {
            "task": "next scene",
            "memory": [
                {"style": "gouache", "objects": ["meadow"], "background": "hill"}
            ],
        },
        "detect": {
            "image": sample_image_b64(h, w),
            "effects": ["photo border", "painting frame", "out-of-focus objects"],
        },
    }


@pytest.fixture(scope="session")
def schemas():
    root = default_schema_dir()
    out = {}
    for name in ALL_ENDPOINTS:
        for kind in ("request", "response"):
            out[(name, kind)] = json.loads(
                (root / f"{name}_{kind}.json").read_text()
            )
    return out


@pytest.fixture(scope="session")
def client():
    from fastapi.testclient import TestClient

    from model_server import ServerConfig, create_app

    return TestClient(create_app(ServerConfig(), pair_size=64))
