"""JSON-over-HTTP clients for remote model servers.

Wire protocol (all JSON; images base64 PNG, masks COCO RLE):
  POST /depth    {image}                      -> {disparity: b64 PFM, width, height}
  POST /segment  {image}                      -> {segments: [{rle, area}], sky: {rle}}
  POST /inpaint  {image, mask, prompt, seed}  -> {image}
  POST /pair     {text, seed}                 -> {image}
  POST /describe {task, memory}               -> {style, objects, background}
  POST /detect   {image, effects}             -> {detected: [bool]}
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import numpy as np
import requests

from .. import io as sio
from ..geometry import DisparityMap
from ..depth_refine import SegmentSet, SkyMask
from .interfaces import BackendError, BackendSuite, BackendUnavailable, RenderContext

MAX_PAYLOAD_BYTES = 16 * 1024 * 1024
DEFAULT_ATTEMPTS = 3
DEFAULT_BACKOFF_BASE = 0.5
DEFAULT_DEADLINE = 120.0


class ProtocolError(BackendError):
    pass


@dataclass
class HttpEndpoints:
    base_url: str = ""
    depth_url: str = ""
    segment_url: str = ""
    inpaint_url: str = ""
    pair_url: str = ""
    describe_url: str = ""
    detect_url: str = ""
    api_key: str = ""

    @staticmethod
    def from_env(base_url: str = "") -> "HttpEndpoints":
        base = base_url or os.environ.get("WJ_BASE_URL", "")
        return HttpEndpoints(
            base_url=base,
            depth_url=os.environ.get("WJ_DEPTH_URL", ""),
            inpaint_url=os.environ.get("WJ_INPAINT_URL", ""),
            describe_url=os.environ.get("WJ_LLM_URL", ""),
            detect_url=os.environ.get("WJ_VLM_URL", ""),
            api_key=os.environ.get("WJ_API_KEY", ""),
        )

    def url(self, route: str) -> str:
        specific = getattr(self, route.strip("/").replace("-", "_") + "_url", "")
        if specific:
            return specific
        if self.base_url:
            return self.base_url.rstrip("/") + route
        raise BackendError(f"no endpoint configured for {route}")


@dataclass
class CallStats:
    attempts: int = 0
    latency: float = 0.0


def http_call(
    endpoint: str,
    request: dict,
    api_key: str = "",
    attempts: int = DEFAULT_ATTEMPTS,
    backoff_base: float = DEFAULT_BACKOFF_BASE,
    deadline: float = DEFAULT_DEADLINE,
    stats: CallStats | None = None,
    session: requests.Session | None = None,
) -> dict:
    """POST JSON with retries (exponential backoff) and a per-call deadline."""
    payload = json.dumps(request).encode("utf-8")
    if len(payload) > MAX_PAYLOAD_BYTES:
        raise BackendError(
            f"payload {len(payload)} bytes exceeds the {MAX_PAYLOAD_BYTES} limit"
        )
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    post = (session or requests).post
    start = time.monotonic()
    last_err: Exception | None = None
    for attempt in range(attempts):
        if stats is not None:
            stats.attempts = attempt + 1
        remaining = deadline - (time.monotonic() - start)
        if remaining <= 0:
            break
        try:
            resp = post(endpoint, data=payload, headers=headers, timeout=remaining)
            if resp.status_code >= 500:
                last_err = BackendError(f"server error {resp.status_code}")
            elif resp.status_code >= 400:
                raise ProtocolError(
                    f"request rejected ({resp.status_code}): {resp.text[:200]}"
                )
            else:
                try:
                    out = resp.json()
                except ValueError as e:
                    raise ProtocolError(
                        f"malformed response body: {resp.text[:200]}"
                    ) from e
                if stats is not None:
                    stats.latency = time.monotonic() - start
                return out
        except ProtocolError:
            raise
        except requests.RequestException as e:
            last_err = e
        if attempt + 1 < attempts:
            time.sleep(min(backoff_base * (2**attempt), max(remaining, 0)))
    raise BackendUnavailable(f"backend at {endpoint} unavailable: {last_err}")


class _HttpBase:
    def __init__(self, endpoints: HttpEndpoints, deadline: float = DEFAULT_DEADLINE):
        self.endpoints = endpoints
        self.deadline = deadline
        self.session = requests.Session()
        self.log: list[dict] = []

    def call(self, route: str, request: dict) -> dict:
        stats = CallStats()
        try:
            out = http_call(
                self.endpoints.url(route),
                request,
                api_key=self.endpoints.api_key,
                deadline=self.deadline,
                stats=stats,
                session=self.session,
            )
            return out
        finally:
            self.log.append(
                {"route": route, "attempts": stats.attempts, "latency": stats.latency}
            )


class HttpDepthEstimator(_HttpBase):
    def estimate(self, image: np.ndarray, ctx: RenderContext) -> DisparityMap:
        out = self.call("/depth", {"image": sio.b64encode(sio.image_to_png(image))})
        try:
            values = sio.read_pfm(sio.b64decode(out["disparity"]))
        except (KeyError, sio.FormatError) as e:
            raise ProtocolError(f"bad /depth response: {e}") from e
        if values.shape != (int(out["height"]), int(out["width"])):
            raise ProtocolError("/depth dimensions disagree with payload")
        return DisparityMap(np.maximum(values.astype(np.float64), 0.0))


class HttpSegmenter(_HttpBase):
    def segment(self, image: np.ndarray, ctx: RenderContext):
        out = self.call("/segment", {"image": sio.b64encode(sio.image_to_png(image))})
        try:
            segs = SegmentSet.from_json(out["segments"])
            sky = SkyMask.from_json(out["sky"])
        except (KeyError, sio.FormatError) as e:
            raise ProtocolError(f"bad /segment response: {e}") from e
        return segs, sky


class HttpInpainter(_HttpBase):
    def inpaint(self, image, mask, prompt, seed, ctx: RenderContext):
        out = self.call(
            "/inpaint",
            {
                "image": sio.b64encode(sio.image_to_png(image)),
                "mask": sio.mask_to_rle(mask),
                "prompt": prompt,
                "seed": int(seed),
            },
        )
        try:
            return sio.png_to_image(sio.b64decode(out["image"]))
        except (KeyError, sio.FormatError) as e:
            raise ProtocolError(f"bad /inpaint response: {e}") from e


class HttpDescriber(_HttpBase):
    def describe(self, task: str, memory: list[dict]) -> dict:
        out = self.call("/describe", {"task": task, "memory": memory})
        for key in ("style", "objects", "background"):
            if key not in out:
                raise ProtocolError(f"/describe response missing {key!r}")
        return out


class HttpPairing(_HttpBase):
    def pair(self, text: str, seed: int) -> np.ndarray:
        out = self.call("/pair", {"text": text, "seed": int(seed)})
        try:
            return sio.png_to_image(sio.b64decode(out["image"]))
        except (KeyError, sio.FormatError) as e:
            raise ProtocolError(f"bad /pair response: {e}") from e


class HttpEffectDetector(_HttpBase):
    def detect(self, image: np.ndarray, effects: list[str]) -> list[bool]:
        out = self.call(
            "/detect",
            {"image": sio.b64encode(sio.image_to_png(image)), "effects": effects},
        )
        detected = out.get("detected")
        if not isinstance(detected, list) or len(detected) != len(effects):
            raise ProtocolError("/detect response arity mismatch")
        return [bool(x) for x in detected]


def make_http_suite(
    endpoints: HttpEndpoints, deadline: float = DEFAULT_DEADLINE
) -> BackendSuite:
    return BackendSuite(
        depth_estimator=HttpDepthEstimator(endpoints, deadline),
        segmenter=HttpSegmenter(endpoints, deadline),
        inpainter=HttpInpainter(endpoints, deadline),
        describer=HttpDescriber(endpoints, deadline),
        pairing=HttpPairing(endpoints, deadline),
        effect_detector=HttpEffectDetector(endpoints, deadline),
        mode="http",
    )
