#!/usr/bin/env python
"""Generate a small synthetic journey end to end and export fly-through frames.

Usage:
    python scripts/run_demo_journey.py --out /tmp/demo --scenes 3 --size 256
"""

import argparse
import json
import sys
from pathlib import Path

from scenejourney.cli import main as cli_main


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_journey")
    ap.add_argument("--scenes", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--text", default="a quiet meadow with a stream")
    ap.add_argument("--fps", type=int, default=30)
    args = ap.parse_args(argv)

    out = Path(args.out)
    rc = cli_main(
        [
            "generate",
            "--text", args.text,
            "--scenes", str(args.scenes),
            "--seed", str(args.seed),
            "--size", str(args.size),
            "--out", str(out / "archive"),
        ]
    )
    if rc != 0:
        return rc
    rc = cli_main(
        [
            "render", str(out / "archive"),
            "--fps", str(args.fps),
            "--out", str(out / "frames"),
        ]
    )
    if rc != 0:
        return rc
    manifest = json.loads((out / "frames" / "manifest.json").read_text())
    print(f"done: {manifest['frame_count']} frames at {manifest['fps']} fps in {out}")
    print(f"encode with e.g.: ffmpeg -framerate {args.fps} "
          f"-i {out}/frames/frame_%05d.png {out}/journey.mp4")
    return 0


if __name__ == "__main__":
    sys.exit(main())
