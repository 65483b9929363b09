"""Run the model server: `model-server --port 8040 --fallback`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import uvicorn

from .app import create_app
from .config import ALL_ENDPOINTS, ServerConfig


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="model-server", description=__doc__)
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8040)
    ap.add_argument(
        "--endpoints", default=",".join(ALL_ENDPOINTS),
        help="comma-separated endpoint subset to serve",
    )
    ap.add_argument(
        "--no-fallback", action="store_true",
        help="serve real models instead of procedural responses",
    )
    ap.add_argument("--schema-dir", default=None, help="wire-protocol schema directory")
    ap.add_argument(
        "--pair-size", type=int, default=512,
        help="image side length served by the fallback /pair endpoint",
    )
    args = ap.parse_args(argv)

    config = ServerConfig(
        port=args.port,
        endpoints=tuple(e for e in args.endpoints.split(",") if e),
        fallback=not args.no_fallback,
        schema_dir=Path(args.schema_dir) if args.schema_dir else None,
    )
    app = create_app(config, pair_size=args.pair_size)
    uvicorn.run(app, host=args.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
