#!/usr/bin/env python3
"""Start the examination service from a JSON config file.

Usage:
    python scripts/serve.py --config service.json
    python scripts/serve.py --host 0.0.0.0 --port 8800 --store ./viva-store \
        --assessor-token secret-a --invigilator-token secret-i

Cohort tokens can also come from VIVA_ASSESSOR_TOKENS / VIVA_INVIGILATOR_TOKENS
(comma-separated), which override any tokens file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from vivavoce.api import ServiceConfig, load_service_config, serve


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", help="JSON service config file")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8800)
    parser.add_argument("--store", help="transcript store directory (omitted = memory only)")
    parser.add_argument("--static", help="directory of built web assets to mount at /app")
    parser.add_argument("--assessor-token", action="append", default=[])
    parser.add_argument("--invigilator-token", action="append", default=[])
    parser.add_argument("--deterministic", action="store_true")
    args = parser.parse_args()

    if args.config:
        config = load_service_config(args.config)
    else:
        tokens_path = None
        if args.assessor_token or args.invigilator_token:
            tokens = {"assessor": args.assessor_token, "invigilator": args.invigilator_token}
            fd, tokens_path = tempfile.mkstemp(suffix=".json", prefix="viva-tokens-")
            with os.fdopen(fd, "w") as fh:
                json.dump(tokens, fh)
        config = ServiceConfig(
            host=args.host,
            port=args.port,
            store_path=args.store,
            tokens_path=tokens_path,
            static_dir=args.static,
            deterministic=args.deterministic,
        )
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
