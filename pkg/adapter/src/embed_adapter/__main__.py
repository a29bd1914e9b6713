import argparse
import sys

import uvicorn

from .app import create_app
from .config import AdapterConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="embed-adapter", description="Embedding provider service")
    parser.add_argument("--mode", choices=("deterministic", "encoder"), default="deterministic")
    parser.add_argument("--dim", type=int, default=32, help="vector dim (deterministic mode)")
    parser.add_argument("--model", default="clip-ViT-B-32", help="encoder model name")
    parser.add_argument("--model-id", default="det-hash-v1")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=9090)
    args = parser.parse_args(argv)
    try:
        config = AdapterConfig(
            mode=args.mode,
            dim=args.dim,
            model_name=args.model,
            model_id=args.model_id,
            host=args.host,
            port=args.port,
        )
        app = create_app(config)
    except (ValueError, ImportError) as exc:
        print(f"embed-adapter: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
