"""Run the sidecar: python -m sidecar [--port N] [...]"""

import argparse

import uvicorn

from .app import create_app
from .config import SidecarConfig


def main() -> None:
    parser = argparse.ArgumentParser(prog="remaster-sidecar", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--mask-model", default="builtin-saliency")
    parser.add_argument("--outpaint-model", default="builtin-propagation")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-dim", type=int, default=1024)
    args = parser.parse_args()

    cfg = SidecarConfig(
        host=args.host,
        port=args.port,
        mask_model=args.mask_model,
        outpaint_model=args.outpaint_model,
        device=args.device,
        max_dim=args.max_dim,
    )
    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port, log_level="warning")


if __name__ == "__main__":
    main()
