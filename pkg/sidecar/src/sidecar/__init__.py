"""Optional ML sidecar for the remaster pipeline.

Serves /mask (foreground segmentation) and /outpaint (masked-region
generation) over HTTP with base64-PNG payloads, standing in for the heavy
learned models behind a stable wire contract.
"""

from .app import create_app
from .config import SidecarConfig

__all__ = ["create_app", "SidecarConfig"]

__version__ = "0.1.0"
