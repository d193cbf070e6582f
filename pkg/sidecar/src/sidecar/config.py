from dataclasses import dataclass


@dataclass(frozen=True)
class SidecarConfig:
    """Service configuration; model identifiers select pluggable backends.

    The builtin backends are classical stand-ins that satisfy the wire
    contracts without pretrained weights; "disabled" turns an endpoint off
    (health flag false, requests get 503).
    """

    host: str = "127.0.0.1"
    port: int = 8765
    mask_model: str = "builtin-saliency"
    outpaint_model: str = "builtin-propagation"
    device: str = "cpu"
    max_dim: int = 1024
    # builtin inpainter's working resolution; larger inputs are filled at
    # this size and upsampled back (the wire contract fixes only dims)
    native_resolution: int = 512

    def __post_init__(self) -> None:
        if not 0 < self.port < 65536:
            raise ValueError("port must be in (0, 65536)")
        if self.max_dim < 64:
            raise ValueError("max_dim must be >= 64")
