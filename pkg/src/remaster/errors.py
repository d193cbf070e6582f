"""Exception hierarchy shared across the pipeline.

Exit-code mapping lives in the CLI: InputError -> 1, MissingToolError -> 2,
InvariantViolation -> 3.
"""


class RemasterError(Exception):
    """Base class for all pipeline errors."""


class InputError(RemasterError):
    """Bad user input: missing files, undecodable frames, invalid specs."""


class UnsupportedAspectError(InputError):
    """Requested aspect is narrower than the source (vertical expansion)."""


class MissingToolError(RemasterError):
    """A required external binary (the transcoder) is not installed."""


class InvariantViolation(RemasterError):
    """Internal bookkeeping broke; the affected scene must be aborted."""


class DimensionMismatchError(RemasterError):
    """Rasters that must share dimensions do not."""


class SingularTransformError(RemasterError):
    """Affine transform with |det| below the invertibility floor."""


class SamplingBoundsError(RemasterError):
    """Bilinear sample requested outside the raster."""


class StitchingFailure(RemasterError):
    """Pairwise transform estimation failed; callers fall back."""


class OutpaintError(RemasterError):
    """Outpainting cannot proceed (e.g. no known seed pixels)."""


class IncompleteCanvasError(InvariantViolation):
    """Resampling found UNKNOWN cells inside a frame's expanded rect."""


class RemoteBackendError(RemasterError):
    """Remote sidecar request failed (network, protocol, or contract)."""


class RemoteMaskerError(RemoteBackendError):
    pass


class RemoteOutpainterError(RemoteBackendError):
    pass


class SceneSpecError(InputError):
    """Synthetic scene spec is invalid or self-contradictory."""
