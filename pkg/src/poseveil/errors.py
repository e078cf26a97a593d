"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: input problems exit 2, pipeline step
failures exit 3, privacy-guard refusals exit 4.
"""


class PoseVeilError(Exception):
    """Base class for all poseveil errors."""


class InputError(PoseVeilError):
    """Missing, empty or otherwise unusable input (exit code 2)."""


class ParseError(InputError):
    """A keypoint file could not be decoded; names the file and offset."""


class SchemaError(InputError):
    """A keypoint file decoded but violates the expected layout."""


class GeometryError(InputError):
    """Frame images disagree on dimensions or indices."""


class ContractError(PoseVeilError):
    """A caller violated a documented precondition."""


class AlignmentError(InputError):
    """Two keypoint sets cannot be compared frame-by-frame."""


class NoPatientError(PoseVeilError):
    """No track passed the presence filter; caller should fall back to
    blurring every person."""


class FaceTrackError(PoseVeilError):
    """A facial keypoint has no reliable observation anywhere in a track,
    so its face cannot be followed for blurring."""


class RenderError(PoseVeilError):
    """A blur box references a frame that does not exist."""


class NotReadyError(PoseVeilError):
    """A requested artifact has not been produced yet."""


class ConflictError(InputError):
    """A project with the requested name already exists."""


class NotFoundError(InputError):
    """A requested project or file does not exist."""


class StepError(PoseVeilError):
    """A pipeline step failed; carries the step name (exit code 3)."""

    def __init__(self, step: str, message: str):
        super().__init__(f"step '{step}' failed: {message}")
        self.step = step


class PrivacyGuardError(PoseVeilError):
    """Export of rendered video refused before quality-check sign-off
    (exit code 4)."""


class OverrideValidationError(InputError):
    """An override references an unknown blur box or has a bad shape."""
