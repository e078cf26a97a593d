"""poseveil: face de-identification and kinematics export for clinical video.

The pipeline consumes per-frame 2D keypoint files and decoded frame
images, tracks and uniquely identifies every person, picks the patient,
repairs unreliable keypoints, blurs faces, supports reviewer overrides,
exports kinematics, and scores face detection against ground truth.
"""

__version__ = "0.1.0"
