"""Shared geometric types, hyperparameters, and camera primitives.

Conventions used throughout the package:

* Poses are body-to-odometry; projecting a world point applies the inverse.
* The camera is an ideal pinhole (zero distortion). Camera frame = body frame;
  any camera/IMU extrinsic must be folded into the poses upstream.
* Euler angles are Z-Y-X (yaw about gravity-aligned +z, then pitch, then roll),
  degrees at API boundaries, radians internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class BehindCameraError(Exception):
    """Point has non-positive depth in the camera frame."""


class DegenerateGeometryError(Exception):
    """Input geometry is rank-deficient (parallel rays, collinear points, ...)."""


class DivergedError(Exception):
    """Nonlinear refinement failed to converge; caller should discard the track."""


class SizeLimitError(Exception):
    """Candidate-association count exceeds the configured cap."""


class TooLargeError(Exception):
    """Problem size exceeds what the exhaustive oracle can enumerate."""


class InputError(Exception):
    """Malformed input file or config; the message names the offending field."""


def _as_readonly(a, shape, name):
    arr = np.array(a, dtype=float)
    if arr.shape != shape:
        raise ValueError("%s must have shape %s, got %s" % (name, shape, arr.shape))
    if not np.all(np.isfinite(arr)):
        raise ValueError("%s contains non-finite values" % name)
    arr.flags.writeable = False
    return arr


def _check_rotation(R, tol=1e-9):
    err = np.linalg.norm(R.T @ R - np.eye(3))
    if err >= tol:
        raise ValueError("rotation is not orthonormal (||R'R - I|| = %g)" % err)
    if abs(np.linalg.det(R) - 1.0) >= tol:
        raise ValueError("rotation determinant is not +1")


@dataclass(frozen=True)
class Pose:
    """Body-to-odometry rigid pose at one frame."""

    rotation: np.ndarray
    translation: np.ndarray
    frame_index: int

    def __post_init__(self):
        object.__setattr__(self, "rotation", _as_readonly(self.rotation, (3, 3), "rotation"))
        object.__setattr__(self, "translation", _as_readonly(self.translation, (3,), "translation"))
        _check_rotation(self.rotation)
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width):
            raise ValueError("cx must lie within [0, width)")
        if not (0 <= self.cy < self.height):
            raise ValueError("cy must lie within [0, height)")


@dataclass(frozen=True)
class Detection:
    """2D object centroid in one image frame."""

    frame_index: int
    centroid: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "centroid", _as_readonly(self.centroid, (2,), "centroid"))


@dataclass(frozen=True)
class Track:
    """One object's centroid detections across frames."""

    track_id: int
    detections: tuple

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))
        frames = [d.frame_index for d in self.detections]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("detections must be strictly increasing in frame_index")

    def __len__(self):
        return len(self.detections)


@dataclass(frozen=True)
class Landmark:
    """Estimated 3D object position with its 3x3 covariance."""

    landmark_id: int
    position: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _as_readonly(self.position, (3,), "position"))
        object.__setattr__(self, "covariance", _as_readonly(self.covariance, (3, 3), "covariance"))
        C = self.covariance
        if np.linalg.norm(C - C.T) >= 1e-12:
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(C).min() < -1e-12:
            raise ValueError("covariance must be positive semi-definite")


@dataclass(frozen=True)
class ObjectMap:
    """All landmarks estimated by one agent, in its odometry frame."""

    agent_id: str
    landmarks: tuple
    frame_label: str = "odom"

    def __post_init__(self):
        object.__setattr__(self, "landmarks", tuple(self.landmarks))
        ids = [lm.landmark_id for lm in self.landmarks]
        if len(ids) != len(set(ids)):
            raise ValueError("landmark ids must be unique within a map")

    def positions(self):
        if not self.landmarks:
            return np.zeros((0, 3))
        return np.array([lm.position for lm in self.landmarks])

    def __len__(self):
        return len(self.landmarks)


@dataclass(frozen=True)
class Hyperparameters:
    """All pipeline scalars. Defaults follow the nadir indoor configuration."""

    n_min: int = 3                  # min detections (strict >) for triangulation
    omega_percentile: float = 95.0  # Mahalanobis inlier percentile
    window: float = 2.0             # submap length/width, m
    overlap: float = 1.0            # grid step between submap centers, m
    n_max: int = 50                 # max objects per submap
    sigma: float = 0.05             # expected pairwise-consistency noise, m
    epsilon: float = 0.1            # consistency-score cutoff, m
    gamma: float = 0.1              # min distance between matched points, m
    s_max: int = 4                  # success gate: |S| > s_max
    theta_overlap: float = 0.667    # IoU overlap threshold
    theta_rp: float = 10.0          # roll/pitch gate, deg
    theta_yaw: float = 30.0         # yaw gate (evaluation), deg
    t_max: float = 1.5              # translation gate (evaluation), m

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) <= 0:
                raise ValueError("%s must be strictly positive" % name)
        if self.epsilon < self.sigma:
            raise ValueError("epsilon must be >= sigma")
        if self.overlap > self.window:
            raise ValueError("overlap must be <= window")
        if not (0 < self.theta_overlap <= 1):
            raise ValueError("theta_overlap must lie in (0, 1]")


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) transform; apply() maps source-frame coordinates to target-frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _as_readonly(self.rotation, (3, 3), "rotation"))
        object.__setattr__(self, "translation", _as_readonly(self.translation, (3,), "translation"))
        _check_rotation(self.rotation)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def compose(self, other):
        """Transform equal to applying `other` first, then self."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self):
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def apply(self, points):
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation


def project(pose, intrinsics, point):
    """Project an odometry-frame point into pixel coordinates.

    Raises BehindCameraError if the camera-frame depth is <= 1e-6.
    """
    p_cam = pose.rotation.T @ (np.asarray(point, dtype=float) - pose.translation)
    z = p_cam[2]
    if z <= 1e-6:
        raise BehindCameraError("point depth %g is behind the camera" % z)
    return np.array([intrinsics.fx * p_cam[0] / z + intrinsics.cx,
                     intrinsics.fy * p_cam[1] / z + intrinsics.cy])


def unproject(pose, intrinsics, pixel, depth):
    """Back-project a pixel at a given camera-frame depth into the odometry frame."""
    if depth <= 0:
        raise ValueError("depth must be positive")
    u, v = float(pixel[0]), float(pixel[1])
    p_cam = np.array([(u - intrinsics.cx) / intrinsics.fx * depth,
                      (v - intrinsics.cy) / intrinsics.fy * depth,
                      depth])
    return pose.rotation @ p_cam + pose.translation


def transform_angles(t):
    """Z-Y-X Euler decomposition of a transform's rotation, in degrees.

    Returns (roll, pitch, yaw). At gimbal lock (|pitch| = 90 deg) the roll is
    set to 0 by convention and the yaw absorbs the remaining rotation.
    """
    R = t.rotation if isinstance(t, RigidTransform) else np.asarray(t, dtype=float)
    sp = -R[2, 0]
    sp = min(1.0, max(-1.0, sp))
    pitch = math.asin(sp)
    if abs(sp) > 1.0 - 1e-12:
        roll = 0.0
        yaw = math.atan2(-R[0, 1], R[1, 1])
    else:
        roll = math.atan2(R[2, 1], R[2, 2])
        yaw = math.atan2(R[1, 0], R[0, 0])
    return math.degrees(roll), math.degrees(pitch), math.degrees(yaw)


def rotation_z(yaw_deg):
    """Rotation by `yaw_deg` degrees about +z."""
    c, s = math.cos(math.radians(yaw_deg)), math.sin(math.radians(yaw_deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_y(pitch_deg):
    c, s = math.cos(math.radians(pitch_deg)), math.sin(math.radians(pitch_deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_x(roll_deg):
    c, s = math.cos(math.radians(roll_deg)), math.sin(math.radians(roll_deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
