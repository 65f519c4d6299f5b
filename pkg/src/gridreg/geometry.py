"""Rigid transforms, Euler rotation grids, and point-cloud validation.

Conventions used throughout the package:

* A point is a length-3 float array (x, y, z) in meters; a point cloud is an
  (N, 3) float64 array with N >= 1. ``as_point_cloud`` is the boundary
  validator that every public entry point runs its inputs through.
* Euler angles are extrinsic X-then-Y-then-Z: ``R = Rz(xi) @ Ry(phi) @ Rx(theta)``,
  angles in radians internally. Command-line surfaces speak degrees.
* ``RigidTransform`` maps points by ``R @ p + t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "EulerAngles",
    "RigidTransform",
    "RotationGrid",
    "as_point_cloud",
    "as_point3",
    "min_chebyshev_separation",
    "rotation_from_euler",
    "euler_from_rotation",
    "wrap_angle",
    "build_rotation_grid",
    "apply_transform",
    "compose",
    "rotation_geodesic_angle",
    "random_rotation",
]

_ORTHO_TOL = 1e-9


def as_point3(p) -> np.ndarray:
    """Validate and convert a single point to a (3,) float64 array."""
    a = np.asarray(p, dtype=np.float64).reshape(-1)
    if a.shape != (3,):
        raise InvalidInputError(f"expected a 3-vector, got shape {np.shape(p)}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("point has non-finite components")
    return a


def as_point_cloud(points) -> np.ndarray:
    """Validate and convert to an (N, 3) float64 C-contiguous array, N >= 1."""
    a = np.ascontiguousarray(points, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 3:
        raise InvalidInputError(f"expected an (N, 3) array, got shape {a.shape}")
    if a.shape[0] < 1:
        raise InvalidInputError("point cloud is empty")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("point cloud has non-finite values")
    return a


def min_chebyshev_separation(cloud) -> float:
    """Smallest pairwise Chebyshev (max-axis) distance within a cloud.

    Useful for checking the distinctness precondition of the mode-search
    optimality guarantee: all pairwise separations should exceed the
    translation bin size.
    """
    a = as_point_cloud(cloud)
    n = a.shape[0]
    if n < 2:
        return math.inf
    d = np.abs(a[:, None, :] - a[None, :, :]).max(axis=2)
    d[np.diag_indices(n)] = math.inf
    return float(d.min())


def wrap_angle(a):
    """Wrap angle(s) to [-pi, pi)."""
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class EulerAngles:
    """Extrinsic XYZ Euler angles in radians (rotation about fixed X, then Y, then Z)."""

    theta: float  # about X
    phi: float    # about Y
    xi: float     # about Z

    def __post_init__(self):
        for name in ("theta", "phi", "xi"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidInputError(f"angle {name} is not finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.theta, self.phi, self.xi], dtype=np.float64)

    def degrees(self) -> np.ndarray:
        return np.degrees(self.as_array())


def _coerce_angles(angles) -> np.ndarray:
    if isinstance(angles, EulerAngles):
        return angles.as_array()
    a = np.asarray(angles, dtype=np.float64).reshape(-1)
    if a.shape != (3,):
        raise InvalidInputError("expected EulerAngles or a length-3 sequence")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("angles are not finite")
    return a


def rotation_from_euler(angles) -> np.ndarray:
    """Rotation matrix R = Rz(xi) @ Ry(phi) @ Rx(theta), extrinsic XYZ order.

    `angles` is an EulerAngles instance or a length-3 sequence (theta, phi, xi)
    in radians.
    """
    th, ph, xi = _coerce_angles(angles)
    ct, st = math.cos(th), math.sin(th)
    cp, sp = math.cos(ph), math.sin(ph)
    cx, sx = math.cos(xi), math.sin(xi)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, ct, -st], [0.0, st, ct]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rz = np.array([[cx, -sx, 0.0], [sx, cx, 0.0], [0.0, 0.0, 1.0]])
    return rz @ ry @ rx


def euler_from_rotation(rotation) -> EulerAngles:
    """Decompose a rotation matrix into extrinsic XYZ Euler angles.

    Inverse of ``rotation_from_euler`` for phi strictly inside (-pi/2, pi/2);
    at the gimbal singularity |phi| = pi/2 the split between theta and xi is
    not unique and theta is pinned to 0.
    """
    r = np.asarray(rotation, dtype=np.float64)
    if r.shape != (3, 3):
        raise InvalidInputError("rotation must be a 3x3 matrix")
    sp = -r[2, 0]
    sp = min(1.0, max(-1.0, float(sp)))
    phi = math.asin(sp)
    if abs(sp) < 1.0 - 1e-12:
        theta = math.atan2(r[2, 1], r[2, 2])
        xi = math.atan2(r[1, 0], r[0, 0])
    else:
        theta = 0.0
        xi = math.atan2(-r[0, 1], r[1, 1])
    return EulerAngles(theta, phi, xi)


def _check_rotation(r: np.ndarray):
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        raise InvalidInputError("rotation must be a finite 3x3 matrix")
    err = np.abs(r.T @ r - np.eye(3)).max()
    if err > _ORTHO_TOL:
        raise InvalidInputError(f"matrix is not orthonormal (max |R^T R - I| = {err:.3e})")
    det = float(np.linalg.det(r))
    if abs(det - 1.0) > _ORTHO_TOL:
        raise InvalidInputError(f"matrix is not a proper rotation (det = {det:.12f})")


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Proper rigid motion p -> rotation @ p + translation.

    ``grid_coords`` optionally records the integer grid indices
    (rotation triple i, j, k) a search engine assigned to this pose.
    Instances are immutable; the stored arrays are read-only views.
    """

    rotation: np.ndarray
    translation: np.ndarray
    grid_coords: tuple | None = None

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64)
        t = as_point3(self.translation).copy()
        _check_rotation(r)
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if self.grid_coords is not None:
            object.__setattr__(self, "grid_coords", tuple(int(c) for c in self.grid_coords))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_euler(cls, angles, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return cls(rotation_from_euler(angles), translation)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T.copy()
        return RigidTransform(rt, -(rt @ self.translation))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying `other` first, then `self`."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, points) -> np.ndarray:
        pts = as_point_cloud(points)
        return pts @ self.rotation.T + self.translation

    def euler(self) -> EulerAngles:
        return euler_from_rotation(self.rotation)

    def __eq__(self, other):
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return (
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Composition a∘b: apply b first, then a."""
    return a.compose(b)


def apply_transform(transform: RigidTransform, points) -> np.ndarray:
    """Apply a rigid transform to a point cloud, preserving point order."""
    return transform.apply(points)


@dataclass(frozen=True)
class RotationGrid:
    """All rotations with Euler angles in {-K*step, ..., 0, ..., K*step}^3.

    ``indices`` is ((2K+1)^3, 3) int64 in lexicographic order over
    (theta index, phi index, xi index); ``matrices`` is the matching
    ((2K+1)^3, 3, 3) stack. The identity sits at indices == (0, 0, 0).
    """

    half_width: int
    step: float
    indices: np.ndarray
    matrices: np.ndarray

    def __len__(self):
        return self.indices.shape[0]


def build_rotation_grid(half_width: int, step: float) -> RotationGrid:
    """Materialize the Euler-angle rotation grid with the given half-width and step.

    Rejects grids whose angular extent half_width*step exceeds pi, since the
    Euler parameterization would wrap onto itself.
    """
    k = int(half_width)
    if k != half_width or k < 0:
        raise InvalidInputError("half_width must be a non-negative integer")
    if not (step > 0.0) or not math.isfinite(step):
        raise InvalidInputError("step must be positive and finite")
    if k * step > math.pi + 1e-12:
        raise InvalidInputError(
            f"rotation grid wraps: half_width*step = {k * step:.6f} rad exceeds pi"
        )
    side = np.arange(-k, k + 1, dtype=np.int64)
    idx = np.ascontiguousarray(
        np.stack(np.meshgrid(side, side, side, indexing="ij"), axis=-1).reshape(-1, 3)
    )
    ang = idx.astype(np.float64) * float(step)
    c1, s1 = np.cos(ang[:, 0]), np.sin(ang[:, 0])
    c2, s2 = np.cos(ang[:, 1]), np.sin(ang[:, 1])
    c3, s3 = np.cos(ang[:, 2]), np.sin(ang[:, 2])
    n = idx.shape[0]
    mats = np.empty((n, 3, 3))
    # closed form of Rz(xi) @ Ry(phi) @ Rx(theta)
    mats[:, 0, 0] = c3 * c2
    mats[:, 0, 1] = -s3 * c1 + c3 * s2 * s1
    mats[:, 0, 2] = s3 * s1 + c3 * s2 * c1
    mats[:, 1, 0] = s3 * c2
    mats[:, 1, 1] = c3 * c1 + s3 * s2 * s1
    mats[:, 1, 2] = -c3 * s1 + s3 * s2 * c1
    mats[:, 2, 0] = -s2
    mats[:, 2, 1] = c2 * s1
    mats[:, 2, 2] = c2 * c1
    idx.flags.writeable = False
    mats.flags.writeable = False
    return RotationGrid(half_width=k, step=float(step), indices=idx, matrices=mats)


def rotation_geodesic_angle(rot_a, rot_b) -> float:
    """Geodesic angle between two rotations, in degrees, in [0, 180].

    arccos((trace(Ra^T Rb) - 1) / 2) with the cosine clamped to [-1, 1].
    """
    ra = np.asarray(rot_a, dtype=np.float64)
    rb = np.asarray(rot_b, dtype=np.float64)
    if ra.shape != (3, 3) or rb.shape != (3, 3):
        raise InvalidInputError("rotation matrices must be 3x3")
    c = (float(np.trace(ra.T @ rb)) - 1.0) / 2.0
    c = min(1.0, max(-1.0, c))
    return math.degrees(math.acos(c))


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation matrix (normalized-quaternion construction)."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
