"""Rigid transforms built on unit quaternions.

Convention: quaternions are (w, x, y, z), right-handed, active rotations.
All quaternion-producing operations renormalize, so the unit-norm invariant
holds to 1e-9 after every construction and composition.
"""

from __future__ import annotations

import numpy as np

_UNIT_TOL = 1e-9


def _as_vec(v, n, name):
    a = np.asarray(v, dtype=np.float64).reshape(-1)
    if a.shape != (n,):
        raise ValueError(f"{name} must have {n} components, got shape {np.shape(v)}")
    return a


def quat_normalize(q) -> np.ndarray:
    """Return q scaled to unit norm. Raises on (near-)zero quaternions."""
    q = _as_vec(q, 4, "quaternion")
    n = np.linalg.norm(q)
    if n < 1e-12:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def quat_multiply(q1, q2) -> np.ndarray:
    """Hamilton product q1 * q2 (apply q2's rotation first), renormalized."""
    w1, x1, y1, z1 = _as_vec(q1, 4, "q1")
    w2, x2, y2, z2 = _as_vec(q2, 4, "q2")
    out = np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )
    return quat_normalize(out)


def quat_conjugate(q) -> np.ndarray:
    q = _as_vec(q, 4, "quaternion")
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v) -> np.ndarray:
    """Rotate 3-vector v by unit quaternion q (active rotation)."""
    q = _as_vec(q, 4, "quaternion")
    v = _as_vec(v, 3, "vector")
    qv = q[1:]
    t = 2.0 * np.cross(qv, v)
    return v + q[0] * t + np.cross(qv, t)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    """Unit quaternion rotating by `angle` radians about `axis`."""
    axis = _as_vec(axis, 3, "axis")
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise ValueError("rotation axis must be nonzero")
    half = 0.5 * float(angle)
    return np.concatenate(([np.cos(half)], np.sin(half) / n * axis))


def quat_to_matrix(q) -> np.ndarray:
    """3x3 rotation matrix of unit quaternion q."""
    w, x, y, z = quat_normalize(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(m) -> np.ndarray:
    """Unit quaternion (w,x,y,z) of a 3x3 rotation matrix (Shepperd's method)."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"rotation matrix must be 3x3, got {m.shape}")
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def quat_angle(q1, q2) -> float:
    """Geodesic angle between two rotations: 2*arccos(|<q1, q2>|), radians."""
    q1 = quat_normalize(q1)
    q2 = quat_normalize(q2)
    dot = min(1.0, abs(float(np.dot(q1, q2))))
    return 2.0 * float(np.arccos(dot))


def quat_slerp(q1, q2, u: float) -> np.ndarray:
    """Spherical interpolation from q1 (u=0) to q2 (u=1), shortest arc."""
    q1 = quat_normalize(q1)
    q2 = quat_normalize(q2)
    dot = float(np.dot(q1, q2))
    if dot < 0.0:
        q2, dot = -q2, -dot
    if dot > 1.0 - 1e-10:
        return quat_normalize(q1 + u * (q2 - q1))
    theta = np.arccos(min(1.0, dot))
    s = np.sin(theta)
    return quat_normalize(np.sin((1 - u) * theta) / s * q1 + np.sin(u * theta) / s * q2)


class RigidTransform:
    """Immutable SE(3) element: rotation (unit quaternion wxyz) + translation (m)."""

    __slots__ = ("rotation", "translation")

    def __init__(self, rotation=(1.0, 0.0, 0.0, 0.0), translation=(0.0, 0.0, 0.0)):
        rot = quat_normalize(rotation)
        trans = _as_vec(translation, 3, "translation").copy()
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    def __setattr__(self, name, value):
        raise AttributeError("RigidTransform is immutable")

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    @staticmethod
    def from_axis_angle(axis, angle: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        return RigidTransform(quat_from_axis_angle(axis, angle), translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply `other` first, then `self`."""
        rot = quat_multiply(self.rotation, other.rotation)
        trans = self.translation + quat_rotate(self.rotation, other.translation)
        return RigidTransform(rot, trans)

    def inverse(self) -> "RigidTransform":
        inv_rot = quat_conjugate(self.rotation)
        return RigidTransform(inv_rot, -quat_rotate(inv_rot, self.translation))

    def apply(self, point) -> np.ndarray:
        """Map a 3-point (or Nx3 array of points) through this transform."""
        p = np.asarray(point, dtype=np.float64)
        if p.ndim == 1:
            return quat_rotate(self.rotation, p) + self.translation
        return p @ quat_to_matrix(self.rotation).T + self.translation

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def almost_equal(self, other: "RigidTransform", tol: float = 1e-9) -> bool:
        dq = min(
            np.max(np.abs(self.rotation - other.rotation)),
            np.max(np.abs(self.rotation + other.rotation)),
        )
        return bool(dq <= tol and np.max(np.abs(self.translation - other.translation)) <= tol)

    def __repr__(self):
        r = np.array2string(self.rotation, precision=6, suppress_small=False)
        t = np.array2string(self.translation, precision=6, suppress_small=False)
        return f"RigidTransform(rotation={r}, translation={t})"
