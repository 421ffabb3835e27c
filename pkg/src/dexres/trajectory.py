"""Demonstration trajectories: data model, file I/O, and workspace augmentation.

A demonstration is a time-ordered sequence of (hand keypoints, wrist pose,
object pose) frames at a fixed frame period. Hand keypoints follow a named
layout; the default ``hand21/v1`` layout is wrist + 4 points per finger
(MCP, PIP, DIP, TIP), thumb first:

    index 0        wrist
    index 1+4f+k   finger f in (thumb, index, middle, ring, pinky),
                   k in (MCP, PIP, DIP, TIP)

so fingertips sit at indices (4, 8, 12, 16, 20).

Augmentation maps a whole trajectory through a gravity-preserving workspace
transform: rotation about the world +z axis followed by a translation. This
keeps every hand-object relative vector and all gravity directions intact,
so augmented demonstrations stay physically consistent.

Trajectories are immutable after construction; all operations return new
values. File round trips are bit-exact for finite values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .transforms import RigidTransform, quat_from_axis_angle, quat_multiply, quat_rotate, quat_slerp

TRAJ_MAGIC = "dexres-demo"
OBJECT_MAGIC = "dexres-object"
FORMAT_VERSION = 1


class TrajectoryFormatError(ValueError):
    """Schema violation in a trajectory or object file; message names the field path."""


@dataclass(frozen=True)
class HandLayout:
    """Index map for one hand keypoint layout."""

    name: str
    n_keypoints: int
    wrist: int
    fingertips: tuple[int, int, int, int, int]

    def finger_indices(self, finger: int) -> tuple[int, int, int, int]:
        base = 1 + 4 * finger
        return (base, base + 1, base + 2, base + 3)


HAND21 = HandLayout(name="hand21/v1", n_keypoints=21, wrist=0, fingertips=(4, 8, 12, 16, 20))

LAYOUTS = {HAND21.name: HAND21}


def get_layout(name: str) -> HandLayout:
    if name not in LAYOUTS:
        raise TrajectoryFormatError(f"unknown keypoint layout '{name}'")
    return LAYOUTS[name]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DemoFrame:
    """One demonstration frame: K hand keypoints plus wrist and object poses."""

    hand_keypoints: np.ndarray
    wrist_pose: RigidTransform
    object_pose: RigidTransform

    def __post_init__(self):
        kp = np.asarray(self.hand_keypoints, dtype=np.float64)
        if kp.ndim != 2 or kp.shape[1] != 3 or kp.shape[0] < 6:
            raise ValueError(
                f"hand_keypoints must be (K>=6, 3), got {kp.shape}"
            )
        if not np.all(np.isfinite(kp)):
            raise ValueError("hand_keypoints contain a non-finite value")
        object.__setattr__(self, "hand_keypoints", _frozen(kp))


@dataclass(frozen=True)
class DemoTrajectory:
    """Time-ordered demonstration frames with frame period dt (seconds)."""

    frames: tuple[DemoFrame, ...]
    dt: float
    object_ref: str
    lift_index: int | None = None
    layout: str = HAND21.name

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not self.frames:
            raise ValueError("trajectory must contain at least one frame")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.lift_index is not None and not 0 <= self.lift_index < len(self.frames):
            raise ValueError(
                f"lift_index {self.lift_index} out of range for {len(self.frames)} frames"
            )
        get_layout(self.layout)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def hand_layout(self) -> HandLayout:
        return get_layout(self.layout)

    def fingertip_positions(self, t: int) -> np.ndarray:
        """(5, 3) demo fingertip positions at frame t."""
        return self.frames[t].hand_keypoints[list(self.hand_layout.fingertips)]

    def object_positions(self) -> np.ndarray:
        """(T, 3) object center positions over the trajectory."""
        return np.stack([f.object_pose.translation for f in self.frames])


@dataclass(frozen=True)
class ObjectModel:
    """Sampled surface point cloud of a manipulated object, object frame, meters."""

    id: str
    points: np.ndarray
    scale: float
    bounding_radius: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 16:
            raise ValueError(f"points must be (P>=16, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("object points contain a non-finite value")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        max_norm = float(np.max(np.linalg.norm(pts, axis=1)))
        if self.bounding_radius < max_norm - 1e-12:
            raise ValueError(
                f"bounding_radius {self.bounding_radius} smaller than max point norm {max_norm}"
            )
        object.__setattr__(self, "points", _frozen(pts))

    def rest_height(self) -> float:
        """Height of the object center when resting on the z=0 plane."""
        return -float(np.min(self.points[:, 2]))


@dataclass(frozen=True)
class WorkspaceTransform:
    """Gravity-preserving rigid map: rotate about world +z by yaw, then translate."""

    yaw: float = 0.0
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "translation", _frozen(np.reshape(self.translation, 3)))

    def rotation_quat(self) -> np.ndarray:
        return quat_from_axis_angle([0.0, 0.0, 1.0], self.yaw)

    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return np.asarray(pts, dtype=np.float64) @ rot.T + self.translation

    def apply_pose(self, pose: RigidTransform) -> RigidTransform:
        q = self.rotation_quat()
        return RigidTransform(
            quat_multiply(q, pose.rotation),
            quat_rotate(q, pose.translation) + self.translation,
        )

    def compose(self, first: "WorkspaceTransform") -> "WorkspaceTransform":
        """Transform equal to applying ``first``, then this one."""
        return WorkspaceTransform(
            yaw=self.yaw + first.yaw,
            translation=self.apply_points(first.translation[None, :])[0],
        )


def augment(traj: DemoTrajectory, transform: WorkspaceTransform) -> DemoTrajectory:
    """Map every hand keypoint, wrist pose, and object pose through ``transform``.

    dt, lift_index, and object_ref are unchanged; hand-object relative
    geometry and the gravity direction are preserved by construction.
    """
    frames = tuple(
        DemoFrame(
            hand_keypoints=transform.apply_points(f.hand_keypoints),
            wrist_pose=transform.apply_pose(f.wrist_pose),
            object_pose=transform.apply_pose(f.object_pose),
        )
        for f in traj.frames
    )
    return DemoTrajectory(
        frames=frames,
        dt=traj.dt,
        object_ref=traj.object_ref,
        lift_index=traj.lift_index,
        layout=traj.layout,
    )


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned box of object start positions plus a yaw range."""

    box_lo: np.ndarray
    box_hi: np.ndarray
    yaw_range: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "box_lo", _frozen(np.reshape(self.box_lo, 3)))
        object.__setattr__(self, "box_hi", _frozen(np.reshape(self.box_hi, 3)))
        if np.any(self.box_lo > self.box_hi) or self.yaw_range[0] > self.yaw_range[1]:
            raise ValueError("empty workspace")

    def contains(self, p, tol: float = 1e-9) -> bool:
        p = np.reshape(p, 3)
        return bool(np.all(p >= self.box_lo - tol) and np.all(p <= self.box_hi + tol))


def sample_augmentations(
    traj: DemoTrajectory, count: int, workspace: Workspace, seed
) -> list[DemoTrajectory]:
    """Draw ``count`` uniformly sampled workspace transforms and apply them.

    Each transform rotates about +z by a yaw drawn from the workspace yaw
    range and translates the initial object position to a point drawn
    uniformly in the workspace box. Deterministic given ``seed``.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    p0 = traj.frames[0].object_pose.translation
    if not workspace.contains(p0):
        raise ValueError(
            f"workspace box must contain the original object start position {p0.tolist()}"
        )
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        yaw = float(rng.uniform(workspace.yaw_range[0], workspace.yaw_range[1]))
        target = rng.uniform(workspace.box_lo, workspace.box_hi)
        rotated = WorkspaceTransform(yaw=yaw).apply_points(p0[None, :])[0]
        out.append(augment(traj, WorkspaceTransform(yaw=yaw, translation=target - rotated)))
    return out


def enforce_velocity_cap(traj: DemoTrajectory, max_wrist_step: float) -> DemoTrajectory:
    """Linearly resample so per-frame wrist displacement never exceeds the cap.

    Frames whose wrist moves farther than ``max_wrist_step`` are subdivided
    (positions lerped, orientations slerped); dt is unchanged, so this slows
    the demonstration down rather than smoothing it. lift_index is remapped
    to the subdivided timeline.
    """
    if not max_wrist_step > 0:
        raise ValueError("max_wrist_step must be positive")
    frames = [traj.frames[0]]
    new_index = {0: 0}
    for t in range(1, len(traj.frames)):
        a, b = traj.frames[t - 1], traj.frames[t]
        step = float(np.linalg.norm(b.wrist_pose.translation - a.wrist_pose.translation))
        pieces = max(1, int(math.ceil(step / max_wrist_step - 1e-12)))
        for i in range(1, pieces + 1):
            u = i / pieces
            if i == pieces:
                frames.append(b)
            else:
                frames.append(
                    DemoFrame(
                        hand_keypoints=(1 - u) * a.hand_keypoints + u * b.hand_keypoints,
                        wrist_pose=_lerp_pose(a.wrist_pose, b.wrist_pose, u),
                        object_pose=_lerp_pose(a.object_pose, b.object_pose, u),
                    )
                )
        new_index[t] = len(frames) - 1
    lift = None if traj.lift_index is None else new_index[traj.lift_index]
    return DemoTrajectory(
        frames=tuple(frames),
        dt=traj.dt,
        object_ref=traj.object_ref,
        lift_index=lift,
        layout=traj.layout,
    )


def _lerp_pose(a: RigidTransform, b: RigidTransform, u: float) -> RigidTransform:
    return RigidTransform(
        quat_slerp(a.rotation, b.rotation, u),
        (1 - u) * a.translation + u * b.translation,
    )


# -- file I/O -----------------------------------------------------------------
#
# Both file kinds are strict JSON: unknown fields are rejected, every error
# names the offending field path, and non-finite values are refused on both
# read and write. float repr round-trips exactly, so load(save(t)) == t
# bit-for-bit.

_POSE_KEYS = {"xyz", "wxyz"}
_FRAME_KEYS = {"hand_keypoints", "wrist_pose", "object_pose"}
_TRAJ_KEYS = {"format", "version", "dt", "object_ref", "lift_index", "layout", "frames"}
_OBJ_KEYS = {"format", "version", "id", "scale", "bounding_radius", "points"}


def _check_keys(obj: dict, allowed: set, path: str):
    if not isinstance(obj, dict):
        raise TrajectoryFormatError(f"{path}: expected an object")
    for key in obj:
        if key not in allowed:
            raise TrajectoryFormatError(f"{path}.{key}: unknown field")
    return obj


def _get(obj: dict, key: str, path: str):
    if key not in obj:
        raise TrajectoryFormatError(f"{path}.{key}: missing field")
    return obj[key]


def _num_array(v, shape, path):
    try:
        a = np.asarray(v, dtype=np.float64)
    except (TypeError, ValueError):
        raise TrajectoryFormatError(f"{path}: expected a numeric array") from None
    if a.shape != shape and (shape[0] is not None or a.ndim != len(shape) or a.shape[1:] != shape[1:]):
        raise TrajectoryFormatError(f"{path}: expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise TrajectoryFormatError(f"{path}: non-finite value")
    return a


def _pose_to_json(p: RigidTransform) -> dict:
    return {"xyz": [float(x) for x in p.translation], "wxyz": [float(x) for x in p.rotation]}


def _pose_from_json(obj, path) -> RigidTransform:
    _check_keys(obj, _POSE_KEYS, path)
    xyz = _num_array(_get(obj, "xyz", path), (3,), f"{path}.xyz")
    wxyz = _num_array(_get(obj, "wxyz", path), (4,), f"{path}.wxyz")
    return RigidTransform(wxyz, xyz)


def _reject_nonfinite(token):
    raise TrajectoryFormatError(f"non-finite value '{token}' in file")


def save_trajectory(traj: DemoTrajectory, path) -> None:
    doc = {
        "format": TRAJ_MAGIC,
        "version": FORMAT_VERSION,
        "dt": float(traj.dt),
        "object_ref": traj.object_ref,
        "lift_index": traj.lift_index,
        "layout": traj.layout,
        "frames": [
            {
                "hand_keypoints": [[float(x) for x in row] for row in f.hand_keypoints],
                "wrist_pose": _pose_to_json(f.wrist_pose),
                "object_pose": _pose_to_json(f.object_pose),
            }
            for f in traj.frames
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, allow_nan=False, indent=1)
        fh.write("\n")


def load_trajectory(path) -> DemoTrajectory:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh, parse_constant=_reject_nonfinite)
        except json.JSONDecodeError as e:
            raise TrajectoryFormatError(f"malformed trajectory file: {e}") from None
    _check_keys(doc, _TRAJ_KEYS, "trajectory")
    if _get(doc, "format", "trajectory") != TRAJ_MAGIC:
        raise TrajectoryFormatError("trajectory.format: expected 'dexres-demo'")
    if _get(doc, "version", "trajectory") != FORMAT_VERSION:
        raise TrajectoryFormatError(f"trajectory.version: unsupported {doc['version']!r}")
    lift = _get(doc, "lift_index", "trajectory")
    if lift is not None and not isinstance(lift, int):
        raise TrajectoryFormatError("trajectory.lift_index: expected integer or null")
    frames_json = _get(doc, "frames", "trajectory")
    if not isinstance(frames_json, list) or not frames_json:
        raise TrajectoryFormatError("trajectory.frames: expected a non-empty array")
    frames = []
    for i, fj in enumerate(frames_json):
        fp = f"frames[{i}]"
        _check_keys(fj, _FRAME_KEYS, fp)
        frames.append(
            DemoFrame(
                hand_keypoints=_num_array(
                    _get(fj, "hand_keypoints", fp), (None, 3), f"{fp}.hand_keypoints"
                ),
                wrist_pose=_pose_from_json(_get(fj, "wrist_pose", fp), f"{fp}.wrist_pose"),
                object_pose=_pose_from_json(_get(fj, "object_pose", fp), f"{fp}.object_pose"),
            )
        )
    return DemoTrajectory(
        frames=tuple(frames),
        dt=float(_get(doc, "dt", "trajectory")),
        object_ref=str(_get(doc, "object_ref", "trajectory")),
        lift_index=lift,
        layout=str(_get(doc, "layout", "trajectory")),
    )


def save_object(model: ObjectModel, path) -> None:
    doc = {
        "format": OBJECT_MAGIC,
        "version": FORMAT_VERSION,
        "id": model.id,
        "scale": float(model.scale),
        "bounding_radius": float(model.bounding_radius),
        "points": [[float(x) for x in row] for row in model.points],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, allow_nan=False, indent=1)
        fh.write("\n")


def load_object(path) -> ObjectModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh, parse_constant=_reject_nonfinite)
        except json.JSONDecodeError as e:
            raise TrajectoryFormatError(f"malformed object file: {e}") from None
    _check_keys(doc, _OBJ_KEYS, "object")
    if _get(doc, "format", "object") != OBJECT_MAGIC:
        raise TrajectoryFormatError("object.format: expected 'dexres-object'")
    if _get(doc, "version", "object") != FORMAT_VERSION:
        raise TrajectoryFormatError(f"object.version: unsupported {doc['version']!r}")
    return ObjectModel(
        id=str(_get(doc, "id", "object")),
        points=_num_array(_get(doc, "points", "object"), (None, 3), "object.points"),
        scale=float(_get(doc, "scale", "object")),
        bounding_radius=float(_get(doc, "bounding_radius", "object")),
    )
