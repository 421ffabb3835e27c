"""Articulated kinematic chains: forward kinematics and keypoint Jacobians.

A chain is a rooted tree of revolute/prismatic joints plus named keypoints
(3D landmarks attached to links with a fixed local offset). Joint
configurations are plain float64 vectors of length ``chain.dof``, ordered as
the joints were declared. FK is pure geometry: out-of-limit values are
accepted here; limits are enforced by the retargeting solver and the
environment.

All chain objects are immutable after construction and FK/Jacobian calls are
pure, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .transforms import RigidTransform, quat_from_matrix

REVOLUTE = "revolute"
PRISMATIC = "prismatic"

_AXIS_TOL = 1e-9


class ChainError(ValueError):
    """Semantic problem in a chain definition (cycle, dangling link, bad axis)."""


@dataclass(frozen=True)
class Joint:
    """One degree of freedom connecting parent_link to child_link."""

    name: str
    kind: str
    parent_link: str
    child_link: str
    origin: RigidTransform
    axis: np.ndarray
    limits: tuple[float, float]

    def __post_init__(self):
        if self.kind not in (REVOLUTE, PRISMATIC):
            raise ChainError(f"joint '{self.name}': unknown kind '{self.kind}'")
        axis = np.asarray(self.axis, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(axis) - 1.0) > _AXIS_TOL:
            raise ChainError(
                f"joint '{self.name}': axis must be unit length, got norm "
                f"{np.linalg.norm(axis):.12g}"
            )
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if lo > hi:
            raise ChainError(f"joint '{self.name}': inverted limits [{lo}, {hi}]")
        object.__setattr__(self, "limits", (lo, hi))


@dataclass(frozen=True)
class Keypoint:
    """Named landmark: a fixed local offset frame on a link."""

    id: str
    link: str
    offset: RigidTransform


def _skew(v):
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]], dtype=np.float64
    )


@dataclass(frozen=True)
class KinematicChain:
    """Rooted tree of joints with named keypoints.

    ``fingertip_ids`` is either empty (kinematics-only chains) or exactly 5
    keypoint ids ordered thumb..pinky; modules that need fingertips (the
    environment, the fingertip rewards) require 5.
    """

    name: str
    links: tuple[str, ...]
    joints: tuple[Joint, ...]
    keypoints: tuple[Keypoint, ...]
    fingertip_ids: tuple[str, ...] = ()
    _c: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "keypoints", tuple(self.keypoints))
        object.__setattr__(self, "fingertip_ids", tuple(self.fingertip_ids))
        if len(set(self.links)) != len(self.links):
            dup = [l for l in self.links if self.links.count(l) > 1][0]
            raise ChainError(f"duplicate link '{dup}'")
        names = [j.name for j in self.joints]
        if len(set(names)) != len(names):
            dup = [n for n in names if names.count(n) > 1][0]
            raise ChainError(f"duplicate joint '{dup}'")
        link_set = set(self.links)
        parent_of = {}
        for j in self.joints:
            if j.parent_link not in link_set:
                raise ChainError(f"joint '{j.name}': unknown parent link '{j.parent_link}'")
            if j.child_link not in link_set:
                raise ChainError(f"joint '{j.name}': unknown child link '{j.child_link}'")
            if j.child_link in parent_of:
                raise ChainError(f"link '{j.child_link}' has more than one parent joint")
            parent_of[j.child_link] = j
        roots = [l for l in self.links if l not in parent_of]
        if len(roots) != 1:
            raise ChainError(
                "chain must have exactly one base link, found "
                + (", ".join(f"'{r}'" for r in roots) if roots else "none (cycle)")
            )
        root = roots[0]
        # Walk up from every link; a path that fails to reach the root in
        # len(links) hops is a cycle or a disconnected island.
        for l in self.links:
            cur, hops = l, 0
            while cur != root:
                if hops > len(self.links):
                    raise ChainError(f"link '{l}' is not connected to base '{root}' (cycle?)")
                cur = parent_of[cur].parent_link
                hops += 1
        kp_ids = [k.id for k in self.keypoints]
        if len(set(kp_ids)) != len(kp_ids):
            dup = [i for i in kp_ids if kp_ids.count(i) > 1][0]
            raise ChainError(f"duplicate keypoint '{dup}'")
        for k in self.keypoints:
            if k.link not in link_set:
                raise ChainError(f"keypoint '{k.id}': unknown link '{k.link}'")
        if self.fingertip_ids and len(self.fingertip_ids) != 5:
            raise ChainError(
                f"fingertip_ids must list exactly 5 keypoints, got {len(self.fingertip_ids)}"
            )
        for f in self.fingertip_ids:
            if f not in kp_ids:
                raise ChainError(f"fingertip '{f}' is not a declared keypoint")
        self._compile(root, parent_of)

    @property
    def dof(self) -> int:
        return len(self.joints)

    @property
    def base_link(self) -> str:
        return self._c["root"]

    def keypoint_ids(self) -> tuple[str, ...]:
        return tuple(k.id for k in self.keypoints)

    def joint_index(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(f"unknown joint '{name}'")

    # -- static structure compiled once for the array FK path ---------------

    def _compile(self, root, parent_of):
        joints = self.joints
        n = len(joints)
        # Topological order: parents before children (declaration order may
        # interleave branches arbitrarily).
        index_of = {j.name: i for i, j in enumerate(joints)}
        order, seen = [], set()

        def visit(i):
            if i in seen:
                return
            parent = joints[i].parent_link
            if parent != root:
                visit(index_of[parent_of[parent].name])
            seen.add(i)
            order.append(i)

        for i in range(n):
            visit(i)
        parent_joint = np.full(n, -1, dtype=np.intp)
        for i, j in enumerate(joints):
            if j.parent_link != root:
                parent_joint[i] = index_of[parent_of[j.parent_link].name]
        ancestors = np.zeros((n, n), dtype=bool)
        for i in order:
            p = parent_joint[i]
            if p >= 0:
                ancestors[i] = ancestors[p]
            ancestors[i, i] = True
        link_joint = {root: -1}
        for i, j in enumerate(joints):
            link_joint[j.child_link] = i
        axes = np.stack([j.axis for j in joints]) if n else np.zeros((0, 3))
        skews = np.stack([_skew(a) for a in axes]) if n else np.zeros((0, 3, 3))
        c = self._c
        c["root"] = root
        c["order"] = order
        c["parent_joint"] = parent_joint
        c["ancestors"] = ancestors
        c["link_joint"] = link_joint
        c["revolute"] = np.array([j.kind == REVOLUTE for j in joints], dtype=bool)
        c["axes"] = axes
        c["skews"] = skews
        c["skews2"] = np.einsum("jab,jbc->jac", skews, skews) if n else skews
        c["origin_R"] = (
            np.stack([j.origin.rotation_matrix() for j in joints]) if n else np.zeros((0, 3, 3))
        )
        c["origin_t"] = np.stack([j.origin.translation for j in joints]) if n else np.zeros((0, 3))
        c["limits_lo"] = np.array([j.limits[0] for j in joints], dtype=np.float64)
        c["limits_hi"] = np.array([j.limits[1] for j in joints], dtype=np.float64)
        c["kp_link_joint"] = np.array([link_joint[k.link] for k in self.keypoints], dtype=np.intp)
        c["kp_offset_t"] = (
            np.stack([k.offset.translation for k in self.keypoints])
            if self.keypoints
            else np.zeros((0, 3))
        )
        c["kp_index"] = {k.id: i for i, k in enumerate(self.keypoints)}

    # -- configuration helpers ----------------------------------------------

    def check_config(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64).reshape(-1)
        if q.shape != (self.dof,):
            raise ValueError(f"joint config must have length {self.dof}, got {q.shape[0]}")
        return q

    def clamp_limits(self, q) -> np.ndarray:
        q = self.check_config(q)
        return np.clip(q, self._c["limits_lo"], self._c["limits_hi"])

    def within_limits(self, q, tol: float = 1e-9) -> bool:
        q = self.check_config(q)
        return bool(
            np.all(q >= self._c["limits_lo"] - tol) and np.all(q <= self._c["limits_hi"] + tol)
        )

    @property
    def limits_lo(self) -> np.ndarray:
        return self._c["limits_lo"]

    @property
    def limits_hi(self) -> np.ndarray:
        return self._c["limits_hi"]

    # -- forward kinematics ---------------------------------------------------

    def fk_state(self, q) -> "FKState":
        """World pose of every joint frame plus per-joint axis/origin data.

        This is the single FK pass everything else (keypoints, Jacobians,
        link frames) reads from.
        """
        q = self.check_config(q)
        c = self._c
        n = self.dof
        rev = c["revolute"]
        local_R = np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
        if rev.any():
            s = np.sin(q[rev])[:, None, None]
            t = (1.0 - np.cos(q[rev]))[:, None, None]
            local_R[rev] += s * c["skews"][rev] + t * c["skews2"][rev]
        world_R = np.empty((n, 3, 3))
        world_t = np.empty((n, 3))
        axis_world = np.empty((n, 3))
        origin_world = np.empty((n, 3))
        pj = c["parent_joint"]
        oR, ot, axes = c["origin_R"], c["origin_t"], c["axes"]
        for i in c["order"]:
            p = pj[i]
            if p < 0:
                pR, pt = None, np.zeros(3)
                R_pre = oR[i]
                t_pre = ot[i]
            else:
                pR, pt = world_R[p], world_t[p]
                R_pre = pR @ oR[i]
                t_pre = pt + pR @ ot[i]
            axis_w = R_pre @ axes[i]
            if rev[i]:
                world_R[i] = R_pre @ local_R[i]
                world_t[i] = t_pre
            else:
                world_R[i] = R_pre
                world_t[i] = t_pre + q[i] * axis_w
            axis_world[i] = axis_w
            origin_world[i] = t_pre
        return FKState(self, q, world_R, world_t, axis_world, origin_world)


@dataclass(frozen=True)
class FKState:
    """Result of one FK pass over a chain at configuration q."""

    chain: KinematicChain
    q: np.ndarray
    world_R: np.ndarray
    world_t: np.ndarray
    axis_world: np.ndarray
    origin_world: np.ndarray

    def _frame(self, joint_index: int) -> tuple[np.ndarray, np.ndarray]:
        if joint_index < 0:
            return np.eye(3), np.zeros(3)
        return self.world_R[joint_index], self.world_t[joint_index]

    def link_frame(self, link: str) -> RigidTransform:
        ji = self.chain._c["link_joint"]
        if link not in ji:
            raise KeyError(f"unknown link '{link}'")
        R, t = self._frame(ji[link])
        return RigidTransform(quat_from_matrix(R), t)

    def keypoint_positions(self) -> np.ndarray:
        """Positions of all declared keypoints, (K, 3), declaration order."""
        c = self.chain._c
        kp_j = c["kp_link_joint"]
        out = np.empty((len(kp_j), 3))
        for i, j in enumerate(kp_j):
            R, t = self._frame(j)
            out[i] = R @ c["kp_offset_t"][i] + t
        return out

    def keypoint_position(self, keypoint_id: str) -> np.ndarray:
        c = self.chain._c
        if keypoint_id not in c["kp_index"]:
            raise KeyError(f"unknown keypoint '{keypoint_id}'")
        i = c["kp_index"][keypoint_id]
        R, t = self._frame(c["kp_link_joint"][i])
        return R @ c["kp_offset_t"][i] + t

    def keypoint_frame(self, keypoint_id: str) -> RigidTransform:
        c = self.chain._c
        if keypoint_id not in c["kp_index"]:
            raise KeyError(f"unknown keypoint '{keypoint_id}'")
        i = c["kp_index"][keypoint_id]
        kp = self.chain.keypoints[i]
        return self.link_frame(kp.link).compose(kp.offset)

    def jacobians(self, positions: np.ndarray | None = None) -> np.ndarray:
        """Position Jacobians of all keypoints, (K, 3, dof).

        Column j of keypoint k is d(position_k)/d(q_j): omega x (p - o) for
        revolute ancestors, the world axis for prismatic ancestors, zero
        otherwise.
        """
        c = self.chain._c
        if positions is None:
            positions = self.keypoint_positions()
        n = self.chain.dof
        kp_j = c["kp_link_joint"]
        k = len(kp_j)
        mask = np.zeros((k, n), dtype=bool)
        for i, j in enumerate(kp_j):
            if j >= 0:
                mask[i] = c["ancestors"][j]
        rev = c["revolute"]
        cols = np.where(
            rev[None, :, None],
            np.cross(self.axis_world[None, :, :], positions[:, None, :] - self.origin_world[None, :, :]),
            self.axis_world[None, :, :],
        )
        cols = cols * mask[:, :, None]
        return np.transpose(cols, (0, 2, 1))


def forward_kinematics(chain: KinematicChain, q) -> dict[str, np.ndarray]:
    """Map keypoint id -> position (meters, base frame) at configuration q."""
    state = chain.fk_state(q)
    pos = state.keypoint_positions()
    return {k.id: pos[i] for i, k in enumerate(chain.keypoints)}


def keypoint_jacobian(chain: KinematicChain, q, keypoint_id: str) -> np.ndarray:
    """3 x dof position Jacobian of one keypoint at configuration q."""
    c = chain._c
    if keypoint_id not in c["kp_index"]:
        raise KeyError(f"unknown keypoint '{keypoint_id}'")
    state = chain.fk_state(q)
    return state.jacobians()[c["kp_index"][keypoint_id]]
