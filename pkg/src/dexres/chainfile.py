"""Chain description file format: parse and serialize kinematic chains.

The format is a TOML document. Exact grammar (unknown keys are rejected):

    format = "dexres-chain"      # required magic
    version = 1                  # required, currently 1
    name = "toy_hand"            # chain name
    fingertips = ["thumb_tip", ...]   # optional; empty or exactly 5 keypoint ids

    [[link]]                     # one entry per link, first may be any order
    name = "base"                # exactly one link must end up parentless

    [[joint]]
    name = "arm_x"
    kind = "prismatic"           # "revolute" | "prismatic"
    parent = "base"              # parent link name
    child = "palm"               # child link name (unique per child)
    origin_xyz = [0.0, 0.0, 0.0]        # meters
    origin_wxyz = [1.0, 0.0, 0.0, 0.0]  # unit quaternion (w,x,y,z)
    axis = [1.0, 0.0, 0.0]              # unit vector in the joint frame
    limits = [-1.0, 1.0]                # [lo, hi], radians or meters

    [[keypoint]]
    id = "wrist"
    link = "palm"
    offset_xyz = [0.0, 0.0, 0.0]
    offset_wxyz = [1.0, 0.0, 0.0, 0.0]  # optional, identity if omitted

Quaternions are normalized on load; ``parse_chain(serialize_chain(c))`` is
structurally identical to ``c``.
"""

from __future__ import annotations

import numpy as np
import tomli

from . import tomlout
from .chain import ChainError, Joint, Keypoint, KinematicChain
from .transforms import RigidTransform

FORMAT_MAGIC = "dexres-chain"
FORMAT_VERSION = 1


class ChainSyntaxError(ValueError):
    """Malformed chain document (TOML-level), with line/column in the message."""


_TOP_KEYS = {"format", "version", "name", "fingertips", "link", "joint", "keypoint"}
_LINK_KEYS = {"name"}
_JOINT_KEYS = {"name", "kind", "parent", "child", "origin_xyz", "origin_wxyz", "axis", "limits"}
_KP_KEYS = {"id", "link", "offset_xyz", "offset_wxyz"}


def _reject_unknown(entry: dict, allowed: set, what: str):
    unknown = set(entry) - allowed
    if unknown:
        raise ChainError(f"{what}: unknown key '{sorted(unknown)[0]}'")


def _need(entry: dict, key: str, what: str):
    if key not in entry:
        raise ChainError(f"{what}: missing required key '{key}'")
    return entry[key]


def _floats(v, n, what, key):
    try:
        a = np.asarray(v, dtype=np.float64).reshape(-1)
    except (TypeError, ValueError):
        raise ChainError(f"{what}: '{key}' must be a list of {n} numbers") from None
    if a.shape != (n,):
        raise ChainError(f"{what}: '{key}' must have {n} entries, got {a.size}")
    if not np.all(np.isfinite(a)):
        raise ChainError(f"{what}: '{key}' contains a non-finite value")
    return a


def parse_chain(text: str) -> KinematicChain:
    """Parse a chain description document.

    Raises ChainSyntaxError for malformed TOML (message carries line and
    column) and ChainError for semantic problems (cycles, dangling links,
    non-unit axes, inverted limits), naming the offending entity.
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ChainSyntaxError(f"malformed chain document: {e}") from None
    _reject_unknown(doc, _TOP_KEYS, "chain document")
    if doc.get("format") != FORMAT_MAGIC:
        raise ChainError(f"chain document: format must be '{FORMAT_MAGIC}'")
    if doc.get("version") != FORMAT_VERSION:
        raise ChainError(f"chain document: unsupported version {doc.get('version')!r}")
    name = doc.get("name", "chain")
    if not isinstance(name, str):
        raise ChainError("chain document: 'name' must be a string")

    links = []
    for i, entry in enumerate(doc.get("link", [])):
        what = f"link #{i}"
        _reject_unknown(entry, _LINK_KEYS, what)
        lname = _need(entry, "name", what)
        if not isinstance(lname, str):
            raise ChainError(f"{what}: 'name' must be a string")
        links.append(lname)

    joints = []
    for i, entry in enumerate(doc.get("joint", [])):
        what = f"joint #{i}"
        _reject_unknown(entry, _JOINT_KEYS, what)
        jname = _need(entry, "name", what)
        what = f"joint '{jname}'"
        origin = RigidTransform(
            _floats(entry.get("origin_wxyz", [1.0, 0.0, 0.0, 0.0]), 4, what, "origin_wxyz"),
            _floats(entry.get("origin_xyz", [0.0, 0.0, 0.0]), 3, what, "origin_xyz"),
        )
        limits = _floats(_need(entry, "limits", what), 2, what, "limits")
        joints.append(
            Joint(
                name=jname,
                kind=_need(entry, "kind", what),
                parent_link=_need(entry, "parent", what),
                child_link=_need(entry, "child", what),
                origin=origin,
                axis=_floats(_need(entry, "axis", what), 3, what, "axis"),
                limits=(limits[0], limits[1]),
            )
        )

    keypoints = []
    for i, entry in enumerate(doc.get("keypoint", [])):
        what = f"keypoint #{i}"
        _reject_unknown(entry, _KP_KEYS, what)
        kid = _need(entry, "id", what)
        what = f"keypoint '{kid}'"
        offset = RigidTransform(
            _floats(entry.get("offset_wxyz", [1.0, 0.0, 0.0, 0.0]), 4, what, "offset_wxyz"),
            _floats(entry.get("offset_xyz", [0.0, 0.0, 0.0]), 3, what, "offset_xyz"),
        )
        keypoints.append(Keypoint(id=kid, link=_need(entry, "link", what), offset=offset))

    fingertips = doc.get("fingertips", [])
    if not isinstance(fingertips, list) or not all(isinstance(f, str) for f in fingertips):
        raise ChainError("chain document: 'fingertips' must be a list of keypoint ids")

    return KinematicChain(
        name=name,
        links=tuple(links),
        joints=tuple(joints),
        keypoints=tuple(keypoints),
        fingertip_ids=tuple(fingertips),
    )


def serialize_chain(chain: KinematicChain) -> str:
    """Serialize a chain to the document format parsed by ``parse_chain``."""
    doc: dict = {
        "format": FORMAT_MAGIC,
        "version": FORMAT_VERSION,
        "name": chain.name,
    }
    if chain.fingertip_ids:
        doc["fingertips"] = list(chain.fingertip_ids)
    doc["link"] = [{"name": l} for l in chain.links]
    doc["joint"] = [
        {
            "name": j.name,
            "kind": j.kind,
            "parent": j.parent_link,
            "child": j.child_link,
            "origin_xyz": [float(x) for x in j.origin.translation],
            "origin_wxyz": [float(x) for x in j.origin.rotation],
            "axis": [float(x) for x in j.axis],
            "limits": [float(j.limits[0]), float(j.limits[1])],
        }
        for j in chain.joints
    ]
    doc["keypoint"] = [
        {
            "id": k.id,
            "link": k.link,
            "offset_xyz": [float(x) for x in k.offset.translation],
            "offset_wxyz": [float(x) for x in k.offset.rotation],
        }
        for k in chain.keypoints
    ]
    return tomlout.dumps(doc)


def load_chain(path) -> KinematicChain:
    with open(path, "r", encoding="utf-8") as f:
        return parse_chain(f.read())


def save_chain(chain: KinematicChain, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_chain(chain))


def chains_equal(a: KinematicChain, b: KinematicChain) -> bool:
    """Structural identity: same entities, same order, bit-identical numbers."""
    if (
        a.name != b.name
        or a.links != b.links
        or a.fingertip_ids != b.fingertip_ids
        or len(a.joints) != len(b.joints)
        or len(a.keypoints) != len(b.keypoints)
    ):
        return False
    for ja, jb in zip(a.joints, b.joints):
        if (
            ja.name != jb.name
            or ja.kind != jb.kind
            or ja.parent_link != jb.parent_link
            or ja.child_link != jb.child_link
            or ja.limits != jb.limits
            or not np.array_equal(ja.axis, jb.axis)
            or not np.array_equal(ja.origin.rotation, jb.origin.rotation)
            or not np.array_equal(ja.origin.translation, jb.origin.translation)
        ):
            return False
    for ka, kb in zip(a.keypoints, b.keypoints):
        if (
            ka.id != kb.id
            or ka.link != kb.link
            or not np.array_equal(ka.offset.rotation, kb.offset.rotation)
            or not np.array_equal(ka.offset.translation, kb.offset.translation)
        ):
            return False
    return True
