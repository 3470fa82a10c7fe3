"""Bundled instances, their analytic reference sets, and instance JSON I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

import jsonschema
import numpy as np

from .contractions import (AffineMap, BilinearQuad, BoxSpec, MarkovIfs, PolygonSpec, ProductMap,
                           map_from_json, open_set_from_json)
from .errors import InstanceError, MarkovIfsError
from .setrep import VoxelSet
from .symbolic import TransitionMatrix

SCHEMA_VERSION = 1


@dataclass
class InstanceBundle:
    name: str
    ifs: MarkovIfs
    expected: dict
    reference: Optional[Callable[[VoxelSet], VoxelSet]] = None
    notes: str = ""
    planar_hosc: Optional[bool] = None
    extra: dict = field(default_factory=dict)

    def catalog_entry(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.ifs.dim,
            "maps": self.ifs.m,
            "expected": self.expected,
            "has_reference": self.reference is not None,
            "notes": self.notes,
        }


# -- reference-set helpers ---------------------------------------------

def rasterize_segment(geometry: VoxelSet, p, q, occ=None):
    """Mark the cells met by the segment p-q (dense sampling at quarter-cell spacing)."""
    occ = np.zeros(geometry.shape, dtype=bool) if occ is None else occ
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = int(math.ceil(np.linalg.norm((q - p) / geometry.spacing) * 4)) + 2
    t = np.linspace(0.0, 1.0, n)[:, None]
    idx = geometry.cell_of(p + t * (q - p))
    occ[tuple(idx.T)] = True
    return occ


def cantor_mask(centres, level: int) -> np.ndarray:
    """True where a point lies in the level-``level`` middle-thirds construction on [0, 1]."""
    x = np.asarray(centres, dtype=float)
    keep = (x >= 0) & (x <= 1)
    y = x.copy()
    for _ in range(level):
        y = y * 3
        digit = np.floor(y)
        keep &= ~((digit == 1) & (y > 1) & (y < 2))
        y = np.where(digit >= 2, y - 2, np.where(digit >= 1, y - 1, y))
        y = np.clip(y, 0, 1)
    return keep


def cantor_level_for(h: float) -> int:
    """Deepest Cantor level whose intervals are at least one cell wide."""
    return max(0, int(math.floor(math.log(1.0 / h, 3) + 1e-9)))


def cantor_set_1d(resolution: int, level: Optional[int] = None) -> VoxelSet:
    """Middle-thirds Cantor construction on [0,1] at the given level (cells whose centre lies in it)."""
    g = VoxelSet.empty((0.0,), (1.0,), (resolution,))
    level = cantor_level_for(g.h) if level is None else level
    centres = (np.arange(resolution) + 0.5) / resolution
    return g.with_occupancy(cantor_mask(centres, level))


def _cube_ladder_reference(geometry: VoxelSet) -> VoxelSet:
    occ = rasterize_segment(geometry, (0, 0, 0), (0, 0, 1))
    heights = [0.0, 1.0]
    z = 0.5
    hz = geometry.spacing[2]
    while z >= hz / 2:
        heights.append(z)
        z /= 2
    for z in heights:
        rasterize_segment(geometry, (0, 0, z), (1, 0, z), occ)
    return geometry.with_occupancy(occ)


def _cantor_ladder_reference(geometry: VoxelSet) -> VoxelSet:
    nx, ny = geometry.shape
    level = cantor_level_for(geometry.spacing[0])
    cx = geometry.lo[0] + (np.arange(nx) + 0.5) * geometry.spacing[0]
    cols = cantor_mask(cx, level)
    occ = np.zeros(geometry.shape, dtype=bool)
    occ[cols, :] = True
    rasterize_segment(geometry, (0, 0), (1, 0), occ)
    return geometry.with_occupancy(occ)


def _cantor_square_reference(geometry: VoxelSet) -> VoxelSet:
    masks = []
    for ax in range(2):
        c = geometry.lo[ax] + (np.arange(geometry.shape[ax]) + 0.5) * geometry.spacing[ax]
        masks.append(cantor_mask(c, cantor_level_for(geometry.spacing[ax])))
    return geometry.with_occupancy(masks[0][:, None] & masks[1][None, :])


# -- the catalogue -----------------------------------------------------

def _cube_ladder_r3() -> InstanceBundle:
    third = 1.0 / 3.0
    # g1(a) = (a+b)/3, g1(b) = b/3 ; columns are the images of a and b
    g1 = AffineMap([[third, 0.0], [third, third]], [0.0, 0.0])
    # g2(a) = a/3, g2(b) = (a+b)/3
    g2 = AffineMap([[third, third], [0.0, third]], [0.0, 0.0])
    # g3 sends 0, b, a+b, a to a/3, (2a+b)/3, a+b/3, a
    g3 = BilinearQuad(p00=(third, 0.0), p10=(1.0, 0.0), p11=(1.0, third), p01=(2 * third, third))
    h1 = (0.5, 0.0)
    h2 = (0.5, 0.5)
    maps = (ProductMap(g1, *h1), ProductMap(g1, *h2), ProductMap(g2, *h1),
            ProductMap(g3, *h1), ProductMap(g2, *h2), ProductMap(g3, *h2))
    M = TransitionMatrix((
        (1, 1, 0, 0, 0, 0),
        (1, 1, 0, 0, 0, 0),
        (0, 0, 1, 1, 1, 1),
        (0, 0, 1, 1, 1, 1),
        (0, 0, 0, 0, 1, 1),
        (0, 0, 0, 0, 1, 1),
    ))
    ifs = MarkovIfs(maps, M, BoxSpec((0, 0, 0), (1, 1, 1)), "cube_ladder_r3", ((0, 0, 0), (1, 1, 1)))
    return InstanceBundle(
        "cube_ladder_r3", ifs,
        expected={"connected": True, "locally_connected": False, "osc": True},
        reference=_cube_ladder_reference,
        notes="Six product maps on the unit cube; the attractor is the vertical segment over the origin "
              "plus horizontal rungs at heights 0, 1 and 2^-n. Box OSC on (0,1)^3 (3D, not HOSC).",
        planar_hosc=None)


def _cantor_maps():
    maps = []
    for ox in (0.0, 2.0 / 3.0):
        for oy in (0.0, 0.5):
            maps.append(AffineMap([[1 / 3, 0.0], [0.0, 0.5]], [ox, oy]))
    return maps


def _cantor_ladder() -> InstanceBundle:
    maps = _cantor_maps() + [AffineMap([[0.5, 0.0], [0.0, 0.0]], [0.0, 0.0]),
                             AffineMap([[0.5, 0.0], [0.0, 0.0]], [0.5, 0.0])]
    ifs = MarkovIfs(tuple(maps), TransitionMatrix.block_diagonal(4, 2), BoxSpec((0, 0), (1, 1)),
                    "cantor_ladder", ((0, 0), (1, 1)))
    return InstanceBundle(
        "cantor_ladder", ifs,
        expected={"connected": True, "locally_connected": False, "osc": False},
        reference=_cantor_ladder_reference,
        notes="C x [0,1] overlapped with the segment [0,1] x {0}, generated by two degenerate maps.",
        planar_hosc=False)


def _cantor_square() -> InstanceBundle:
    maps = [AffineMap([[1 / 3, 0.0], [0.0, 1 / 3]], [ox, oy]) for ox in (0.0, 2 / 3) for oy in (0.0, 2 / 3)]
    ifs = MarkovIfs(tuple(maps), TransitionMatrix.full(4), BoxSpec((0, 0), (1, 1)), "cantor_square",
                    ((0, 0), (1, 1)))
    return InstanceBundle(
        "cantor_square", ifs,
        expected={"connected": False, "locally_connected": False, "osc": True},
        reference=_cantor_square_reference,
        notes="C x C, totally disconnected control.",
        planar_hosc=True)


SQRT3_2 = math.sqrt(3.0) / 2.0
TRIANGLE = ((0.0, 0.0), (1.0, 0.0), (0.5, SQRT3_2))


def _sierpinski_maps(scale=1.0, shift=(0.0, 0.0)):
    shift = np.asarray(shift, dtype=float)
    return [AffineMap(np.eye(2) * 0.5, (scale * np.asarray(v) + shift) / 2.0) for v in TRIANGLE]


def _sierpinski() -> InstanceBundle:
    ifs = MarkovIfs(tuple(_sierpinski_maps()), TransitionMatrix.full(3), PolygonSpec(TRIANGLE),
                    "sierpinski", ((0, 0), (1, 1)))
    return InstanceBundle(
        "sierpinski", ifs,
        expected={"connected": True, "locally_connected": True, "osc": True},
        notes="Classical gasket, full shift on three similitudes of ratio 1/2.",
        planar_hosc=True)


def _two_blocks_disjoint() -> InstanceBundle:
    s = 0.45
    maps = _sierpinski_maps(s, (0.02, 0.02)) + _sierpinski_maps(s, (0.53, 0.55))
    ifs = MarkovIfs(tuple(maps), TransitionMatrix.block_diagonal(3, 3), None, "two_blocks_disjoint",
                    ((0, 0), (1, 1)))
    return InstanceBundle(
        "two_blocks_disjoint", ifs,
        expected={"connected": False, "locally_connected": True, "osc": None},
        notes="Two far-apart gaskets joined only through a block-diagonal matrix.",
        planar_hosc=None)


_FACTORIES = {
    "cube_ladder_r3": _cube_ladder_r3,
    "cantor_ladder": _cantor_ladder,
    "cantor_square": _cantor_square,
    "sierpinski": _sierpinski,
    "two_blocks_disjoint": _two_blocks_disjoint,
}

INSTANCE_NAMES = tuple(_FACTORIES)


def make_instance(name: str) -> InstanceBundle:
    try:
        return _FACTORIES[name]()
    except KeyError:
        raise InstanceError(f"unknown instance {name!r}", known=list(INSTANCE_NAMES)) from None


def list_instances() -> list:
    return [make_instance(n).catalog_entry() for n in INSTANCE_NAMES]


# -- JSON --------------------------------------------------------------

def load_schema(name: str) -> dict:
    return json.loads(resources.files("markovifs.schemas").joinpath(name).read_text())


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else ""


def validate_document(doc, schema_name: str):
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        raise InstanceError("schema violation", errors=[
            {"pointer": _pointer(e.absolute_path), "message": e.message} for e in errors])


def save_instance(ifs: MarkovIfs) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "label": ifs.label,
        "dimension": ifs.dim,
        "maps": [f.to_json() for f in ifs.maps],
        "matrix": ifs.matrix.to_json(),
        "open_set": ifs.open_set.to_json() if ifs.open_set is not None else None,
    }
    if ifs.box is not None:
        doc["box"] = {"lo": list(ifs.box[0]), "hi": list(ifs.box[1])}
    return doc


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def load_instance(doc) -> MarkovIfs:
    """Build a MarkovIfs from a parsed document (or a JSON string)."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"invalid JSON: {exc}") from exc
    validate_document(doc, "instance.schema.json")
    if len(doc["matrix"]) != len(doc["maps"]):
        raise InstanceError("matrix/maps mismatch", maps=len(doc["maps"]), m=len(doc["matrix"]))
    try:
        maps = []
        for i, m in enumerate(doc["maps"]):
            f = map_from_json(m)
            declared = m.get("lip_bound")
            if declared is not None:
                if declared >= 1:
                    raise InstanceError(f"map {i + 1} declares lip_bound {declared} >= 1",
                                        pointer=f"/maps/{i}/lip_bound")
                if declared < f.lip_bound - 1e-12:
                    raise InstanceError(f"map {i + 1} declares lip_bound below its certified bound",
                                        pointer=f"/maps/{i}/lip_bound", certified=f.lip_bound)
            if f.dim != doc["dimension"]:
                raise InstanceError(f"map {i + 1} has dimension {f.dim}", pointer=f"/maps/{i}")
            maps.append(f)
        box = doc.get("box")
        return MarkovIfs(tuple(maps), TransitionMatrix(tuple(tuple(r) for r in doc["matrix"])),
                         open_set_from_json(doc.get("open_set")), doc.get("label", ""),
                         (tuple(box["lo"]), tuple(box["hi"])) if box else None)
    except InstanceError:
        raise
    except MarkovIfsError as exc:
        raise InstanceError(str(exc), **exc.details) from exc
