"""Heading-indexed state lattice: poses, motion primitives, and edge evaluation.

Edges are short precomputed motions between grid poses.  Each primitive carries
the ordered list of cells swept while executing it (supercover rasterization,
origin cell excluded, endpoint included), so validity and traversal cost against
a cost map reduce to a scan over those cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .costmap import CostMap, HypothesisStack

N_HEADINGS = 8
# Unit steps per heading, 45 degrees apart, counterclockwise on screen (y down).
DIRS = ((1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1))

PRIM_MAGIC = "MHPRIM 1"

# Arc lengths in cells for unit steps.  The diagonal is quantized to 1.5 (above
# the sqrt(2) chord) so the straight-line-time heuristic stays admissible while
# free-space edge costs remain exactly representable in binary floating point.
CARDINAL_ARC = 1.0
DIAGONAL_ARC = 1.5


class LibraryFormatError(ValueError):
    """Raised for malformed primitive library files."""


@dataclass(frozen=True, order=True)
class Pose:
    x: int
    y: int
    heading: int

    def cell(self) -> tuple[int, int]:
        return (self.x, self.y)


def supercover_offsets(dx: int, dy: int) -> tuple[tuple[int, int], ...]:
    """Cells entered by the segment from (0,0) to (dx,dy) between cell centers.

    The origin cell is excluded and the endpoint is last.  When the segment
    passes exactly through a cell corner both adjacent cells are included, so a
    diagonal motion cannot slip between two diagonally touching obstacles.
    """
    if dx == 0 and dy == 0:
        raise ValueError("zero-length motion has no swept cells")
    cells: list[tuple[int, int]] = []
    x = y = 0
    nx, ny = abs(dx), abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    ix = iy = 0
    while ix < nx or iy < ny:
        decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if decision == 0:
            cells.append((x + sx, y))
            cells.append((x, y + sy))
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif decision < 0:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((x, y))
    return tuple(cells)


@dataclass(frozen=True)
class MotionPrimitive:
    """One lattice edge shape, anchored at a start heading."""

    id: int
    start_heading: int
    dx: int
    dy: int
    end_heading: int
    arc_length: float
    swept: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not 0 <= self.start_heading < N_HEADINGS or not 0 <= self.end_heading < N_HEADINGS:
            raise ValueError(f"primitive {self.id}: headings must be in [0, {N_HEADINGS})")
        if self.arc_length <= 0.0:
            raise ValueError(f"primitive {self.id}: arc length must be positive")
        if not self.swept:
            raise ValueError(f"primitive {self.id}: swept cell list is empty")
        if self.swept[-1] != (self.dx, self.dy):
            raise ValueError(f"primitive {self.id}: swept cells must end at the displacement")


class PrimitiveLibrary:
    """Primitives grouped by start heading, plus the nominal execution speed."""

    def __init__(self, prims: tuple[MotionPrimitive, ...], nominal_speed: float = 1.0,
                 resolution: float | None = None):
        if nominal_speed <= 0.0:
            raise ValueError("nominal speed must be positive")
        ids = [p.id for p in prims]
        if len(set(ids)) != len(ids):
            raise ValueError("primitive ids must be unique")
        self.prims = tuple(sorted(prims, key=lambda p: p.id))
        self.nominal_speed = nominal_speed
        self.resolution = resolution
        self.by_heading: dict[int, tuple[MotionPrimitive, ...]] = {
            h: tuple(p for p in self.prims if p.start_heading == h) for h in range(N_HEADINGS)
        }
        self._by_id = {p.id: p for p in self.prims}

    def duration(self, prim: MotionPrimitive) -> float:
        """Nominal (free-space) execution time of a primitive, in seconds."""
        return prim.arc_length / self.nominal_speed

    def __len__(self) -> int:
        return len(self.prims)

    def get(self, prim_id: int) -> MotionPrimitive:
        try:
            return self._by_id[prim_id]
        except KeyError:
            raise KeyError(f"no primitive with id {prim_id}") from None


def default_library(resolution: float = 1.0, nominal_speed: float = 1.0) -> PrimitiveLibrary:
    """Minimal unit-step library: per heading, forward plus 45-degree left/right.

    Ids are ``3 * heading + {0: forward, 1: left, 2: right}``.
    """
    prims = []
    for h in range(N_HEADINGS):
        for slot, eh in enumerate((h, (h + 1) % N_HEADINGS, (h - 1) % N_HEADINGS)):
            dx, dy = DIRS[eh]
            arc = (CARDINAL_ARC if dx == 0 or dy == 0 else DIAGONAL_ARC) * resolution
            prims.append(
                MotionPrimitive(
                    id=3 * h + slot,
                    start_heading=h,
                    dx=dx,
                    dy=dy,
                    end_heading=eh,
                    arc_length=arc,
                    swept=supercover_offsets(dx, dy),
                )
            )
    return PrimitiveLibrary(tuple(prims), nominal_speed=nominal_speed, resolution=resolution)


def successors(pose: Pose, lib: PrimitiveLibrary, width: int, height: int
               ) -> list[tuple[MotionPrimitive, Pose]]:
    """Applicable primitives at ``pose`` whose swept cells stay on the map.

    Deterministic: ascending primitive id.
    """
    out = []
    for prim in lib.by_heading.get(pose.heading, ()):
        ok = True
        for ox, oy in prim.swept:
            cx, cy = pose.x + ox, pose.y + oy
            if not (0 <= cx < width and 0 <= cy < height):
                ok = False
                break
        if ok:
            out.append((prim, Pose(pose.x + prim.dx, pose.y + prim.dy, prim.end_heading)))
    return out


@dataclass(frozen=True)
class EdgeEvaluation:
    """Per-hypothesis validity and traversal cost of one edge.

    ``cost[h]`` is None when the edge is invalid in hypothesis ``h``; otherwise
    it is the nominal duration scaled by the mean soft-cost factor
    ``1 + value / 255`` over the swept cells.
    """

    valid: tuple[bool, ...]
    cost: tuple[float | None, ...]

    @property
    def valid_in_any(self) -> bool:
        return any(self.valid)

    @property
    def valid_in_all(self) -> bool:
        return all(self.valid)


def evaluate_edge(pose: Pose, prim: MotionPrimitive, stack: HypothesisStack,
                  lib: PrimitiveLibrary) -> EdgeEvaluation:
    """Check and cost one edge against every hypothesis in the stack."""
    nominal = prim.arc_length / lib.nominal_speed
    width = stack.width
    k = len(prim.swept)
    valid: list[bool] = []
    cost: list[float | None] = []
    for cmap in stack.maps:
        cells = cmap.cells
        mask = cmap.lethal_mask
        total = 0.0
        ok = True
        for ox, oy in prim.swept:
            idx = (pose.y + oy) * width + (pose.x + ox)
            if mask[idx]:
                ok = False
                break
            total += 1.0 + cells[idx] / 255.0
        valid.append(ok)
        cost.append(nominal * (total / k) if ok else None)
    return EdgeEvaluation(tuple(valid), tuple(cost))


@dataclass(frozen=True)
class Trajectory:
    """Executed pose sequence: per-step (source, primitive id, destination).

    A step's source heading can differ from the previous step's arrival heading
    where a rerouted segment was spliced in; cell continuity always holds.
    """

    steps: tuple[tuple[Pose, int, Pose], ...]
    duration: float
    start: Pose

    @property
    def poses(self) -> tuple[Pose, ...]:
        if not self.steps:
            return (self.start,)
        out = [self.steps[0][0]]
        for _src, _pid, dst in self.steps:
            out.append(dst)
        return tuple(out)

    def end_pose(self) -> Pose:
        if not self.steps:
            return self.start
        return self.steps[-1][2]

    def collision_free(self, cmap: CostMap, lib: PrimitiveLibrary) -> bool:
        """True when no swept cell of any step is lethal in ``cmap``."""
        for src, pid, _dst in self.steps:
            prim = lib.get(pid)
            for ox, oy in prim.swept:
                if cmap.is_lethal(src.x + ox, src.y + oy):
                    return False
        return True


_LIB_CACHE: dict[int, PrimitiveLibrary] = {}


def save_library(lib: PrimitiveLibrary, path: str) -> None:
    lines = [PRIM_MAGIC]
    for p in lib.prims:
        cells = " ".join(f"{x} {y}" for x, y in p.swept)
        lines.append(
            f"{p.id} {p.start_heading} {p.dx} {p.dy} {p.end_heading} {p.arc_length!r} "
            f"{len(p.swept)} {cells}"
        )
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_library(path: str, nominal_speed: float = 1.0) -> PrimitiveLibrary:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != PRIM_MAGIC:
        raise LibraryFormatError(f"{path}:1: expected header '{PRIM_MAGIC}'")
    prims = []
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if len(tok) < 7:
            raise LibraryFormatError(f"{path}:{lineno}: short primitive line")
        try:
            pid, sh, dx, dy, eh = (int(t) for t in tok[:5])
            arc = float(tok[5])
            k = int(tok[6])
            coords = [int(t) for t in tok[7:]]
        except ValueError as exc:
            raise LibraryFormatError(f"{path}:{lineno}: {exc}") from exc
        if len(coords) != 2 * k:
            raise LibraryFormatError(
                f"{path}:{lineno}: declared {k} swept cells but listed {len(coords) // 2}"
            )
        swept = tuple((coords[2 * i], coords[2 * i + 1]) for i in range(k))
        try:
            prims.append(MotionPrimitive(pid, sh, dx, dy, eh, arc, swept))
        except ValueError as exc:
            raise LibraryFormatError(f"{path}:{lineno}: {exc}") from exc
    return PrimitiveLibrary(tuple(prims), nominal_speed=nominal_speed)


def shared_default_library(resolution: float = 1.0) -> PrimitiveLibrary:
    """Process-wide cached default library for a given resolution."""
    key = hash(resolution)
    lib = _LIB_CACHE.get(key)
    if lib is None or lib.resolution != resolution:
        lib = default_library(resolution)
        _LIB_CACHE[key] = lib
    return lib


def euclid_cells(a: tuple[int, int], b: tuple[int, int]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])
