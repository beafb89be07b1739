"""Deterministic generation of synthetic print-job corpora.

Stands in for a slicer. Each specimen is a layered toolpath for a flat
polygonal footprint: a one-loop skirt on the first layer, a tessellated
perimeter every layer, and straight-line infill whose direction cycles per
layer in the bed frame. Because infill directions stay fixed while the part
rotates, command counts vary smoothly with the rotation angle, which is what
gives a rotation sweep its spread of related-but-distinct files.

Determinism: a dataset is fully determined by (spec, count, angular_step,
seed). The only randomness is a per-layer phase jitter for the infill grid,
drawn from a ``random.Random`` seeded per file.

Every E token is written with exactly 5 decimal places, X/Y/Z with 3.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from .gcode import GcodeDocument, parse_document, serialize

__all__ = [
    "DegenerateGeometryError",
    "SpecimenSpec",
    "ManifestEntry",
    "DatasetManifest",
    "preset_spec",
    "build_specimen",
    "generate_dataset",
    "GENERATOR_VERSION",
]

GENERATOR_VERSION = "0.1.0"

TRAVEL_FEED = 9000
PRINT_FEED = 1800

# 1.75 mm filament: E values are millimetres of filament, so flow is
# (extruded track cross-section) / (filament cross-section).
_FILAMENT_AREA = math.pi * 1.75 * 1.75 / 4.0


class DegenerateGeometryError(ValueError):
    """The spec describes a footprint or stack that cannot be printed."""


@dataclass(frozen=True)
class SpecimenSpec:
    """Geometry and process parameters for one part.

    ``footprint`` is a simple polygon in the model frame, roughly centred on
    the origin; it is rotated about the origin and then placed at
    ``bed_center``. ``infill_directions`` are bed-frame angles in degrees,
    cycled layer by layer. ``perimeter_segment_length`` is the tessellation
    pitch for perimeter edges (real slicers emit tessellated outlines, and a
    finely split perimeter keeps the per-file command total dominated by a
    rotation-invariant term).
    """

    name: str
    footprint: tuple[tuple[float, float], ...]
    height: float
    layer_height: float
    infill_line_distance: float
    infill_directions: tuple[float, ...] = (45.0, -45.0)
    nozzle_width: float = 0.4
    perimeter_segment_length: float = 1.6
    skirt_margin: float = 3.0
    bed_center: tuple[float, float] = (110.0, 110.0)

    @property
    def layer_count(self) -> int:
        return int(round(self.height / self.layer_height))

    def validate(self) -> None:
        if len(self.footprint) < 3:
            raise DegenerateGeometryError(f"{self.name}: footprint needs >= 3 vertices")
        if self.height <= 0 or self.layer_height <= 0 or self.layer_count < 1:
            raise DegenerateGeometryError(f"{self.name}: non-positive layer stack")
        if self.infill_line_distance <= 0 or self.nozzle_width <= 0:
            raise DegenerateGeometryError(f"{self.name}: non-positive line widths")
        if self.perimeter_segment_length <= 0:
            raise DegenerateGeometryError(f"{self.name}: non-positive tessellation pitch")
        if not self.infill_directions:
            raise DegenerateGeometryError(f"{self.name}: no infill directions")
        area = _polygon_area(self.footprint)
        if area < self.nozzle_width * self.nozzle_width:
            raise DegenerateGeometryError(f"{self.name}: footprint area {area:.4g} too small")
        if not _polygon_is_simple(self.footprint):
            raise DegenerateGeometryError(f"{self.name}: footprint self-intersects")


def preset_spec(dataset_id: str) -> SpecimenSpec:
    """Built-in specimen for a dataset id.

    ``D1`` is a 100x20 mm rectangular bar with two alternating infill
    directions; ``D2`` is an L-bracket with three.
    """
    if dataset_id == "D1":
        return SpecimenSpec(
            name="bar100x20",
            footprint=((-50.0, -10.0), (50.0, -10.0), (50.0, 10.0), (-50.0, 10.0)),
            height=4.0,
            layer_height=0.2,
            infill_line_distance=2.0,
            infill_directions=(45.0, -45.0),
        )
    if dataset_id == "D2":
        return SpecimenSpec(
            name="lbracket60",
            footprint=(
                (-30.0, -30.0),
                (30.0, -30.0),
                (30.0, -5.0),
                (-5.0, -5.0),
                (-5.0, 30.0),
                (-30.0, 30.0),
            ),
            height=6.0,
            layer_height=0.2,
            infill_line_distance=2.0,
            infill_directions=(45.0, -45.0, 30.0),
            perimeter_segment_length=1.9,
        )
    raise ValueError(f"unknown preset dataset id: {dataset_id!r}")


def _polygon_area(poly: tuple[tuple[float, float], ...]) -> float:
    total = 0.0
    for (x0, y0), (x1, y1) in zip(poly, poly[1:] + poly[:1]):
        total += x0 * y1 - x1 * y0
    return abs(total) / 2.0


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segments_cross(p0, p1, q0, q1) -> bool:
    d1 = _orient(*q0, *q1, *p0)
    d2 = _orient(*q0, *q1, *p1)
    d3 = _orient(*p0, *p1, *q0)
    d4 = _orient(*p0, *p1, *q1)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    return False


def _polygon_is_simple(poly: tuple[tuple[float, float], ...]) -> bool:
    m = len(poly)
    edges = [(poly[i], poly[(i + 1) % m]) for i in range(m)]
    for i in range(m):
        for j in range(i + 1, m):
            # Adjacent edges share a vertex; only proper crossings count.
            if j == i + 1 or (i == 0 and j == m - 1):
                continue
            if _segments_cross(*edges[i], *edges[j]):
                return False
    return True


def _rotate_xy(x: float, y: float, angle_deg: float) -> tuple[float, float]:
    # Quarter turns are exact so that symmetry comparisons (0 vs 180 degrees)
    # are not at the mercy of cos/sin rounding.
    a = angle_deg % 360.0
    if a == 0.0:
        return (x, y)
    if a == 90.0:
        return (-y, x)
    if a == 180.0:
        return (-x, -y)
    if a == 270.0:
        return (y, -x)
    r = math.radians(a)
    c, s = math.cos(r), math.sin(r)
    return (x * c - y * s, x * s + y * c)


def _placed_footprint(spec: SpecimenSpec, angle_deg: float) -> list[tuple[float, float]]:
    cx, cy = spec.bed_center
    out = []
    for x, y in spec.footprint:
        rx, ry = _rotate_xy(x, y, angle_deg)
        out.append((rx + cx, ry + cy))
    return out


def _tessellate_loop(
    poly: list[tuple[float, float]], pitch: float
) -> list[tuple[float, float]]:
    """All waypoints along the closed outline, excluding the start point."""
    points: list[tuple[float, float]] = []
    m = len(poly)
    for i in range(m):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % m]
        length = math.hypot(bx - ax, by - ay)
        pieces = max(1, math.ceil(length / pitch))
        for k in range(1, pieces + 1):
            s = k / pieces
            points.append((ax + s * (bx - ax), ay + s * (by - ay)))
    return points


def _infill_segments(
    poly: list[tuple[float, float]],
    direction_deg: float,
    spacing: float,
    jitter: float,
) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    """Clip a family of parallel lines to the polygon (even-odd rule).

    The family is anchored at the centre of the polygon's projection onto the
    line normal, offset by ``jitter``; anchoring at the centre keeps the line
    count invariant under point reflection of the polygon.
    """
    r = math.radians(direction_deg)
    ux, uy = math.cos(r), math.sin(r)
    nx, ny = -uy, ux
    proj = [px * nx + py * ny for px, py in poly]
    lo, hi = min(proj), max(proj)
    cmid = (lo + hi) / 2.0
    half = (hi - lo) / 2.0

    kmin = math.ceil((-half - jitter) / spacing)
    kmax = math.floor((half - jitter) / spacing)
    segments = []
    m = len(poly)
    for k in range(kmin, kmax + 1):
        c = cmid + jitter + k * spacing
        ts: list[tuple[float, float, float]] = []
        for i in range(m):
            da = proj[i] - c
            db = proj[(i + 1) % m] - c
            if (da >= 0.0) != (db >= 0.0):
                s = da / (da - db)
                ax, ay = poly[i]
                bx, by = poly[(i + 1) % m]
                px, py = ax + s * (bx - ax), ay + s * (by - ay)
                ts.append((px * ux + py * uy, px, py))
        ts.sort(key=lambda item: item[0])
        if len(ts) % 2:
            ts.pop()
        row = []
        for a, b in zip(ts[0::2], ts[1::2]):
            if b[0] - a[0] > 1e-9:
                row.append(((a[1], a[2]), (b[1], b[2])))
        # Serpentine order: alternate rows run in opposite directions to keep
        # travels short.
        if k % 2:
            row = [(q, p) for p, q in reversed(row)]
        segments.extend(row)
    return segments


def build_specimen(spec: SpecimenSpec, angle_deg: float, seed: int) -> GcodeDocument:
    """Emit the toolpath for ``spec`` rotated by ``angle_deg`` about its centre.

    The result is parsed from the emitted text, so every generated document
    is valid by construction and serializes back to exactly the bytes that
    ``generate_dataset`` writes to disk.
    """
    spec.validate()
    if not math.isfinite(angle_deg):
        raise ValueError(f"angle must be finite, got {angle_deg!r}")
    rng = random.Random(seed)
    poly = _placed_footprint(spec, angle_deg)
    flow = spec.nozzle_width * spec.layer_height / _FILAMENT_AREA

    out: list[str] = [
        f";generated by gcodeguard v{GENERATOR_VERSION}",
        f";specimen:{spec.name}",
        "M140 S60",
        "M104 S200",
        "M105",
        "G28",
        "M82",
        "G92 E0.00000",
        "M106 S85",
    ]
    e = 0.0
    x = y = 0.0

    def travel(px: float, py: float, z: float | None = None, feed: int | None = None) -> None:
        nonlocal x, y
        words = ["G0"]
        if feed is not None:
            words.append(f"F{feed}")
        words.append(f"X{px:.3f}")
        words.append(f"Y{py:.3f}")
        if z is not None:
            words.append(f"Z{z:.3f}")
        out.append(" ".join(words))
        x, y = px, py

    def extrude(px: float, py: float, feed: int | None = None) -> None:
        nonlocal x, y, e
        e += math.hypot(px - x, py - y) * flow
        words = ["G1"]
        if feed is not None:
            words.append(f"F{feed}")
        words.append(f"X{px:.3f}")
        words.append(f"Y{py:.3f}")
        words.append(f"E{e:.5f}")
        out.append(" ".join(words))
        x, y = px, py

    perimeter = _tessellate_loop(poly, spec.perimeter_segment_length)
    start = poly[0]
    direction_count = len(spec.infill_directions)

    for layer in range(spec.layer_count):
        # The jitter draw happens every layer, before any geometry, so the
        # random stream consumed for layer i does not depend on the angle.
        jitter = rng.uniform(0.0, spec.infill_line_distance)
        z = (layer + 1) * spec.layer_height
        out.append(f";LAYER:{layer}")
        if layer == 0:
            xs = [p[0] for p in poly]
            ys = [p[1] for p in poly]
            m = spec.skirt_margin
            skirt = [
                (min(xs) - m, min(ys) - m),
                (max(xs) + m, min(ys) - m),
                (max(xs) + m, max(ys) + m),
                (min(xs) - m, max(ys) + m),
            ]
            travel(*skirt[0], z=z, feed=TRAVEL_FEED)
            for corner in skirt[1:] + skirt[:1]:
                extrude(*corner, feed=PRINT_FEED if corner is skirt[1] else None)
            travel(*start)
            first_feed = None
        else:
            travel(*start, z=z, feed=TRAVEL_FEED)
            first_feed = PRINT_FEED
        for point in perimeter:
            extrude(*point, feed=first_feed)
            first_feed = None
        direction = spec.infill_directions[layer % direction_count]
        for (p, q) in _infill_segments(poly, direction, spec.infill_line_distance, jitter):
            travel(*p)
            extrude(*q)

    out.extend(["M107", "M140 S0", "M104 S0", "M84"])
    return parse_document("\n".join(out) + "\n")


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    angle_deg: float
    seed: int


@dataclass(frozen=True)
class DatasetManifest:
    """Index of one generated dataset; paths are relative to the manifest."""

    dataset_id: str
    generator_version: str
    entries: tuple[ManifestEntry, ...]

    def to_json_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "generator_version": self.generator_version,
            "entries": [
                {"path": en.path, "angle_deg": en.angle_deg, "seed": en.seed}
                for en in self.entries
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n"
        )

    @staticmethod
    def load(path: str | Path) -> "DatasetManifest":
        data = json.loads(Path(path).read_text())
        return DatasetManifest(
            dataset_id=data["dataset_id"],
            generator_version=data["generator_version"],
            entries=tuple(
                ManifestEntry(en["path"], float(en["angle_deg"]), int(en["seed"]))
                for en in data["entries"]
            ),
        )


def generate_dataset(
    spec: SpecimenSpec,
    count: int,
    angular_step: float,
    out_dir: str | Path,
    seed: int,
    dataset_id: str,
) -> DatasetManifest:
    """Write ``count`` files at angles ``0, step, 2*step, ...`` plus a manifest.

    Angles are recorded unwrapped (they may exceed 360 when count * step
    does) so every entry keeps a unique angle; rotation itself is modulo 360.
    Per-file seeds derive from ``seed`` through one ``random.Random`` stream,
    so a dataset is reproducible from the manifest alone.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if angular_step <= 0:
        raise ValueError(f"angular_step must be > 0, got {angular_step}")
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    entries = []
    for i in range(count):
        angle = i * angular_step
        file_seed = rng.randrange(2**32)
        name = f"{spec.name}_{i:04d}.gcode"
        doc = build_specimen(spec, angle, file_seed)
        (out_path / name).write_bytes(serialize(doc))
        entries.append(ManifestEntry(path=name, angle_deg=angle, seed=file_seed))
    manifest = DatasetManifest(
        dataset_id=dataset_id,
        generator_version=GENERATOR_VERSION,
        entries=tuple(entries),
    )
    manifest.save(out_path / "manifest.json")
    return manifest
