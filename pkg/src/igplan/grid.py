"""Grid geometry, ground-truth scenes, poses, and the sensor footprint.

Everything downstream (sensor simulation, occupancy updates, information
gain) works through the bin-to-cell association computed here: each sensing
pose owns a fan of annular-sector range bins on the starboard side of the
heading, and a cell belongs to a bin iff its center lies inside that
sector. Cells straddling a sector edge are decided by center point alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [0, 2*pi)."""
    return theta % TWO_PI


def angle_diff(a: float, b: float) -> float:
    """Signed smallest difference a - b, wrapped to [-pi, pi)."""
    return (a - b + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class GridGeometry:
    """Rectangular grid of square cells, row-major 0-based indexing."""

    n_rows: int
    n_cols: int
    cell_size: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("grid must have at least one row and column")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def width(self) -> float:
        return self.n_cols * self.cell_size

    @property
    def height(self) -> float:
        return self.n_rows * self.cell_size

    def cell_index(self, row: int, col: int) -> int:
        if not (0 <= row < self.n_rows and 0 <= col < self.n_cols):
            raise IndexError(f"cell ({row}, {col}) outside grid")
        return row * self.n_cols + col

    def cell_rowcol(self, index: int) -> tuple[int, int]:
        if not (0 <= index < self.n_cells):
            raise IndexError(f"cell index {index} outside grid")
        return divmod(index, self.n_cols)[0], index % self.n_cols

    def cell_center(self, index: int) -> tuple[float, float]:
        row, col = self.cell_rowcol(index)
        x0, y0 = self.origin
        return (x0 + (col + 0.5) * self.cell_size, y0 + (row + 0.5) * self.cell_size)

    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the field rectangle."""
        x0, y0 = self.origin
        return (x0, y0, x0 + self.width, y0 + self.height)


@lru_cache(maxsize=64)
def cell_centers(geometry: GridGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Arrays (xs, ys) of all cell centers, indexed by cell index."""
    x0, y0 = geometry.origin
    cols = np.arange(geometry.n_cols)
    rows = np.arange(geometry.n_rows)
    xs = x0 + (cols + 0.5) * geometry.cell_size
    ys = y0 + (rows + 0.5) * geometry.cell_size
    gx, gy = np.meshgrid(xs, ys)  # row-major: index = row*n_cols + col
    return gx.ravel(), gy.ravel()


@dataclass(frozen=True)
class Pose:
    """Planar sensor pose; heading 0 points +x, pi/2 points +y."""

    x: float
    y: float
    heading: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", wrap_angle(self.heading))


def starboard_bearing(pose: Pose) -> float:
    """Bearing of the starboard-looking sensor axis."""
    return wrap_angle(pose.heading - math.pi / 2.0)


@dataclass(frozen=True)
class SensorFootprint:
    """Fan of annular-sector range bins on the starboard side.

    Bin k (1-based, k in [1, n_bins]) covers ranges ((k-1)*bin_spacing,
    k*bin_spacing] within +-beamwidth/2 of the starboard axis.
    """

    n_bins: int = 12
    bin_spacing: float = 1.0
    max_range: float = 12.0
    beamwidth: float = math.radians(7.0)
    side: str = "starboard"

    def __post_init__(self) -> None:
        if self.n_bins < 1 or self.bin_spacing <= 0:
            raise ValueError("need n_bins >= 1 and positive bin_spacing")
        if self.n_bins * self.bin_spacing > self.max_range * (1 + 1e-9):
            raise ValueError("bins extend beyond max_range")
        if self.beamwidth <= 0:
            raise ValueError("beamwidth must be positive")
        if self.side != "starboard":
            raise ValueError("only starboard-looking sensors are supported")

    @property
    def swath(self) -> float:
        return self.n_bins * self.bin_spacing


@dataclass(frozen=True)
class Scene:
    """Ground truth: which cells hold a target and each target's class."""

    geometry: GridGeometry
    occupied: frozenset[int]
    class_of: Mapping[int, int]
    num_classes: int

    def __post_init__(self) -> None:
        if self.num_classes < 1:
            raise ValueError("need at least one class")
        if set(self.class_of) != set(self.occupied):
            raise ValueError("class_of keys must be exactly the occupied cells")
        for cell, cls in self.class_of.items():
            if not (0 <= cell < self.geometry.n_cells):
                raise ValueError(f"occupied cell {cell} outside grid")
            if not (1 <= cls <= self.num_classes):
                raise ValueError(f"class {cls} of cell {cell} out of range")

    def occupancy_vector(self) -> np.ndarray:
        b = np.zeros(self.geometry.n_cells, dtype=bool)
        b[list(self.occupied)] = True
        return b


def bin_sample_point(pose: Pose, footprint: SensorFootprint, k: int) -> tuple[float, float]:
    """Representative point of bin k: sector midpoint at range (k - 1/2) * spacing."""
    if not (1 <= k <= footprint.n_bins):
        raise ValueError(f"bin {k} out of range")
    r = (k - 0.5) * footprint.bin_spacing
    b = starboard_bearing(pose)
    return (pose.x + r * math.cos(b), pose.y + r * math.sin(b))


def dist(geometry: GridGeometry, cell: int, pose: Pose, footprint: SensorFootprint, k: int) -> float:
    """Euclidean distance between a cell center and bin k's sample point."""
    cx, cy = geometry.cell_center(cell)
    sx, sy = bin_sample_point(pose, footprint, k)
    return math.hypot(cx - sx, cy - sy)


def _bin_of_cells(geometry: GridGeometry, pose: Pose, footprint: SensorFootprint) -> np.ndarray:
    """Per-cell bin index in [1, n_bins], or 0 for cells outside the footprint."""
    xs, ys = cell_centers(geometry)
    dx = xs - pose.x
    dy = ys - pose.y
    r = np.hypot(dx, dy)
    bearing = starboard_bearing(pose)
    dev = np.abs((np.arctan2(dy, dx) - bearing + math.pi) % TWO_PI - math.pi)
    k = np.ceil(r / footprint.bin_spacing).astype(np.int64)
    inside = (dev <= footprint.beamwidth / 2.0) & (r > 0) & (k >= 1) & (k <= footprint.n_bins)
    return np.where(inside, k, 0)


def cells_in_bin(geometry: GridGeometry, pose: Pose, footprint: SensorFootprint, k: int) -> frozenset[int]:
    """Cells whose centers fall inside bin k's annular sector (may be empty)."""
    if not (1 <= k <= footprint.n_bins):
        raise ValueError(f"bin {k} out of range")
    return frozenset(sense(geometry, pose, footprint).bin_cells[k - 1])


def observed_cells(geometry: GridGeometry, pose: Pose, footprint: SensorFootprint) -> frozenset[int]:
    """The observed set: union of all bins' cells at this pose."""
    return frozenset(sense(geometry, pose, footprint).cells.tolist())


@dataclass(frozen=True, eq=False)
class SensorView:
    """Bin-to-cell association of one pose, with per-cell sample distances.

    ``cells`` is sorted by (bin, cell index); ``cell_bin`` and ``cell_dist``
    align with it. Bins partition the footprint, so a cell appears at most
    once.
    """

    pose: Pose
    footprint: SensorFootprint
    bin_cells: tuple[tuple[int, ...], ...]
    cells: np.ndarray
    cell_bin: np.ndarray
    cell_dist: np.ndarray

    @property
    def n_cells(self) -> int:
        return int(self.cells.size)

    @staticmethod
    def synthetic(cells: Iterable[int], dists: Iterable[float] | float = 0.0) -> "SensorView":
        """Single-bin stand-in view for tests and the oracle CLI."""
        cs = np.asarray(sorted(cells), dtype=np.int64)
        if np.isscalar(dists):
            ds = np.full(cs.shape, float(dists))
        else:
            ds = np.asarray(list(dists), dtype=float)
        fp = SensorFootprint(n_bins=1, bin_spacing=1.0, max_range=1.0)
        return SensorView(
            pose=Pose(0.0, 0.0, 0.0),
            footprint=fp,
            bin_cells=(tuple(cs.tolist()),),
            cells=cs,
            cell_bin=np.ones(cs.shape, dtype=np.int64),
            cell_dist=ds,
        )


@lru_cache(maxsize=16384)
def sense(geometry: GridGeometry, pose: Pose, footprint: SensorFootprint) -> SensorView:
    """Compute (and cache) the full bin-to-cell association for one pose."""
    binidx = _bin_of_cells(geometry, pose, footprint)
    hit = np.nonzero(binidx)[0]
    k = binidx[hit]
    order = np.lexsort((hit, k))
    hit = hit[order]
    k = k[order]
    bin_cells: list[tuple[int, ...]] = []
    for kk in range(1, footprint.n_bins + 1):
        bin_cells.append(tuple(hit[k == kk].tolist()))
    xs, ys = cell_centers(geometry)
    bearing = starboard_bearing(pose)
    sr = (k - 0.5) * footprint.bin_spacing
    sx = pose.x + sr * np.cos(bearing)
    sy = pose.y + sr * np.sin(bearing)
    d = np.hypot(xs[hit] - sx, ys[hit] - sy)
    return SensorView(
        pose=pose,
        footprint=footprint,
        bin_cells=tuple(bin_cells),
        cells=hit,
        cell_bin=k,
        cell_dist=d,
    )


# --- scene file format ------------------------------------------------------
# JSON: {n_rows, n_cols, cell_size, num_classes,
#        objects: [{cells: [int, ...], class: int}, ...]}
# Cell entries are 0-based row-major indices.


def scene_to_dict(scene: Scene, objects: list[dict] | None = None) -> dict:
    if objects is None:
        by_class: dict[int, list[int]] = {}
        for cell, cls in sorted(scene.class_of.items()):
            by_class.setdefault(cls, []).append(cell)
        objects = [{"cells": cells, "class": cls} for cls, cells in sorted(by_class.items())]
    return {
        "n_rows": scene.geometry.n_rows,
        "n_cols": scene.geometry.n_cols,
        "cell_size": scene.geometry.cell_size,
        "num_classes": scene.num_classes,
        "objects": objects,
    }


def scene_from_dict(data: dict) -> Scene:
    geometry = GridGeometry(
        n_rows=int(data["n_rows"]),
        n_cols=int(data["n_cols"]),
        cell_size=float(data.get("cell_size", 1.0)),
    )
    class_of: dict[int, int] = {}
    for obj in data.get("objects", []):
        cls = int(obj["class"])
        for cell in obj["cells"]:
            if cell in class_of:
                raise ValueError(f"cell {cell} assigned to more than one object")
            class_of[int(cell)] = cls
    return Scene(
        geometry=geometry,
        occupied=frozenset(class_of),
        class_of=class_of,
        num_classes=int(data["num_classes"]),
    )


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n")


def load_scene(path: str | Path) -> Scene:
    return scene_from_dict(json.loads(Path(path).read_text()))
