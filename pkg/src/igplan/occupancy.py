"""Bayesian occupancy-grid estimation.

Two engines share the binary-asymmetric-channel sensor model:

* an exact joint posterior over all 2^B maps, tractable only for tiny
  grids (capped at B_EXACT_MAX cells) and used as a test oracle;
* a factorized per-cell recursive update, exact when every bin touches at
  most one cell and otherwise an independence approximation, used for
  production-size grids.

Yesterday's posterior is today's prior; fresh grids start at p = 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import GridGeometry
from .sensor import DetectorParams, Measurement, transition_probs

B_EXACT_MAX = 16


@dataclass(eq=False)
class OccupancyGrid:
    """Per-cell marginal posterior probabilities of occupancy."""

    geometry: GridGeometry
    p: np.ndarray
    seen: np.ndarray

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.geometry, self.p.copy(), self.seen.copy())


def new_grid(geometry: GridGeometry, prior: float = 0.5) -> OccupancyGrid:
    return OccupancyGrid(
        geometry=geometry,
        p=np.full(geometry.n_cells, float(prior)),
        seen=np.zeros(geometry.n_cells, dtype=bool),
    )


@dataclass(eq=False)
class BacModel:
    """Per (bin, cell) channel probabilities for one measurement's association.

    Arrays align with ``view.cells``: p00 = p(no fire | empty),
    p01 = p(no fire | occupied). ``p_fa`` is the pure false-alarm rate of
    bins with no associated cells.
    """

    p_fa: float
    p00: np.ndarray
    p01: np.ndarray

    def bin_slice(self, view, k: int) -> slice:
        """Slice into the aligned arrays for bin k's cells."""
        start = sum(len(c) for c in view.bin_cells[: k - 1])
        return slice(start, start + len(view.bin_cells[k - 1]))


def bac_from_view(view, params: DetectorParams) -> BacModel:
    p00, p01 = transition_probs(params, view.cell_dist)
    return BacModel(p_fa=params.p_fa, p00=np.asarray(p00), p01=np.asarray(p01))


def bin_likelihood(model: BacModel, view, k: int, bits, j: int) -> float:
    """p(j_k = j | occupancy bits of bin k's cells).

    ``bits`` aligns with ``view.bin_cells[k-1]``. A bin with no cells is a
    pure false-alarm channel: p(j=1) = p_fa.
    """
    cells = view.bin_cells[k - 1]
    if len(cells) == 0:
        p0 = 1.0 - model.p_fa
    else:
        sl = model.bin_slice(view, k)
        b = np.asarray(bits, dtype=float)
        if b.shape != (len(cells),):
            raise ValueError("bits must align with the bin's cells")
        p0 = float(np.prod(model.p00[sl] * (1.0 - b) + model.p01[sl] * b))
    return p0 if j == 0 else 1.0 - p0


@dataclass(eq=False)
class MapPosterior:
    """Explicit posterior over all 2^B maps; map m occupies cell i iff bit i of m."""

    geometry: GridGeometry
    table: np.ndarray

    def copy(self) -> "MapPosterior":
        return MapPosterior(self.geometry, self.table.copy())


def uniform_map_posterior(geometry: GridGeometry) -> MapPosterior:
    b = geometry.n_cells
    if b > B_EXACT_MAX:
        raise ValueError(f"exact engine capped at {B_EXACT_MAX} cells, got {b}")
    n = 1 << b
    return MapPosterior(geometry, np.full(n, 1.0 / n))


def _map_bits(n_cells: int) -> np.ndarray:
    """(2^B, B) bit matrix of all maps."""
    m = np.arange(1 << n_cells, dtype=np.uint32)
    return ((m[:, None] >> np.arange(n_cells)) & 1).astype(float)


def exact_update(post: MapPosterior, meas: Measurement, model: BacModel) -> MapPosterior:
    """Multiply every map's probability by the full sensor likelihood, renormalize."""
    b = post.geometry.n_cells
    if b > B_EXACT_MAX:
        raise ValueError(f"exact engine capped at {B_EXACT_MAX} cells, got {b}")
    bits = _map_bits(b)
    like = np.ones(1 << b)
    view = meas.view
    for k0, cells in enumerate(view.bin_cells):
        j = int(meas.bins[k0])
        if len(cells) == 0:
            like *= (1.0 - model.p_fa) if j == 0 else model.p_fa
            continue
        sl = model.bin_slice(view, k0 + 1)
        occ = bits[:, list(cells)]
        p0 = np.prod(model.p00[sl] * (1.0 - occ) + model.p01[sl] * occ, axis=1)
        like *= p0 if j == 0 else 1.0 - p0
    table = post.table * like
    z = table.sum()
    if z <= 0:
        raise ValueError("measurement has zero likelihood under every map")
    return MapPosterior(post.geometry, table / z)


def exact_marginal(post: MapPosterior, cell: int) -> float:
    """p(cell occupied) = sum of the table over maps with that bit set."""
    b = post.geometry.n_cells
    if not (0 <= cell < b):
        raise IndexError(f"cell {cell} outside grid")
    m = np.arange(1 << b)
    return float(post.table[(m >> cell) & 1 == 1].sum())


def _factored_update_inplace(grid: OccupancyGrid, meas: Measurement, model: BacModel) -> None:
    view = meas.view
    cells = view.cells
    if cells.size:
        j = meas.bins[view.cell_bin - 1].astype(bool)
        p1 = np.where(j, 1.0 - model.p01, model.p01)  # p(j | occupied)
        p0 = np.where(j, 1.0 - model.p00, model.p00)  # p(j | empty)
        prior = grid.p[cells]
        num = p1 * prior
        den = num + p0 * (1.0 - prior)
        # den = 0 only when the observation is impossible under both
        # hypotheses; keep the prior there rather than dividing by zero.
        grid.p[cells] = np.where(den > 0, num / np.where(den > 0, den, 1.0), prior)
        grid.seen[cells] = True


def factored_update(grid: OccupancyGrid, meas: Measurement, model: BacModel) -> OccupancyGrid:
    """Per-cell Bayes update under the independence approximation.

    Every cell associated with bin k is updated against the bin's outcome
    through its own channel at its own sample distance; unobserved cells
    are untouched; seen flags are set for the whole observed set.
    """
    out = grid.copy()
    _factored_update_inplace(out, meas, model)
    return out


# --- serialization ----------------------------------------------------------


def save_grid_csv(grid: OccupancyGrid, path: str | Path, header_extra: str = "") -> None:
    """Dense probability matrix, row-major, one geometry header line."""
    g = grid.geometry
    head = (
        f"# n_rows={g.n_rows} n_cols={g.n_cols} cell_size={g.cell_size} "
        f"origin={g.origin[0]},{g.origin[1]}"
    )
    if header_extra:
        head += " " + header_extra
    mat = grid.p.reshape(g.n_rows, g.n_cols)
    lines = [head] + [",".join(f"{v:.10g}" for v in row) for row in mat]
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix_csv(path: str | Path) -> tuple[np.ndarray, str]:
    """Read a dense CSV written by save_grid_csv-style writers."""
    text = Path(path).read_text().strip().splitlines()
    header = text[0] if text and text[0].startswith("#") else ""
    rows = [r for r in text if not r.startswith("#")]
    return np.array([[float(v) for v in r.split(",")] for r in rows]), header
