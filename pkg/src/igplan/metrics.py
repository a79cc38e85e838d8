"""Evaluation metrics: distribution-set similarity, summed Jensen-Shannon
divergence, and coverage fraction.

Truth and estimate are compared as (B, m) matrices, one per-cell
distribution per row. Occupancy rows are (p_occupied, p_empty); class
truth rows are one-hot for target cells and uniform for empty cells, so a
never-classified empty cell contributes nothing to the class SJSD.
All logs are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

from .classify import ClassificationMap
from .grid import Scene
from .occupancy import OccupancyGrid

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DistributionSet:
    """Per-cell probability rows with a declared role ("truth" or "estimate")."""

    rows: np.ndarray
    role: str = "estimate"

    def __post_init__(self) -> None:
        r = np.asarray(self.rows, dtype=float)
        if r.ndim != 2:
            raise ValueError("rows must be a (n_cells, n_outcomes) matrix")
        if np.any(np.abs(r.sum(axis=1) - 1.0) > ROW_SUM_TOL) or np.any(r < -ROW_SUM_TOL):
            raise ValueError("every row must be a probability vector")
        if self.role == "truth":
            # truth rows are deltas; empty cells carry the uniform row
            delta = np.isin(r, (0.0, 1.0)).all(axis=1)
            uniform = np.abs(r - 1.0 / r.shape[1]).max(axis=1) <= ROW_SUM_TOL
            if not np.all(delta | uniform):
                raise ValueError("truth rows must be delta or uniform")
        object.__setattr__(self, "rows", r)


@dataclass(frozen=True)
class MetricsRow:
    step: int
    pct_seen: float
    rho_det: float
    rho_class: float
    sjsd_det: float
    sjsd_class: float

    FIELDS = ("step", "pct_seen", "rho_det", "rho_class", "sjsd_det", "sjsd_class")

    def as_csv(self) -> str:
        return (
            f"{self.step},{self.pct_seen:.10g},{self.rho_det:.10g},"
            f"{self.rho_class:.10g},{self.sjsd_det:.10g},{self.sjsd_class:.10g}"
        )


def _rows(x) -> np.ndarray:
    return x.rows if isinstance(x, DistributionSet) else np.asarray(x, dtype=float)


def rho(t, e) -> float:
    """Cosine similarity of the stacked distribution matrices.

    <t, e>_F / sqrt(||t||_F^2 ||e||_F^2); equals 1 exactly when t == e.
    The literal squared-norm denominator from the source text is kept in
    rho_literal for comparison.
    """
    tm, em = _rows(t), _rows(e)
    if tm.shape != em.shape:
        raise ValueError("distribution sets must have matching shapes")
    nt = float(np.sum(tm * tm))
    ne = float(np.sum(em * em))
    if nt == 0.0 or ne == 0.0:
        raise ValueError("zero-norm distribution set")
    return float(np.sum(tm * em)) / math.sqrt(nt * ne)


def rho_literal(t, e) -> float:
    """<t, e>_F / (||t||_F^2 ||e||_F^2), as printed; rho_literal(t, t) != 1."""
    tm, em = _rows(t), _rows(e)
    nt = float(np.sum(tm * tm))
    ne = float(np.sum(em * em))
    if nt == 0.0 or ne == 0.0:
        raise ValueError("zero-norm distribution set")
    return float(np.sum(tm * em)) / (nt * ne)


def sjsd(t, e) -> float:
    """Sum over cells of the Jensen-Shannon divergence between row pairs.

    0.5 KL(t_i || m_i) + 0.5 KL(e_i || m_i) with m_i the row midpoint;
    zero-probability conventions handled as limits. Bounded by B log 2.
    """
    tm, em = _rows(t), _rows(e)
    if tm.shape != em.shape:
        raise ValueError("distribution sets must have matching shapes")
    m = 0.5 * (tm + em)
    return float(0.5 * rel_entr(tm, m).sum() + 0.5 * rel_entr(em, m).sum())


def pct_seen(grid: OccupancyGrid) -> float:
    """Fraction of cells ever inside the sensor footprint."""
    return float(grid.seen.mean())


# --- distribution-set builders ----------------------------------------------


def truth_occupancy_set(scene: Scene) -> DistributionSet:
    b = scene.occupancy_vector().astype(float)
    return DistributionSet(np.column_stack([b, 1.0 - b]), role="truth")


def estimate_occupancy_set(grid: OccupancyGrid) -> DistributionSet:
    return DistributionSet(np.column_stack([grid.p, 1.0 - grid.p]), role="estimate")


def truth_class_set(scene: Scene) -> DistributionSet:
    n_classes = scene.num_classes
    rows = np.full((scene.geometry.n_cells, n_classes), 1.0 / n_classes)
    for cell, cls in scene.class_of.items():
        rows[cell] = 0.0
        rows[cell, cls - 1] = 1.0
    return DistributionSet(rows, role="truth")


def estimate_class_set(cmap: ClassificationMap) -> DistributionSet:
    return DistributionSet(cmap.predictive, role="estimate")


def metrics_row(step: int, scene: Scene, grid: OccupancyGrid, cmap: ClassificationMap) -> MetricsRow:
    t_det = truth_occupancy_set(scene)
    e_det = estimate_occupancy_set(grid)
    t_cls = truth_class_set(scene)
    e_cls = estimate_class_set(cmap)
    return MetricsRow(
        step=step,
        pct_seen=pct_seen(grid),
        rho_det=rho(t_det, e_det),
        rho_class=rho(t_cls, e_cls),
        sjsd_det=sjsd(t_det, e_det),
        sjsd_class=sjsd(t_cls, e_cls),
    )
