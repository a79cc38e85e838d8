"""Sequential per-cell class tracking with the Dirichlet-Categorical model.

A pluggable one-step classifier turns each detection into a crude label
l in [1, L]; the label conjugately increments the detected cell's
Dirichlet parameters, and the cell's predictive class distribution is
alpha / alpha_0 in closed form.

One detection can cover several cells (a bin may hold more than one cell
center); all of them ingest the same label, which correlates their class
states. Labels are 1-based in every public surface; columns are 0-based
internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import GridGeometry

NO_TARGET_BEHAVIORS = ("uniform", "skip")


@dataclass(frozen=True, eq=False)
class DirichletParams:
    """Parameters of one cell's Dirichlet class-probability belief."""

    alpha: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.alpha, dtype=float)
        if a.ndim != 1 or a.size < 1 or np.any(a <= 0):
            raise ValueError("alpha must be a positive vector")
        object.__setattr__(self, "alpha", a)

    @property
    def num_classes(self) -> int:
        return int(self.alpha.size)

    @property
    def alpha0(self) -> float:
        return float(self.alpha.sum())


def dcm_update(params: DirichletParams, label: int) -> DirichletParams:
    """Conjugate increment: alpha_l += 1 for the observed label."""
    if not (1 <= label <= params.num_classes):
        raise ValueError(f"label {label} out of range [1, {params.num_classes}]")
    a = params.alpha.copy()
    a[label - 1] += 1.0
    return DirichletParams(a)


def predictive(params: DirichletParams) -> np.ndarray:
    """Posterior predictive class distribution, alpha / alpha_0."""
    return params.alpha / params.alpha.sum()


@dataclass(eq=False)
class OneStepClassifierSpec:
    """Confusion-matrix label oracle standing in for a real classifier.

    confusion[true-1, emitted-1] = p(emit | true); rows must sum to 1.
    no_target_behavior decides what a false alarm on an empty cell emits:
    "uniform" draws any label uniformly, "skip" emits nothing.
    """

    confusion: np.ndarray
    no_target_behavior: str = "uniform"
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        c = np.asarray(self.confusion, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("confusion must be square")
        if np.any(c < 0) or np.any(np.abs(c.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("confusion rows must be nonnegative and sum to 1")
        if self.no_target_behavior not in NO_TARGET_BEHAVIORS:
            raise ValueError(f"unknown no_target_behavior {self.no_target_behavior!r}")
        self.confusion = c
        self._cum = np.cumsum(c, axis=1)

    @property
    def num_classes(self) -> int:
        return int(self.confusion.shape[0])


def diagonal_classifier(num_classes: int, accuracy: float = 0.8, no_target_behavior: str = "uniform") -> OneStepClassifierSpec:
    """Uniform-error confusion matrix with the given diagonal accuracy."""
    if num_classes == 1:
        return OneStepClassifierSpec(np.ones((1, 1)), no_target_behavior)
    off = (1.0 - accuracy) / (num_classes - 1)
    c = np.full((num_classes, num_classes), off)
    np.fill_diagonal(c, accuracy)
    return OneStepClassifierSpec(c, no_target_behavior)


def one_step_label(spec: OneStepClassifierSpec, true_class: int, rng: np.random.Generator) -> int:
    """Draw the emitted label from the confusion row of the true class."""
    if not (1 <= true_class <= spec.num_classes):
        raise ValueError(f"true class {true_class} out of range")
    u = rng.random()
    return int(np.searchsorted(spec._cum[true_class - 1], u, side="right")) + 1


def no_target_label(spec: OneStepClassifierSpec, rng: np.random.Generator) -> int | None:
    """Label emitted for a detection on an empty cell, or None to skip."""
    if spec.no_target_behavior == "skip":
        return None
    return int(rng.integers(1, spec.num_classes + 1))


@dataclass(eq=False)
class ClassificationMap:
    """Per-cell Dirichlet parameters, label counts, and predictive distributions."""

    geometry: GridGeometry
    num_classes: int
    alpha: np.ndarray  # (B, L)
    counts: np.ndarray  # (B, L) ingested label counts

    @property
    def predictive(self) -> np.ndarray:
        return self.alpha / self.alpha.sum(axis=1, keepdims=True)

    def cell_params(self, cell: int) -> DirichletParams:
        return DirichletParams(self.alpha[cell].copy())

    def ever_classified(self) -> np.ndarray:
        return self.counts.sum(axis=1) > 0

    def copy(self) -> "ClassificationMap":
        return ClassificationMap(self.geometry, self.num_classes, self.alpha.copy(), self.counts.copy())


def new_classification_map(geometry: GridGeometry, num_classes: int, prior: float = 1.0) -> ClassificationMap:
    return ClassificationMap(
        geometry=geometry,
        num_classes=num_classes,
        alpha=np.full((geometry.n_cells, num_classes), float(prior)),
        counts=np.zeros((geometry.n_cells, num_classes), dtype=np.int64),
    )


def _ingest_inplace(cmap: ClassificationMap, cell: int, label: int) -> None:
    cmap.alpha[cell, label - 1] += 1.0
    cmap.counts[cell, label - 1] += 1


def ingest(cmap: ClassificationMap, cell: int, label: int) -> ClassificationMap:
    """Apply one label to one cell; returns a new map, inputs untouched."""
    if not (0 <= cell < cmap.geometry.n_cells):
        raise IndexError(f"cell {cell} outside grid")
    if not (1 <= label <= cmap.num_classes):
        raise ValueError(f"label {label} out of range [1, {cmap.num_classes}]")
    out = cmap.copy()
    _ingest_inplace(out, cell, label)
    return out


# --- serialization ----------------------------------------------------------


def save_classification_csv(cmap: ClassificationMap, directory: str | Path, prefix: str = "cm", header_extra: str = "") -> list[Path]:
    """One dense matrix per class predictive component plus an argmax matrix.

    The argmax matrix holds 1-based class labels for cells with at least
    one ingested label, 0 for never-classified cells.
    """
    directory = Path(directory)
    g = cmap.geometry
    head = (
        f"# n_rows={g.n_rows} n_cols={g.n_cols} cell_size={g.cell_size} "
        f"origin={g.origin[0]},{g.origin[1]}"
    )
    if header_extra:
        head += " " + header_extra
    paths = []
    pred = cmap.predictive
    for l in range(cmap.num_classes):
        mat = pred[:, l].reshape(g.n_rows, g.n_cols)
        path = directory / f"{prefix}_class{l + 1}.csv"
        lines = [head] + [",".join(f"{v:.10g}" for v in row) for row in mat]
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    argmax = np.where(cmap.ever_classified(), pred.argmax(axis=1) + 1, 0)
    mat = argmax.reshape(g.n_rows, g.n_cols)
    path = directory / f"{prefix}_argmax.csv"
    lines = [head] + [",".join(str(int(v)) for v in row) for row in mat]
    path.write_text("\n".join(lines) + "\n")
    paths.append(path)
    return paths
