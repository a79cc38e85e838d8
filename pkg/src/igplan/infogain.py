"""Information-gain cost functions for sensing-action selection.

Detection gain is the mutual information between a cell's occupancy state
and the binary bin measurement, assembled from the definitional joint
(prior entropy minus conditional entropy). Classification gain is the
mixed-pair mutual information between a cell's Dirichlet class-parameter
vector and the class label it generates, via Dirichlet differential
entropies. The total is a convex combination of both, each normalized by
its per-cell maximum over the observed set.

All entropies are in nats.

The source model's printed simplification of the detection conditional
entropy (the log[1 + x] forms) does not reduce to the definitional value;
it lives only in the ``*_printed`` comparison harness and is never used
for planning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.special import gammaln, psi, xlogy

from .classify import ClassificationMap, DirichletParams
from .grid import SensorView
from .occupancy import OccupancyGrid
from .sensor import DetectorParams, transition_probs

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class IgWeights:
    """Convex weights of the detection and classification terms."""

    w_d: float = 0.5
    w_c: float = 0.5
    schedule: str = "coverage_linked"

    def __post_init__(self) -> None:
        if self.w_d < 0 or self.w_c < 0 or abs(self.w_d + self.w_c - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.schedule not in ("fixed", "coverage_linked"):
            raise ValueError(f"unknown weight schedule {self.schedule!r}")

    def with_coverage(self, fraction_seen: float) -> "IgWeights":
        """Recomputed weights under the coverage-linked schedule."""
        if self.schedule != "coverage_linked":
            return self
        w_d = min(max(1.0 - fraction_seen, 0.0), 1.0)
        return IgWeights(w_d=w_d, w_c=1.0 - w_d, schedule=self.schedule)


@dataclass(frozen=True, eq=False)
class IgReport:
    """Per-action breakdown of the score."""

    ig_d: float
    ig_c: float
    ig_total: float
    n_cells: int
    per_cell_d: np.ndarray
    per_cell_c: np.ndarray


def _binary_entropy(q):
    return -(xlogy(q, q) + xlogy(1.0 - q, 1.0 - q))


def detection_mi(p, p_d, p_fa):
    """I(occupancy; bin measurement) from the definitional joint.

    Prior entropy of Bernoulli(p) minus the posterior entropy averaged
    over the two measurement outcomes of the (p_d, p_fa) channel.
    Vectorized; returns a scalar for scalar inputs.
    """
    p = np.asarray(p, dtype=float)
    p_d = np.asarray(p_d, dtype=float)
    p_fa = np.asarray(p_fa, dtype=float)
    h_prior = _binary_entropy(p)
    q1 = p * p_d + (1.0 - p) * p_fa  # p(j = 1)
    q0 = 1.0 - q1
    with np.errstate(divide="ignore", invalid="ignore"):
        post1 = np.clip(np.where(q1 > 0, p * p_d / np.where(q1 > 0, q1, 1.0), 0.0), 0.0, 1.0)
        post0 = np.clip(np.where(q0 > 0, p * (1.0 - p_d) / np.where(q0 > 0, q0, 1.0), 0.0), 0.0, 1.0)
    h_cond = q1 * _binary_entropy(post1) + q0 * _binary_entropy(post0)
    out = np.maximum(h_prior - h_cond, 0.0)
    return float(out) if out.ndim == 0 else out


def detection_mi_enumerated(p, p_d, p_fa):
    """Independent oracle: sum p(b,j) log[p(b,j)/(p(b)p(j))] over the 4-entry joint."""
    p = np.asarray(p, dtype=float)
    p_d = np.asarray(p_d, dtype=float)
    p_fa = np.asarray(p_fa, dtype=float)
    pb = [1.0 - p, p]
    ch = [[1.0 - p_fa, p_fa], [1.0 - p_d, p_d]]  # [b][j]
    pj = [pb[0] * ch[0][0] + pb[1] * ch[1][0], pb[0] * ch[0][1] + pb[1] * ch[1][1]]
    total = np.zeros(np.broadcast(p, p_d, p_fa).shape)
    for b in (0, 1):
        for j in (0, 1):
            joint = pb[b] * ch[b][j]
            denom = pb[b] * pj[j]
            with np.errstate(divide="ignore", invalid="ignore"):
                term = xlogy(joint, np.where(joint > 0, joint / np.where(denom > 0, denom, 1.0), 1.0))
            total = total + term
    return float(total) if total.ndim == 0 else total


def detection_cond_entropy_printed(p, p_d, p_fa):
    """The printed log[1 + x] form of H(b | j); comparison harness only."""
    p = np.asarray(p, dtype=float)
    return (
        (1.0 - p_fa) * (1.0 - p) * np.log1p((1.0 - p_d) * p)
        + p_fa * (1.0 - p) * np.log1p(p_d * p)
        + (1.0 - p_d) * p * np.log1p((1.0 - p_fa) * (1.0 - p))
        + p_d * p * np.log1p(p_fa * (1.0 - p))
    )


def detection_mi_printed(p, p_d, p_fa):
    """The printed closed form of I(b; j); comparison harness only."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), 0.0)
        log1mp = np.where(p < 1, np.log(np.where(p < 1, 1.0 - p, 1.0)), 0.0)
    return p * (
        (1.0 - p_d) * np.log1p((1.0 - p_fa) * (1.0 - p))
        + p_d * np.log1p(p_fa * (1.0 - p))
        - logp
    ) + (1.0 - p) * (
        (1.0 - p_fa) * np.log1p((1.0 - p_d) * p)
        + p_fa * np.log1p(p_d * p)
        - log1mp
    )


def printed_form_gap(n: int = 100_000, seed: int = 0) -> dict[str, float]:
    """Measure the printed forms against the definitional quantities.

    Sweeps random (p, p_d, p_fa) triples and reports the maximum absolute
    deviation of the printed conditional entropy and printed MI from their
    definitional counterparts. The gap is a property of the printed
    simplification; it is reported, not corrected.
    """
    rng = np.random.default_rng(seed)
    p = rng.random(n)
    p_d = rng.random(n)
    p_fa = rng.random(n)
    mi_def = detection_mi_enumerated(p, p_d, p_fa)
    h_cond_def = _binary_entropy(p) - mi_def
    mi_pr = detection_mi_printed(p, p_d, p_fa)
    h_pr = detection_cond_entropy_printed(p, p_d, p_fa)
    return {
        "max_abs_gap_cond_entropy": float(np.max(np.abs(h_pr - h_cond_def))),
        "max_abs_gap_mi": float(np.max(np.abs(mi_pr - mi_def))),
        "mean_abs_gap_mi": float(np.mean(np.abs(mi_pr - mi_def))),
        "n": float(n),
    }


def detection_ig(grid: OccupancyGrid, view: SensorView, params: DetectorParams) -> float:
    """Sum of per-cell detection MI over the observed set.

    Each cell's channel is evaluated at its own bin-sample distance, so
    range attenuation discounts far cells.
    """
    return float(np.sum(detection_ig_cells(grid, view, params)))


def detection_ig_cells(grid: OccupancyGrid, view: SensorView, params: DetectorParams) -> np.ndarray:
    if view.n_cells == 0:
        return np.zeros(0)
    p = grid.p[view.cells]
    p00, p01 = transition_probs(params, view.cell_dist)
    return detection_mi(p, 1.0 - p01, 1.0 - p00)


def dirichlet_entropy(params: DirichletParams | Iterable[float]) -> float:
    """Differential entropy of Dir(alpha) via the digamma closed form."""
    a = params.alpha if isinstance(params, DirichletParams) else np.asarray(list(params), float)
    return float(_dirichlet_entropy_rows(a.reshape(1, -1))[0])


def _dirichlet_entropy_rows(alphas: np.ndarray) -> np.ndarray:
    """Row-wise Dirichlet entropies, alphas of shape (n, L)."""
    a0 = alphas.sum(axis=1)
    n_classes = alphas.shape[1]
    log_beta = gammaln(alphas).sum(axis=1) - gammaln(a0)
    return log_beta + (a0 - n_classes) * psi(a0) - ((alphas - 1.0) * psi(alphas)).sum(axis=1)


@lru_cache(maxsize=131072)
def _classification_mi_cached(alpha_key: tuple[float, ...]) -> float:
    a = np.array(alpha_key)
    n_classes = a.size
    if n_classes == 1:
        return 0.0
    a0 = a.sum()
    h_prior = _dirichlet_entropy_rows(a.reshape(1, -1))[0]
    incremented = a + np.eye(n_classes)
    h_post = _dirichlet_entropy_rows(incremented)
    return float(max(h_prior - float(np.dot(a / a0, h_post)), 0.0))


def classification_mi(params: DirichletParams | Iterable[float]) -> float:
    """I(class parameter vector; class label) for one cell.

    Dirichlet entropy of the current belief minus the predictive-weighted
    entropies of the one-label posteriors Dir(alpha + e_c), weights
    p(c) = alpha_c / alpha_0.
    """
    a = params.alpha if isinstance(params, DirichletParams) else np.asarray(list(params), float)
    return _classification_mi_cached(tuple(a.tolist()))


def classification_mi_mc(
    alpha: Iterable[float], n_samples: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte-Carlo oracle for classification_mi: (estimate, standard error).

    Samples the generative pair lambda ~ Dir(alpha), c | lambda ~ Cat(lambda)
    and averages log p(c | lambda) - log p(c); touches none of the
    differential-entropy machinery of the closed form.
    """
    a = np.asarray(list(alpha), dtype=float)
    lam = rng.dirichlet(a, size=n_samples)
    u = rng.random(n_samples)
    c = (lam.cumsum(axis=1) < u[:, None]).sum(axis=1)
    c = np.minimum(c, a.size - 1)
    p_c = a / a.sum()
    x = np.log(lam[np.arange(n_samples), c]) - np.log(p_c[c])
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n_samples))


def classification_ig(cmap: ClassificationMap, cells: Iterable[int]) -> float:
    """Sum of per-cell classification MI over the observed set."""
    return float(np.sum(classification_ig_cells(cmap, cells)))


def classification_ig_cells(cmap: ClassificationMap, cells) -> np.ndarray:
    cells = np.asarray(cells if not isinstance(cells, (set, frozenset)) else sorted(cells), dtype=np.int64)
    if cells.size == 0:
        return np.zeros(0)
    return np.array([_classification_mi_cached(tuple(cmap.alpha[c].tolist())) for c in cells])


def detection_ig_max(n_cells: int) -> float:
    """Per the uniform-prior/deterministic-posterior bound: one bit per cell."""
    return n_cells * LOG2


def classification_ig_max(n_cells: int, num_classes: int) -> float:
    return n_cells * math.log(num_classes)


def combine_ig(
    ig_d: float,
    ig_c: float,
    n_cells: int,
    num_classes: int,
    weights: IgWeights,
    normalizer_scale: float = 1.0,
) -> float:
    """Normalized convex combination; empty observed sets score 0.

    ``normalizer_scale`` rescales both maxima together; it changes the
    score's magnitude but never the ranking of candidate actions.
    """
    if n_cells == 0:
        return 0.0
    d_max = detection_ig_max(n_cells) * normalizer_scale
    c_max = classification_ig_max(n_cells, num_classes) * normalizer_scale
    score = weights.w_d * ig_d / d_max
    if c_max > 0:
        score += weights.w_c * ig_c / c_max
    return score


def total_ig(
    grid: OccupancyGrid,
    cmap: ClassificationMap,
    view: SensorView,
    params: DetectorParams,
    weights: IgWeights,
) -> float:
    """The planning reward: normalized convex combination over one view."""
    if view.n_cells == 0:
        return 0.0
    ig_d = detection_ig(grid, view, params)
    ig_c = classification_ig(cmap, view.cells)
    return combine_ig(ig_d, ig_c, view.n_cells, cmap.num_classes, weights)


def ig_report(
    grid: OccupancyGrid,
    cmap: ClassificationMap,
    view: SensorView,
    params: DetectorParams,
    weights: IgWeights,
) -> IgReport:
    per_d = detection_ig_cells(grid, view, params)
    per_c = classification_ig_cells(cmap, view.cells)
    ig_d = float(per_d.sum())
    ig_c = float(per_c.sum())
    return IgReport(
        ig_d=ig_d,
        ig_c=ig_c,
        ig_total=combine_ig(ig_d, ig_c, view.n_cells, cmap.num_classes, weights),
        n_cells=view.n_cells,
        per_cell_d=per_d,
        per_cell_c=per_c,
    )
