"""Sensing-action spaces and the three selection policies.

* lawn mower: predetermined boustrophedon sweep, ignores information gain;
* greedy: argmax of the one-step normalized information gain;
* rollout: one-step gain plus a Monte-Carlo estimate of the reward-to-go
  of a greedy base policy over a finite horizon, simulated against the
  agent's own predictive beliefs (never against ground truth).

Scoring never mutates live state; rollouts run on scratch copies with
child random streams keyed by (candidate, rollout), so parallel
evaluation order cannot change a decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classify import (
    ClassificationMap,
    OneStepClassifierSpec,
    _ingest_inplace,
    no_target_label,
    one_step_label,
)
from .grid import GridGeometry, Pose, SensorFootprint, wrap_angle, sense
from .infogain import IgWeights, total_ig
from .occupancy import OccupancyGrid, _factored_update_inplace, bac_from_view
from .sensor import DetectorParams, Measurement, transition_probs


@dataclass(frozen=True)
class DynamicsConfig:
    """Unicycle-style discrete action set: fixed step, small turn menu."""

    step_length: float = 1.0
    turn_deltas: tuple[float, ...] = (-math.pi / 6, 0.0, math.pi / 6)
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 25.0, 25.0)

    def __post_init__(self) -> None:
        if self.step_length <= 0:
            raise ValueError("step_length must be positive")
        if not self.turn_deltas:
            raise ValueError("turn set must be nonempty")


@dataclass(eq=False)
class PolicyState:
    """Snapshot used to score candidate actions; scoring never mutates it."""

    grid: OccupancyGrid
    cmap: ClassificationMap
    pose: Pose
    weights: IgWeights
    step: int = 0

    def copy(self) -> "PolicyState":
        return PolicyState(self.grid.copy(), self.cmap.copy(), self.pose, self.weights, self.step)


@dataclass(frozen=True)
class RolloutConfig:
    horizon: int = 10
    rollouts_per_action: int = 10
    base_policy: str = "greedy"

    def __post_init__(self) -> None:
        if self.horizon < 0 or self.rollouts_per_action < 1:
            raise ValueError("need horizon >= 0 and rollouts_per_action >= 1")
        if self.base_policy != "greedy":
            raise ValueError("only the greedy base policy is supported")


def boundary_violation(pose: Pose, bounds: tuple[float, float, float, float]) -> float:
    """Euclidean distance from the position to the field rectangle (0 inside)."""
    xmin, ymin, xmax, ymax = bounds
    dx = max(xmin - pose.x, 0.0, pose.x - xmax)
    dy = max(ymin - pose.y, 0.0, pose.y - ymax)
    return math.hypot(dx, dy)


def feasible_actions(pose: Pose, dyn: DynamicsConfig) -> list[Pose]:
    """Candidate next poses, guaranteed nonempty.

    One candidate per turn delta, advanced along the turned heading.
    Candidates leaving the bounds are dropped; if all leave, the single
    least-violating candidate is kept (ties: straight first, then menu
    order).
    """
    candidates = []
    for delta in dyn.turn_deltas:
        h = wrap_angle(pose.heading + delta)
        candidates.append(Pose(pose.x + dyn.step_length * math.cos(h), pose.y + dyn.step_length * math.sin(h), h))
    inside = [c for c in candidates if boundary_violation(c, dyn.bounds) == 0.0]
    if inside:
        return inside
    best = min(
        range(len(candidates)),
        key=lambda i: (boundary_violation(candidates[i], dyn.bounds), abs(dyn.turn_deltas[i]), i),
    )
    return [candidates[best]]


def score_action(
    state: PolicyState,
    candidate: Pose,
    params: DetectorParams,
    footprint: SensorFootprint,
) -> float:
    """Expected one-step reward of sensing from the candidate pose.

    Mutual information already averages over measurement outcomes, so no
    hypothetical measurement is sampled here.
    """
    view = sense(state.grid.geometry, candidate, footprint)
    return total_ig(state.grid, state.cmap, view, params, state.weights)


def _argmax_candidate(scored: list[tuple[Pose, float, float, int]]) -> Pose:
    """Deterministic argmax: score, then smallest |turn|, then menu order."""
    best = scored[0]
    for cand in scored[1:]:
        if cand[1] > best[1] or (cand[1] == best[1] and (abs(cand[2]), cand[3]) < (abs(best[2]), best[3])):
            best = cand
    return best[0]


def candidate_scores(
    state: PolicyState,
    dyn: DynamicsConfig,
    params: DetectorParams,
    footprint: SensorFootprint,
) -> list[tuple[Pose, float, float, int]]:
    """(pose, score, turn delta, menu index) per feasible action."""
    actions = feasible_actions(state.pose, dyn)
    deltas = _deltas_for(actions, state.pose, dyn)
    return [
        (a, score_action(state, a, params, footprint), deltas[i], i)
        for i, a in enumerate(actions)
    ]


def _deltas_for(actions: list[Pose], pose: Pose, dyn: DynamicsConfig) -> list[float]:
    return [((a.heading - pose.heading + math.pi) % (2 * math.pi)) - math.pi for a in actions]


def greedy_step(
    state: PolicyState,
    dyn: DynamicsConfig,
    params: DetectorParams,
    footprint: SensorFootprint,
) -> Pose:
    """One-step-reward argmax over the feasible actions."""
    return _argmax_candidate(candidate_scores(state, dyn, params, footprint))


def _simulate_measurement_inplace(
    grid: OccupancyGrid,
    cmap: ClassificationMap,
    pose: Pose,
    footprint: SensorFootprint,
    params: DetectorParams,
    classifier: OneStepClassifierSpec | None,
    rng: np.random.Generator,
) -> None:
    """Draw a hypothetical measurement from current beliefs and apply it.

    Cell occupancies are sampled from the grid's marginals, pushed through
    the same OR-of-channels sensor model, and the resulting bins drive the
    same factored/DCM updates as live operation. For fired bins, occupied
    samples emit a label drawn from the cell's predictive class
    distribution pushed through the classifier's confusion row.
    """
    view = sense(grid.geometry, pose, footprint)
    p00, p01 = transition_probs(params, view.cell_dist)
    bins = np.zeros(footprint.n_bins, dtype=np.uint8)
    pos = 0
    occ_draw = np.zeros(view.n_cells, dtype=bool)
    for k0, cells in enumerate(view.bin_cells):
        n = len(cells)
        if n == 0:
            bins[k0] = rng.random() < params.p_fa
            continue
        sl = slice(pos, pos + n)
        occ = rng.random(n) < grid.p[view.cells[sl]]
        occ_draw[sl] = occ
        fire = rng.random(n) < np.where(occ, 1.0 - p01[sl], 1.0 - p00[sl])
        bins[k0] = bool(fire.any())
        pos += n
    meas = Measurement(time_index=-1, pose=pose, bins=bins, view=view)
    _factored_update_inplace(grid, meas, bac_from_view(view, params))
    if classifier is None:
        return
    pos = 0
    for k0, cells in enumerate(view.bin_cells):
        n = len(cells)
        if n and bins[k0]:
            for i, cell in enumerate(cells):
                if occ_draw[pos + i]:
                    pred = cmap.alpha[cell]
                    u = rng.random()
                    true_cls = int(np.searchsorted(np.cumsum(pred / pred.sum()), u, side="right")) + 1
                    label = one_step_label(classifier, min(true_cls, cmap.num_classes), rng)
                else:
                    label = no_target_label(classifier, rng)
                if label is not None:
                    _ingest_inplace(cmap, cell, label)
        pos += n


def rollout_step(
    state: PolicyState,
    dyn: DynamicsConfig,
    cfg: RolloutConfig,
    params: DetectorParams,
    footprint: SensorFootprint,
    classifier: OneStepClassifierSpec | None,
    seed_seq: np.random.SeedSequence,
) -> Pose:
    """Finite-horizon rollout decision.

    Each candidate's value is its one-step score plus the mean, over
    rollouts_per_action simulations, of the summed scores of the next
    ``horizon`` greedy base-policy actions applied to a scratch copy.
    With horizon 0 this reduces exactly to greedy_step.
    """
    scored = candidate_scores(state, dyn, params, footprint)
    if cfg.horizon == 0:
        return _argmax_candidate(scored)
    augmented = []
    for pose, immediate, delta, idx in scored:
        acc = 0.0
        for r in range(cfg.rollouts_per_action):
            rng = np.random.default_rng(
                np.random.SeedSequence(seed_seq.entropy, spawn_key=tuple(seed_seq.spawn_key) + (idx, r))
            )
            acc += _simulate_reward_to_go(state, pose, dyn, cfg, params, footprint, classifier, rng)
        augmented.append((pose, immediate + acc / cfg.rollouts_per_action, delta, idx))
    return _argmax_candidate(augmented)


def _simulate_reward_to_go(
    state: PolicyState,
    first_pose: Pose,
    dyn: DynamicsConfig,
    cfg: RolloutConfig,
    params: DetectorParams,
    footprint: SensorFootprint,
    classifier: OneStepClassifierSpec | None,
    rng: np.random.Generator,
) -> float:
    """One rollout: hypothetical measure-update-move loop on a scratch copy."""
    grid = state.grid.copy()
    cmap = state.cmap.copy()
    _simulate_measurement_inplace(grid, cmap, first_pose, footprint, params, classifier, rng)
    sim = PolicyState(grid, cmap, first_pose, state.weights.with_coverage(grid.seen.mean()), state.step + 1)
    total = 0.0
    for _ in range(cfg.horizon):
        nxt = greedy_step(sim, dyn, params, footprint)
        total += score_action(sim, nxt, params, footprint)
        _simulate_measurement_inplace(grid, cmap, nxt, footprint, params, classifier, rng)
        sim.pose = nxt
        sim.step += 1
        sim.weights = sim.weights.with_coverage(grid.seen.mean())
    return total


def lawnmower_swath(footprint: SensorFootprint) -> float:
    return footprint.swath


def lawnmower_path(
    geometry: GridGeometry,
    track_spacing: float,
    start: str = "sw",
) -> list[Pose]:
    """Predetermined paired-leg boustrophedon sweep.

    A starboard-looking sensor paints only one side of each leg, so the
    pattern runs a northbound leg, then a southbound plus northbound pair
    on each line 2 * track_spacing further east. That tiles the field
    whenever track_spacing <= sensor swath. Legs ride the cell-center
    rows/columns so the narrow beam's comb hits every cell in the band.
    Start corners: "sw" (default) or "nw".
    """
    if track_spacing <= 0:
        raise ValueError("track_spacing must be positive")
    if start not in ("sw", "nw"):
        raise ValueError("only sw and nw start corners are supported")
    x0, y0, x1, y1 = geometry.bounds()
    half = geometry.cell_size / 2.0
    ys_up = [y0 + half + i * geometry.cell_size for i in range(geometry.n_rows)]
    north, south = math.pi / 2, 3 * math.pi / 2
    east = 0.0

    # up legs paint the band east of the line, down legs the band west of
    # it; pairs on each line 2*spacing east tile the field. A "nw" start
    # leads with a down leg (its westward band falls off-field).
    lines: list[tuple[float, str]] = [(x0, "down"), (x0, "up")] if start == "nw" else [(x0, "up")]
    m = 1
    while (2 * m - 1) * track_spacing < geometry.width:
        x = min(x0 + 2 * m * track_spacing, x1)
        lines.append((x, "down"))
        lines.append((x, "up"))
        m += 1

    def leg(x: float, direction: str) -> list[Pose]:
        ys = ys_up if direction == "up" else ys_up[::-1]
        return [Pose(x, y, north if direction == "up" else south) for y in ys]

    path: list[Pose] = []
    prev_x: float | None = None
    for x, direction in lines:
        if prev_x is not None and x > prev_x:
            # eastbound transit along the row the previous leg ended on
            y_t = path[-1].y
            steps = int(round((x - prev_x) / geometry.cell_size))
            for i in range(1, steps + 1):
                path.append(Pose(prev_x + i * geometry.cell_size, y_t, east))
        body = leg(x, direction)
        # drop an exact duplicate pose; keep same-position turns (the sensor
        # looks sideways, so a turn-in-place ping paints a new band)
        if path and body and body[0] == path[-1]:
            body = body[1:]
        path.extend(body)
        prev_x = x
    return path
