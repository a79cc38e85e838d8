"""Readers for the planner's file formats.

The planner writes plain-text artifacts; this package consumes only those
files (never the planner's code):

* ``metrics.csv``: one ``# key=value ...`` comment line (carries seed and
  config_hash), a fixed ``step,pct_seen,rho_det,rho_class,sjsd_det,
  sjsd_class`` header, then one row per action.
* matrix CSVs (``og_*.csv``, ``cm_*_class*.csv``, ``cm_*_argmax.csv``): a
  ``# n_rows=R n_cols=C ...`` header line and a dense row-major matrix.
* ``scene.json``: ground truth with 0-based row-major ``cells`` indices.
* ``manifest.json``: config, config_hash, seed, status.
* sweep directories add ``finals.csv`` (``label,seed,`` + metrics columns)
  and ``runs/<label>_seed<n>/`` subdirectories.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

METRIC_COLUMNS = ("pct_seen", "rho_det", "rho_class", "sjsd_det", "sjsd_class")


class ArtifactError(ValueError):
    """Malformed or mutually inconsistent run artifacts."""


def _parse_header(line: str) -> dict[str, str]:
    return dict(m.groups() for m in re.finditer(r"(\w+)=(\S+)", line))


def read_matrix(path: Path) -> tuple[np.ndarray, dict[str, str]]:
    lines = path.read_text().strip().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ArtifactError(f"{path}: missing geometry header line")
    info = _parse_header(lines[0])
    mat = np.array([[float(v) for v in row.split(",")] for row in lines[1:]])
    n_rows, n_cols = int(info.get("n_rows", -1)), int(info.get("n_cols", -1))
    if mat.shape != (n_rows, n_cols):
        raise ArtifactError(f"{path}: matrix shape {mat.shape} does not match header ({n_rows}, {n_cols})")
    return mat, info


@dataclass
class MetricsSeries:
    steps: np.ndarray
    values: dict[str, np.ndarray]
    header: dict[str, str]


def read_metrics(path: Path) -> MetricsSeries:
    lines = path.read_text().strip().splitlines()
    header: dict[str, str] = {}
    rows = []
    for line in lines:
        if line.startswith("#"):
            header = _parse_header(line)
        elif line.startswith("step,"):
            if line != "step," + ",".join(METRIC_COLUMNS):
                raise ArtifactError(f"{path}: unexpected metrics columns: {line}")
        else:
            rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise ArtifactError(f"{path}: no metric rows")
    arr = np.array(rows)
    return MetricsSeries(
        steps=arr[:, 0].astype(int),
        values={name: arr[:, i + 1] for i, name in enumerate(METRIC_COLUMNS)},
        header=header,
    )


@dataclass
class SceneTruth:
    n_rows: int
    n_cols: int
    num_classes: int
    class_grid: np.ndarray  # 0 = empty, else 1-based class


def read_scene(path: Path) -> SceneTruth:
    data = json.loads(path.read_text())
    grid = np.zeros((int(data["n_rows"]), int(data["n_cols"])), dtype=int)
    for obj in data.get("objects", []):
        for cell in obj["cells"]:
            grid[divmod(int(cell), grid.shape[1])] = int(obj["class"])
    return SceneTruth(grid.shape[0], grid.shape[1], int(data["num_classes"]), grid)


@dataclass
class RunArtifacts:
    """One run directory: metrics series, map matrices, manifest, truth."""

    path: Path
    manifest: dict
    metrics: MetricsSeries
    scene: SceneTruth
    og_snapshots: list[tuple[str, np.ndarray]] = field(default_factory=list)
    cm_snapshots: list[tuple[str, np.ndarray]] = field(default_factory=list)

    @property
    def label(self) -> str:
        return self.manifest.get("config", {}).get("label") or self.manifest.get("config", {}).get("policy", "run")

    @property
    def manifest_hash(self) -> str:
        return self.manifest["config_hash"]


def load_run(path: str | Path) -> RunArtifacts:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    metrics = read_metrics(path / "metrics.csv")
    if metrics.header.get("config_hash") not in (None, manifest.get("config_hash")):
        raise ArtifactError(f"{path}: metrics file references a different manifest")
    scene = read_scene(path / "scene.json")

    og: list[tuple[str, np.ndarray]] = []
    cm: list[tuple[str, np.ndarray]] = []

    def add(kind: list, tag: str, file: Path) -> None:
        mat, info = read_matrix(file)
        if mat.shape != (scene.n_rows, scene.n_cols):
            raise ArtifactError(f"{file}: snapshot dims do not match the scene geometry")
        if info.get("config_hash") not in (None, manifest.get("config_hash")):
            raise ArtifactError(f"{file}: snapshot references a different manifest")
        kind.append((tag, mat))

    snaps = path / "snapshots"
    if snaps.is_dir():
        for f in sorted(snaps.glob("og_*.csv")):
            add(og, f.stem.split("_")[1], f)
        for f in sorted(snaps.glob("cm_*_argmax.csv")):
            add(cm, f.stem.split("_")[1], f)
    if (path / "og_final.csv").exists():
        add(og, "final", path / "og_final.csv")
    if (path / "cm_final_argmax.csv").exists():
        add(cm, "final", path / "cm_final_argmax.csv")
    return RunArtifacts(path, manifest, metrics, scene, og, cm)


@dataclass
class SweepArtifacts:
    path: Path
    runs: list[RunArtifacts]
    finals: list[dict]

    def by_label(self) -> dict[str, list[RunArtifacts]]:
        out: dict[str, list[RunArtifacts]] = {}
        for run in self.runs:
            out.setdefault(run.label, []).append(run)
        return out


def read_finals(path: Path) -> list[dict]:
    lines = path.read_text().strip().splitlines()
    head = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(head) or "error" in line:
            continue  # failed runs are reported by the sweep itself
        row: dict = {"label": parts[0], "seed": int(parts[1])}
        for name, value in zip(head[2:], parts[2:]):
            row[name] = float(value)
        rows.append(row)
    return rows


def load_sweep(path: str | Path) -> SweepArtifacts:
    path = Path(path)
    finals = read_finals(path / "finals.csv") if (path / "finals.csv").exists() else []
    runs = []
    runs_dir = path / "runs"
    if runs_dir.is_dir():
        for run_dir in sorted(runs_dir.iterdir()):
            if (run_dir / "manifest.json").exists():
                runs.append(load_run(run_dir))
    if not runs:
        raise ArtifactError(f"{path}: no completed runs found")
    return SweepArtifacts(path, runs, finals)
