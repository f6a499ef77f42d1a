"""Evaluation metrics over prediction records, misclassification-flow
matrices, budget sweeps, and 2-D decision-region rasters.

The misclassification matrix row-normalizes the counts of "true class i
predicted as class j" over misclassified samples only, so each populated
row is a probability distribution over wrong targets. Two groups of such
matrices are compared by the difference of their means, which makes rows
populated on both sides sum to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacks import (
    AttackFamily,
    AttackSpec,
    NewtonConfig,
    RecordSet,
    StepSizeRule,
    run_attack,
)
from .geometry import _cval
from .model import MlrParams, ObjectiveKind, mlr_logits

__all__ = [
    "MisclassMatrix",
    "SweepResult",
    "Raster",
    "accuracy",
    "misclass_matrix",
    "comparative_matrix",
    "epsilon_sweep",
    "rasterize_decision_regions",
    "write_matrix_csv",
    "write_comparative_csv",
    "write_sweep_csv",
    "read_sweep_csv",
    "render_raster_text",
    "render_raster_svg",
    "render_sweep_svg",
]


def accuracy(records: RecordSet) -> float:
    """Fraction of records whose adversarial prediction is the true label."""
    if len(records) == 0:
        raise ValueError("accuracy of an empty record set is undefined")
    return float(np.mean(records.adv_pred == records.true_label))


@dataclass(frozen=True)
class MisclassMatrix:
    """Row-normalized misclassification flows.

    ``values[i, j]`` is the share of class-i misclassifications that landed
    on class j; ``row_counts[i]`` is how many class-i samples were
    misclassified. Rows with no misclassifications are all-zero.
    """

    values: np.ndarray
    row_counts: np.ndarray

    def __post_init__(self):
        v = self.values
        n = self.row_counts
        if v.ndim != 2 or v.shape[0] != v.shape[1] or n.shape != (v.shape[0],):
            raise ValueError("matrix must be CxC with a C-vector of counts")
        if np.any(n < 0) or np.any(v < 0):
            raise ValueError("negative entries are impossible")
        if np.any(np.diagonal(v) != 0):
            raise ValueError("diagonal must be zero (misclassified means j != i)")
        sums = v.sum(axis=1)
        pop = n > 0
        if np.any(np.abs(sums[pop] - 1.0) > 1e-12):
            raise ValueError("populated rows must sum to 1")
        if np.any(sums[~pop] != 0):
            raise ValueError("empty rows must be all-zero")

    @property
    def num_classes(self) -> int:
        return self.values.shape[0]


def misclass_matrix(records: RecordSet, num_classes: int | None = None) -> MisclassMatrix:
    """Count misclassification flows under the adversarial predictions.

    Samples the clean model already got wrong still count (the analysis is
    of where predictions land under attack, not of attack-induced flips).
    """
    y = records.true_label
    pred = records.adv_pred
    if num_classes is None:
        num_classes = int(max(y.max(initial=-1), pred.max(initial=-1))) + 1
        if num_classes < 1:
            raise ValueError("cannot infer class count from empty records")
    if np.any((y < 0) | (y >= num_classes)) or np.any((pred < 0) | (pred >= num_classes)):
        raise ValueError("labels outside [0, num_classes)")
    mis = pred != y
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (y[mis], pred[mis]), 1)
    row_counts = counts.sum(axis=1)
    safe = np.where(row_counts > 0, row_counts, 1)
    values = counts / safe[:, None]
    return MisclassMatrix(values=values, row_counts=row_counts)


def comparative_matrix(matsA, matsB) -> np.ndarray:
    """Difference of mean misclassification matrices, ``mean(A) - mean(B)``."""
    matsA = list(matsA)
    matsB = list(matsB)
    if not matsA or not matsB:
        raise ValueError("both matrix groups must be nonempty")
    C = matsA[0].num_classes
    for m in matsA + matsB:
        if m.num_classes != C:
            raise ValueError(
                f"class-count mismatch: expected {C}, got {m.num_classes}"
            )
    meanA = np.mean([m.values for m in matsA], axis=0)
    meanB = np.mean([m.values for m in matsB], axis=0)
    return meanA - meanB


@dataclass(frozen=True)
class SweepResult:
    """One row per (attack, objective, epsilon) combination."""

    attack: np.ndarray
    objective: np.ndarray
    epsilon: np.ndarray
    n_samples: np.ndarray
    n_correct: np.ndarray
    accuracy: np.ndarray

    def __post_init__(self):
        n = self.attack.shape[0]
        for name in ("objective", "epsilon", "n_samples", "n_correct", "accuracy"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"sweep column {name} has inconsistent length")
        if np.any(self.n_correct > self.n_samples):
            raise ValueError("cannot have more correct than total")
        if np.any((self.accuracy < 0) | (self.accuracy > 1)):
            raise ValueError("accuracy out of [0, 1]")

    def __len__(self) -> int:
        return self.attack.shape[0]


def epsilon_sweep(
    params: MlrParams,
    dataset,
    families,
    objectives,
    epsilons,
    *,
    pgd_steps: int = 10,
    pgd_rule: StepSizeRule | None = None,
    newton: NewtonConfig | None = None,
    per_run=None,
) -> SweepResult:
    """Evaluate the full (family, objective, epsilon) grid via run_attack.

    Iteration order is: families as given, objectives as given, budgets in
    ascending order — fixed so reruns emit identical rows. PGD combinations
    use ``pgd_steps`` iterations under ``pgd_rule`` (default: step 0.5 eps,
    matching the common choice); FGM combinations are single-step
    exact-budget. ``per_run(spec, records)`` is invoked after each cell for
    callers that want the raw records.
    """
    families = list(families)
    objectives = list(objectives)
    epsilons = sorted(float(e) for e in epsilons)
    if not families or not objectives or not epsilons:
        raise ValueError("families, objectives and epsilons must be nonempty")
    if pgd_rule is None:
        pgd_rule = StepSizeRule("fixed", alpha_scale=0.5)
    if newton is None:
        newton = NewtonConfig()

    cols = {name: [] for name in ("attack", "objective", "epsilon",
                                  "n_samples", "n_correct", "accuracy")}
    for family in families:
        is_pgd = family in (AttackFamily.EUCLIDEAN_PGD, AttackFamily.HYPERBOLIC_PGD)
        for objective in objectives:
            for eps in epsilons:
                spec = AttackSpec(
                    family=family,
                    objective=objective,
                    epsilon=eps,
                    steps=pgd_steps if is_pgd else 1,
                    step_rule=pgd_rule if is_pgd else StepSizeRule(),
                    newton=newton,
                )
                records = run_attack(spec, params, dataset)
                if per_run is not None:
                    per_run(spec, records)
                correct = int(np.count_nonzero(records.adv_pred == records.true_label))
                cols["attack"].append(family.value)
                cols["objective"].append(objective.value)
                cols["epsilon"].append(eps)
                cols["n_samples"].append(len(records))
                cols["n_correct"].append(correct)
                cols["accuracy"].append(correct / len(records))
    return SweepResult(
        attack=np.asarray(cols["attack"], dtype="U16"),
        objective=np.asarray(cols["objective"], dtype="U4"),
        epsilon=np.asarray(cols["epsilon"], dtype=np.float64),
        n_samples=np.asarray(cols["n_samples"], dtype=np.int64),
        n_correct=np.asarray(cols["n_correct"], dtype=np.int64),
        accuracy=np.asarray(cols["accuracy"], dtype=np.float64),
    )


@dataclass(frozen=True)
class Raster:
    """Decision regions on a square grid over the ball's bounding box.

    ``labels[row, col]`` holds the predicted class at the cell center, -1
    outside the ball; row 0 is the top (largest second coordinate).
    ``traces[row, col]`` marks cells where some class logit changes sign
    against the right or lower in-ball neighbor (geodesic hyperplane
    crossings). ``extent`` is the half-width 1/sqrt(c).
    """

    labels: np.ndarray
    traces: np.ndarray
    extent: float


def rasterize_decision_regions(params: MlrParams, resolution: int) -> Raster:
    """Predict on a resolution x resolution grid over [-1/sqrt(c), 1/sqrt(c)]^2."""
    if params.dim != 2:
        raise ValueError("rasterization needs a 2-D model")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    c = _cval(params.curvature)
    R = 1.0 / np.sqrt(c)
    centers = np.linspace(-R, R, resolution)
    xs, ys = np.meshgrid(centers, -centers)  # row 0 at the top
    pts = np.stack([xs.ravel(), ys.ravel()], axis=-1)
    inside = np.sum(pts * pts, axis=-1) < R * R * (1.0 - 1e-9)

    labels = np.full(resolution * resolution, -1, dtype=np.int64)
    logits = np.zeros((resolution * resolution, params.num_classes))
    if np.any(inside):
        s = mlr_logits(params, pts[inside])
        logits[inside] = s
        labels[inside] = np.argmax(s, axis=-1)
    labels = labels.reshape(resolution, resolution)
    sign = np.sign(logits).reshape(resolution, resolution, params.num_classes)
    ok = inside.reshape(resolution, resolution)

    traces = np.zeros((resolution, resolution), dtype=bool)
    # a differing sign (including an exact zero against a nonzero) means the
    # hyperplane passes between or through the two cell centers
    flip_h = (sign[:, :-1, :] != sign[:, 1:, :]).any(axis=-1)
    both_h = ok[:, :-1] & ok[:, 1:]
    traces[:, :-1] |= flip_h & both_h
    flip_v = (sign[:-1, :, :] != sign[1:, :, :]).any(axis=-1)
    both_v = ok[:-1, :] & ok[1:, :]
    traces[:-1, :] |= flip_v & both_v
    return Raster(labels=labels, traces=traces, extent=float(R))


# ------------------------------------------------------------------ writers

_LABEL_CHARS = "0123456789abcdefghijklmnopqrstuvwxyz"

# fill colors for up to ten classes; repeated past that
_PALETTE = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
    "#76b7b2", "#edc948", "#ff9da7", "#9c755f", "#bab0ac",
]


def write_matrix_csv(matrix: MisclassMatrix, path) -> None:
    C = matrix.num_classes
    lines = [",".join(str(j) for j in range(C)) + ",row_count"]
    for i in range(C):
        cells = ",".join(f"{matrix.values[i, j]:.17g}" for j in range(C))
        lines.append(f"{cells},{int(matrix.row_counts[i])}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_comparative_csv(matrix: np.ndarray, path) -> None:
    C = matrix.shape[0]
    lines = [",".join(str(j) for j in range(C))]
    for i in range(C):
        lines.append(",".join(f"{matrix[i, j]:.17g}" for j in range(C)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


SWEEP_HEADER = "attack,objective,epsilon,n_samples,n_correct,accuracy"


def write_sweep_csv(sweep: SweepResult, path) -> None:
    lines = [SWEEP_HEADER]
    for i in range(len(sweep)):
        lines.append(
            f"{sweep.attack[i]},{sweep.objective[i]},{sweep.epsilon[i]:.17g},"
            f"{sweep.n_samples[i]},{sweep.n_correct[i]},{sweep.accuracy[i]:.17g}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sweep_csv(path) -> SweepResult:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != SWEEP_HEADER:
            raise ValueError(f"{path}: not a sweep file (header {header!r})")
        cols = [[] for _ in range(6)]
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 fields")
            for store, value in zip(cols, parts):
                store.append(value)
    return SweepResult(
        attack=np.asarray(cols[0], dtype="U16"),
        objective=np.asarray(cols[1], dtype="U4"),
        epsilon=np.asarray(cols[2], dtype=np.float64),
        n_samples=np.asarray(cols[3], dtype=np.int64),
        n_correct=np.asarray(cols[4], dtype=np.int64),
        accuracy=np.asarray(cols[5], dtype=np.float64),
    )


def render_raster_text(raster: Raster) -> str:
    C = int(raster.labels.max(initial=0)) + 1
    if C > len(_LABEL_CHARS):
        raise ValueError("too many classes for single-character cells")
    rows = []
    for row in raster.labels:
        rows.append(
            "".join("." if v < 0 else _LABEL_CHARS[v] for v in row)
        )
    return "\n".join(rows) + "\n"


def render_raster_svg(raster: Raster) -> str:
    res = raster.labels.shape[0]
    size = 560.0
    cell = size / res
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" '
        f'height="{size:.0f}" viewBox="0 0 {size:.0f} {size:.0f}">',
        f'<rect width="{size:.0f}" height="{size:.0f}" fill="#ffffff"/>',
    ]
    for i in range(res):
        for j in range(res):
            v = raster.labels[i, j]
            if v < 0:
                continue
            color = "#222222" if raster.traces[i, j] else _PALETTE[v % len(_PALETTE)]
            parts.append(
                f'<rect x="{j * cell:.2f}" y="{i * cell:.2f}" '
                f'width="{cell:.2f}" height="{cell:.2f}" fill="{color}"/>'
            )
    r = size / 2.0
    parts.append(
        f'<circle cx="{r:.2f}" cy="{r:.2f}" r="{r - 1.0:.2f}" '
        'fill="none" stroke="#000000" stroke-width="1.5"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_sweep_svg(sweep: SweepResult) -> str:
    """Line chart of accuracy against budget, one polyline per
    (attack, objective) group, solid for hyperbolic and dashed for
    Euclidean families, colored by objective."""
    width, height = 640.0, 420.0
    ml, mr, mt, mb = 60.0, 170.0, 20.0, 45.0
    pw, ph = width - ml - mr, height - mt - mb

    groups = []
    for i in range(len(sweep)):
        key = (str(sweep.attack[i]), str(sweep.objective[i]))
        if key not in groups:
            groups.append(key)
    eps_min = float(sweep.epsilon.min())
    eps_max = float(sweep.epsilon.max())
    span = eps_max - eps_min or 1.0

    def sx(e):
        return ml + (e - eps_min) / span * pw

    def sy(a):
        return mt + (1.0 - a) * ph

    objectives = []
    for _, obj in groups:
        if obj not in objectives:
            objectives.append(obj)
    color_of = {obj: _PALETTE[k % len(_PALETTE)] for k, obj in enumerate(objectives)}

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="#ffffff"/>',
        f'<line x1="{ml:.1f}" y1="{mt + ph:.1f}" x2="{ml + pw:.1f}" '
        f'y2="{mt + ph:.1f}" stroke="#000" stroke-width="1"/>',
        f'<line x1="{ml:.1f}" y1="{mt:.1f}" x2="{ml:.1f}" '
        f'y2="{mt + ph:.1f}" stroke="#000" stroke-width="1"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(frac)
        parts.append(
            f'<line x1="{ml - 4:.1f}" y1="{y:.1f}" x2="{ml:.1f}" y2="{y:.1f}" '
            'stroke="#000" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{ml - 8:.1f}" y="{y + 4:.1f}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{frac:.2f}</text>'
        )
    for e in sorted(set(float(v) for v in sweep.epsilon)):
        x = sx(e)
        parts.append(
            f'<line x1="{x:.1f}" y1="{mt + ph:.1f}" x2="{x:.1f}" '
            f'y2="{mt + ph + 4:.1f}" stroke="#000" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{mt + ph + 18:.1f}" font-size="11" '
            f'text-anchor="middle" font-family="sans-serif">{e:g}</text>'
        )
    parts.append(
        f'<text x="{ml + pw / 2:.1f}" y="{height - 8:.1f}" font-size="12" '
        'text-anchor="middle" font-family="sans-serif">budget</text>'
    )
    parts.append(
        f'<text x="14" y="{mt + ph / 2:.1f}" font-size="12" text-anchor="middle" '
        f'font-family="sans-serif" transform="rotate(-90 14 {mt + ph / 2:.1f})">'
        "accuracy</text>"
    )

    legend_y = mt + 10.0
    for attack, obj in groups:
        mask = (sweep.attack == attack) & (sweep.objective == obj)
        order = np.argsort(sweep.epsilon[mask], kind="stable")
        es = sweep.epsilon[mask][order]
        accs = sweep.accuracy[mask][order]
        pts = " ".join(f"{sx(e):.1f},{sy(a):.1f}" for e, a in zip(es, accs))
        dash = ' stroke-dasharray="6,4"' if attack.startswith("euclidean") else ""
        color = color_of[obj]
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.8"{dash}/>'
        )
        lx = ml + pw + 12.0
        parts.append(
            f'<line x1="{lx:.1f}" y1="{legend_y:.1f}" x2="{lx + 26:.1f}" '
            f'y2="{legend_y:.1f}" stroke="{color}" stroke-width="1.8"{dash}/>'
        )
        parts.append(
            f'<text x="{lx + 32:.1f}" y="{legend_y + 4:.1f}" font-size="10" '
            f'font-family="sans-serif">{attack} {obj}</text>'
        )
        legend_y += 16.0
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
