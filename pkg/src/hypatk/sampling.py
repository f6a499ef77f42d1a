"""Wrapped-normal sampling on the Poincare ball and the synthetic benchmark
dataset built from it: classes drawn around means evenly spaced on a
hyperbolic circle.

The wrapped normal is the pushforward of a Euclidean Gaussian: draw in the
tangent space at the origin, parallel-transport the draw to the tangent space
at the mean, and map onto the ball with the exponential map. Because the
transport is an isometry and geodesics are unit-speed, the hyperbolic
distance from the mean to a sample is exactly ``lambda_0 * ||draw|| =
2 ||draw||``, for any curvature.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .geometry import _arr, _cval, diagnostics, exp_map, parallel_transport

__all__ = [
    "InvalidSpecError",
    "WrappedNormalSpec",
    "DatasetSpec",
    "LabeledDataset",
    "sample_wrapped_normal",
    "make_class_means",
    "generate_dataset",
    "write_dataset_csv",
    "read_dataset_csv",
]


class InvalidSpecError(ValueError):
    """A sampling specification is unusable (bad covariance, bad counts)."""


@dataclass(frozen=True)
class WrappedNormalSpec:
    """Mean point on the ball plus tangent-space covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = _arr(self.mean)
        cov = _arr(self.covariance)
        if mean.ndim != 1:
            raise InvalidSpecError(f"mean must be a single point, got shape {mean.shape}")
        n = mean.shape[0]
        if cov.shape != (n, n):
            raise InvalidSpecError(
                f"covariance shape {cov.shape} does not match dimension {n}"
            )
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise InvalidSpecError("mean and covariance must be finite")
        if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-15):
            raise InvalidSpecError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class DatasetSpec:
    """Everything that determines the synthetic benchmark, including the seed.

    ``num_classes`` means placed evenly on the hyperbolic circle of radius
    ``circle_radius_hyp`` around the origin, isotropic covariance
    ``variance * I`` per class, independent train and test draws.
    """

    num_classes: int
    circle_radius_hyp: float
    variance: float
    samples_per_class_train: int
    samples_per_class_test: int
    curvature: float
    dim: int
    seed: int

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvalidSpecError("need at least two classes")
        if not (self.circle_radius_hyp > 0 and self.variance > 0):
            raise InvalidSpecError("radius and variance must be positive")
        if self.samples_per_class_train < 0 or self.samples_per_class_test < 0:
            raise InvalidSpecError("per-class sample counts must be nonnegative")
        if self.dim < 2:
            raise InvalidSpecError("dimension must be at least 2")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidSpecError("seed must fit in 64 unsigned bits")
        _cval(self.curvature)  # validates positivity


@dataclass(frozen=True)
class LabeledDataset:
    """Point matrix of shape (N, dim) with 0-based integer labels.

    ``num_clamped`` counts samples that hit the ball-boundary safety clamp
    during generation; it is 0 for any reasonable configuration and ``None``
    for datasets read back from disk, where the information is gone.
    """

    points: np.ndarray
    labels: np.ndarray
    split: str
    num_clamped: int | None = 0

    def __post_init__(self):
        points = _arr(self.points)
        labels = np.asarray(self.labels, dtype=np.int64)
        if points.ndim != 2 or labels.ndim != 1 or points.shape[0] != labels.shape[0]:
            raise ValueError(
                f"points {points.shape} and labels {labels.shape} are inconsistent"
            )
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.points.shape[0]


def _covariance_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root ``L`` with ``L @ L.T = cov``.

    Isotropic and diagonal matrices take an exact fast path; the general
    case goes through an eigendecomposition so that merely semi-definite
    covariances (including the zero matrix) factor cleanly.
    """
    n = cov.shape[0]
    diag = np.diagonal(cov)
    if np.count_nonzero(cov - np.diag(diag)) == 0:
        if np.any(diag < 0):
            raise InvalidSpecError("covariance has a negative diagonal entry")
        return np.diag(np.sqrt(diag))
    w, v = np.linalg.eigh((cov + cov.T) / 2.0)
    tol = 1e-10 * max(1.0, float(np.max(np.abs(w))))
    if np.any(w < -tol):
        raise InvalidSpecError("covariance is not positive semi-definite")
    return v * np.sqrt(np.maximum(w, 0.0))


def sample_wrapped_normal(spec: WrappedNormalSpec, count: int, rng, c) -> np.ndarray:
    """Draw ``count`` wrapped-normal samples as a (count, dim) array.

    The four construction steps, in order: Gaussian draw in the tangent
    space at the origin, reinterpretation as tangent vectors there,
    parallel transport to the tangent space at the mean, exponential map.
    """
    if count < 0:
        raise InvalidSpecError("sample count must be nonnegative")
    c = _cval(c)
    n = spec.dim
    if count == 0:
        return np.empty((0, n), dtype=np.float64)
    factor = _covariance_factor(spec.covariance)
    xhat = rng.standard_normal((count, n)) @ factor.T
    mu = np.broadcast_to(spec.mean, (count, n))
    u = parallel_transport(np.zeros((count, n)), mu, xhat, c)
    return exp_map(mu, u, c)


def make_class_means(num_classes: int, r: float, c, dim: int = 2) -> np.ndarray:
    """Means at angles ``2*pi*i/C`` on the hyperbolic circle of radius ``r``.

    The Euclidean norm solving ``d_c(0, mu) = r`` is ``tanh(sqrt(c) r / 2)
    / sqrt(c)``. For ``dim > 2`` the circle sits in the first two
    coordinates.
    """
    if num_classes < 2:
        raise InvalidSpecError("need at least two classes")
    if not (r > 0):
        raise InvalidSpecError("circle radius must be positive")
    if dim < 2:
        raise InvalidSpecError("dimension must be at least 2")
    c = _cval(c)
    sc = math.sqrt(c)
    rho = math.tanh(sc * r / 2.0) / sc
    angles = 2.0 * math.pi * np.arange(num_classes) / num_classes
    means = np.zeros((num_classes, dim))
    means[:, 0] = rho * np.cos(angles)
    means[:, 1] = rho * np.sin(angles)
    return means


def _generate_split(spec: DatasetSpec, split_idx: int, split: str) -> LabeledDataset:
    count = (
        spec.samples_per_class_train if split_idx == 0 else spec.samples_per_class_test
    )
    means = make_class_means(
        spec.num_classes, spec.circle_radius_hyp, spec.curvature, spec.dim
    )
    cov = spec.variance * np.eye(spec.dim)
    clamps_before = diagnostics.ball_clamps
    blocks = []
    for k in range(spec.num_classes):
        # One independent counter-based substream per (split, class) pair, so
        # the draws do not depend on generation order or chunking.
        ss = np.random.SeedSequence(spec.seed, spawn_key=(split_idx, k))
        rng = np.random.Generator(np.random.Philox(ss))
        wspec = WrappedNormalSpec(mean=means[k], covariance=cov)
        blocks.append(sample_wrapped_normal(wspec, count, rng, spec.curvature))
    points = (
        np.concatenate(blocks, axis=0)
        if blocks
        else np.empty((0, spec.dim), dtype=np.float64)
    )
    labels = np.repeat(np.arange(spec.num_classes, dtype=np.int64), count)
    num_clamped = diagnostics.ball_clamps - clamps_before
    return LabeledDataset(points=points, labels=labels, split=split, num_clamped=num_clamped)


def generate_dataset(spec: DatasetSpec) -> tuple[LabeledDataset, LabeledDataset]:
    """Generate the train and test splits. Same spec, same bytes, always."""
    train = _generate_split(spec, 0, "train")
    test = _generate_split(spec, 1, "test")
    return train, test


def write_dataset_csv(dataset: LabeledDataset, path) -> None:
    """Write ``x0,...,x{n-1},label`` rows, coordinates at 17 significant digits."""
    n = dataset.points.shape[1]
    header = ",".join([f"x{i}" for i in range(n)] + ["label"])
    lines = [header]
    for row, label in zip(dataset.points, dataset.labels):
        lines.append(",".join(f"{v:.17g}" for v in row) + f",{int(label)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dataset_csv(path, split: str = "train") -> LabeledDataset:
    """Read a dataset written by :func:`write_dataset_csv`. Lossless for
    float64 because 17 significant digits round-trip exactly."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-1] != "label" or len(header) < 2:
            raise ValueError(f"{path}: not a dataset file (bad header {header!r})")
        n = len(header) - 1
        if header[:n] != [f"x{i}" for i in range(n)]:
            raise ValueError(f"{path}: unexpected coordinate columns {header[:n]!r}")
        coords = []
        labels = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 1:
                raise ValueError(f"{path}:{lineno}: expected {n + 1} fields, got {len(row)}")
            coords.append([float(v) for v in row[:n]])
            labels.append(int(row[n]))
    points = np.asarray(coords, dtype=np.float64).reshape(len(labels), n)
    return LabeledDataset(
        points=points,
        labels=np.asarray(labels, dtype=np.int64),
        split=split,
        num_clamped=None,
    )
