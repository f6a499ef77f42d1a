"""Hyperbolic multinomial logistic regression on the Poincare ball.

Each class k owns a geodesic hyperplane through base point ``p_k`` with
normal ``a_k`` (an ambient tangent vector at ``p_k``); the class logit is a
scaled signed distance to that hyperplane,

    s_k(x) = (lambda_{p_k} ||a_k|| / sqrt(c))
             * asinh( 2 sqrt(c) <z, a_k> / ((1 - c||z||^2) ||a_k||) ),

with ``z = (-p_k) (+) x``. Gradients with respect to the input and to both
parameter blocks are hand-derived below and validated against central finite
differences in the test suite; training is Riemannian SGD (exponential-map
updates for the base points, plain SGD for the normals).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .geometry import (
    DENOM_FLOOR,
    BoundaryProximityError,
    _arr,
    _cval,
    diagnostics,
    exp_map,
    project_into_ball,
)

__all__ = [
    "InvalidParamsError",
    "ObjectiveKind",
    "MlrParams",
    "TrainConfig",
    "mlr_logits",
    "predict",
    "objective_value",
    "objective_grad_logits",
    "grad_input",
    "grad_logits_input",
    "grad_params",
    "rsgd_step",
    "init_params",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]


class InvalidParamsError(ValueError):
    """Model parameters violate an invariant (zero normal, shape mismatch)."""


class ObjectiveKind(Enum):
    """Attack/training objectives: cross entropy, negative max logit,
    second-largest logit, least logit."""

    CE = "ce"
    NFL = "nfl"
    SL = "sl"
    LL = "ll"


@dataclass(frozen=True)
class MlrParams:
    """Per-class hyperplane parameters: base points ``p`` and normals ``a``,
    both of shape (num_classes, dim)."""

    p: np.ndarray
    a: np.ndarray
    curvature: float

    def __post_init__(self):
        p = _arr(self.p)
        a = _arr(self.a)
        c = _cval(self.curvature)
        if p.ndim != 2 or p.shape != a.shape:
            raise InvalidParamsError(f"p {p.shape} and a {a.shape} must both be (C, n)")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(a))):
            raise InvalidParamsError("parameters must be finite")
        if np.any(np.linalg.norm(a, axis=-1) == 0.0):
            raise InvalidParamsError("hyperplane normals must be nonzero")
        object.__setattr__(self, "p", project_into_ball(p, c))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "curvature", c)

    @property
    def num_classes(self) -> int:
        return self.p.shape[0]

    @property
    def dim(self) -> int:
        return self.p.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """Riemannian SGD settings.

    ``loss_reduction`` names the batch objective the learning rate applies
    to: "sum" steps along the gradient of the summed batch loss, "mean"
    along the batch mean. Parameter gradients themselves are always batch
    means; the reduction only scales the step.
    """

    learning_rate: float
    batch_size: int
    epochs: int
    seed: int
    loss_reduction: str = "sum"

    def __post_init__(self):
        if not (self.learning_rate > 0):
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch size must be >= 1 and epochs >= 0")
        if self.loss_reduction not in ("sum", "mean"):
            raise ValueError(f"unknown loss reduction {self.loss_reduction!r}")


class _Forward(NamedTuple):
    """Intermediates of the batched logit computation, kept for gradients.

    Shapes: X (N, n); u, a (C, n); z (N, C, n); everything else (N, C) or
    (C,) as annotated inline.
    """

    s: np.ndarray
    z: np.ndarray
    w: np.ndarray
    za: np.ndarray
    q: np.ndarray
    na: np.ndarray  # (C,)
    lam: np.ndarray  # (C,)
    A: np.ndarray
    B: np.ndarray  # (C,)
    D: np.ndarray
    u: np.ndarray  # (C,)
    X: np.ndarray
    x2: np.ndarray  # (N,)
    u2: np.ndarray  # (C,)


def _forward(params: MlrParams, X: np.ndarray) -> _Forward:
    c = params.curvature
    sc = math.sqrt(c)
    p, a = params.p, params.a
    u = -p
    x2 = np.sum(X * X, axis=-1)
    u2 = np.sum(u * u, axis=-1)
    xu = X @ u.T
    A = 1.0 + 2.0 * c * xu + c * x2[:, None]
    B = 1.0 - c * u2
    D = 1.0 + 2.0 * c * xu + (c * c) * u2[None, :] * x2[:, None]
    if np.any(D < DENOM_FLOOR):
        raise BoundaryProximityError(
            "Mobius denominator degenerated inside the classifier forward pass"
        )
    z = (A[..., None] * u[None, :, :] + B[None, :, None] * X[:, None, :]) / D[..., None]
    w = 1.0 - c * np.sum(z * z, axis=-1)
    za = np.einsum("nck,ck->nc", z, a)
    na = np.linalg.norm(a, axis=-1)
    lam = 2.0 / (1.0 - c * np.sum(p * p, axis=-1))
    q = 2.0 * sc * za / (w * na[None, :])
    s = (lam * na / sc)[None, :] * np.arcsinh(q)
    return _Forward(s, z, w, za, q, na, lam, A, B, D, u, X, x2, u2)


def mlr_logits(params: MlrParams, x) -> np.ndarray:
    """Logits for one point (n,) -> (C,) or a batch (N, n) -> (N, C)."""
    x = _arr(x)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[-1] != params.dim:
        raise InvalidParamsError(f"input dim {X.shape[-1]} != model dim {params.dim}")
    s = _forward(params, X).s
    return s[0] if single else s


def predict(params: MlrParams, x) -> np.ndarray:
    """Argmax class, lowest index winning ties. (n,) -> int, (N, n) -> (N,)."""
    s = mlr_logits(params, x)
    if s.ndim == 1:
        return int(np.argmax(s))
    return np.argmax(s, axis=-1)


def _as_batch(logits, y):
    s = _arr(logits)
    single = s.ndim == 1
    S = s[None, :] if single else s
    Y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if Y.shape[0] != S.shape[0]:
        raise ValueError(f"labels {Y.shape} do not match logits {S.shape}")
    if np.any(Y < 0) or np.any(Y >= S.shape[1]):
        raise ValueError("label out of range")
    return S, Y, single


def _log_softmax(S: np.ndarray) -> np.ndarray:
    m = np.max(S, axis=-1, keepdims=True)
    return S - m - np.log(np.sum(np.exp(S - m), axis=-1, keepdims=True))


def objective_value(kind: ObjectiveKind, logits, y=None):
    """Attack objective J for given logits.

    CE needs the true label; the three logit objectives ignore it. Accepts
    a single logit row or a batch.
    """
    if kind is ObjectiveKind.SL and _arr(logits).shape[-1] < 2:
        raise ValueError("second-largest-logit objective needs at least 2 classes")
    if kind is ObjectiveKind.CE and y is None:
        raise ValueError("cross entropy needs the true label")
    S, Y, single = _as_batch(logits, y if y is not None else np.zeros(np.atleast_2d(logits).shape[0]))
    if kind is ObjectiveKind.CE:
        vals = -np.take_along_axis(_log_softmax(S), Y[:, None], axis=-1)[:, 0]
    elif kind is ObjectiveKind.NFL:
        vals = -np.max(S, axis=-1)
    elif kind is ObjectiveKind.SL:
        order = np.argsort(-S, axis=-1, kind="stable")
        vals = np.take_along_axis(S, order[:, 1:2], axis=-1)[:, 0]
    elif kind is ObjectiveKind.LL:
        vals = np.min(S, axis=-1)
    else:  # pragma: no cover - closed enumeration
        raise ValueError(f"unknown objective {kind!r}")
    return float(vals[0]) if single else vals


def objective_grad_logits(kind: ObjectiveKind, logits, y=None) -> np.ndarray:
    """dJ/dlogits, batched. Ties in the argmax/argmin objectives are broken
    toward the lowest class index and counted in the diagnostics."""
    if kind is ObjectiveKind.CE and y is None:
        raise ValueError("cross entropy needs the true label")
    S, Y, single = _as_batch(logits, y if y is not None else np.zeros(np.atleast_2d(logits).shape[0]))
    N, C = S.shape
    if kind is ObjectiveKind.CE:
        W = np.exp(_log_softmax(S))
        W[np.arange(N), Y] -= 1.0
    else:
        W = np.zeros((N, C))
        if kind is ObjectiveKind.NFL:
            top = np.max(S, axis=-1)
            ties = np.sum(S == top[:, None], axis=-1) > 1
            W[np.arange(N), np.argmax(S, axis=-1)] = -1.0
        elif kind is ObjectiveKind.SL:
            if C < 2:
                raise ValueError("second-largest-logit objective needs at least 2 classes")
            order = np.argsort(-S, axis=-1, kind="stable")
            first = np.take_along_axis(S, order[:, 0:1], axis=-1)[:, 0]
            second = np.take_along_axis(S, order[:, 1:2], axis=-1)[:, 0]
            ties = first == second
            if C > 2:
                third = np.take_along_axis(S, order[:, 2:3], axis=-1)[:, 0]
                ties = ties | (second == third)
            W[np.arange(N), order[:, 1]] = 1.0
        else:  # LL
            bottom = np.min(S, axis=-1)
            ties = np.sum(S == bottom[:, None], axis=-1) > 1
            W[np.arange(N), np.argmin(S, axis=-1)] = 1.0
        diagnostics.count_ties(np.count_nonzero(ties))
    return W[0] if single else W


def _logit_cotangents(fw: _Forward, a: np.ndarray, c: float, W=None) -> np.ndarray:
    """d s_k / d z_k as an (N, C, n) array, optionally weighted per (n, k).

        ds/dz = (2 lam_p / (w^2 sqrt(1 + q^2))) (w a + 2c <z,a> z)
    """
    r = np.sqrt(1.0 + fw.q * fw.q)
    coef = 2.0 * fw.lam[None, :] / (fw.w * fw.w * r)
    if W is not None:
        coef = W * coef
    return coef[..., None] * (
        fw.w[..., None] * a[None, :, :] + 2.0 * c * fw.za[..., None] * fw.z
    )


def _pullback_to_input(fw: _Forward, G: np.ndarray, c: float) -> np.ndarray:
    """Pull per-class cotangents at z back through z = u (+) x and sum over
    classes.

    With A, B, D the Mobius-addition scalars, dA/dx = 2c(u + x) and
    dD/dx = 2c u + 2c^2 ||u||^2 x, so J_x^T G =
    (<u,G> dA/dx + B G - <z,G> dD/dx) / D.
    """
    X, u = fw.X, fw.u
    uG = np.einsum("nck,ck->nc", G, u)
    zG = np.einsum("nck,nck->nc", fw.z, G)
    gradA = 2.0 * c * (u[None, :, :] + X[:, None, :])
    gradD = 2.0 * c * u[None, :, :] + 2.0 * c * c * fw.u2[None, :, None] * X[:, None, :]
    contrib = (
        uG[..., None] * gradA + fw.B[None, :, None] * G - zG[..., None] * gradD
    ) / fw.D[..., None]
    return np.sum(contrib, axis=1)


def grad_logits_input(params: MlrParams, x) -> np.ndarray:
    """Per-class input gradients of every logit: (C, n) for a single point,
    (N, C, n) for a batch. Building block shared by all objectives."""
    x = _arr(x)
    single = x.ndim == 1
    X = x[None, :] if single else x
    fw = _forward(params, X)
    c = params.curvature
    G = _logit_cotangents(fw, params.a, c)
    X_, u = fw.X, fw.u
    uG = np.einsum("nck,ck->nc", G, u)
    zG = np.einsum("nck,nck->nc", fw.z, G)
    gradA = 2.0 * c * (u[None, :, :] + X_[:, None, :])
    gradD = 2.0 * c * u[None, :, :] + 2.0 * c * c * fw.u2[None, :, None] * X_[:, None, :]
    out = (
        uG[..., None] * gradA + fw.B[None, :, None] * G - zG[..., None] * gradD
    ) / fw.D[..., None]
    return out[0] if single else out


def grad_input(kind: ObjectiveKind, params: MlrParams, x, y=None) -> np.ndarray:
    """Euclidean (ambient) gradient of the objective with respect to the
    input coordinates; shape matches ``x``."""
    x = _arr(x)
    single = x.ndim == 1
    X = x[None, :] if single else x
    fw = _forward(params, X)
    W = objective_grad_logits(kind, fw.s, y)
    if W.ndim == 1:
        W = W[None, :]
    c = params.curvature
    G = _logit_cotangents(fw, params.a, c, W=W)
    gx = _pullback_to_input(fw, G, c)
    return gx[0] if single else gx


def grad_params(params: MlrParams, batch_x, batch_y) -> tuple[np.ndarray, np.ndarray]:
    """Mean cross-entropy gradients over the batch for every ``p_k`` and
    ``a_k``, both (C, n).

    The batch is first put into a canonical row order, so any permutation
    of the same samples reduces in the same order and yields bit-identical
    gradients.
    """
    X = np.atleast_2d(_arr(batch_x))
    Y = np.atleast_1d(np.asarray(batch_y, dtype=np.int64))
    if X.shape[0] == 0:
        raise ValueError("gradient of an empty batch is undefined")
    if X.shape[0] != Y.shape[0]:
        raise ValueError("batch coordinates and labels disagree in length")
    order = np.lexsort((Y,) + tuple(X[:, i] for i in range(X.shape[1] - 1, -1, -1)))
    X, Y = X[order], Y[order]

    c = params.curvature
    sc = math.sqrt(c)
    fw = _forward(params, X)
    N = X.shape[0]
    W = objective_grad_logits(ObjectiveKind.CE, fw.s, Y) / N

    a, p = params.a, params.p
    r = np.sqrt(1.0 + fw.q * fw.q)
    asq = np.arcsinh(fw.q)

    # normals: d s/d a = (lam/sqrt(c)) asinh(q) a/na
    #                  + (2 lam / (w r)) (z - za a / na^2)
    t1 = (fw.lam / sc)[None, :] * asq
    t2 = 2.0 * fw.lam[None, :] / (fw.w * r)
    ga = (
        (np.sum(W * t1, axis=0) / fw.na)[:, None] * a
        + np.einsum("nc,nck->ck", W * t2, fw.z)
        - (np.sum(W * t2 * fw.za, axis=0) / (fw.na * fw.na))[:, None] * a
    )

    # base points, part one: the conformal prefactor. d lam/d p = c lam^2 p.
    t3 = (c * fw.lam * fw.lam * fw.na / sc)[None, :] * asq
    gp = np.sum(W * t3, axis=0)[:, None] * p

    # part two: through z = u (+) x with u = -p. dA/du = 2c x,
    # dB/du = -2c u, dD/du = 2c x + 2c^2 ||x||^2 u; d u/d p = -I.
    G = _logit_cotangents(fw, a, c, W=W)
    uG = np.einsum("nck,ck->nc", G, fw.u)
    zG = np.einsum("nck,nck->nc", fw.z, G)
    xG = np.einsum("nck,nk->nc", G, X)
    ju = (
        (2.0 * c * uG / fw.D)[..., None] * X[:, None, :]
        + (fw.A / fw.D)[..., None] * G
        - (2.0 * c * xG / fw.D)[..., None] * fw.u[None, :, :]
        - (zG / fw.D)[..., None]
        * (2.0 * c * X[:, None, :] + 2.0 * c * c * fw.x2[:, None, None] * fw.u[None, :, :])
    )
    gp = gp - np.sum(ju, axis=0)
    return gp, ga


def rsgd_step(params: MlrParams, grad_p, grad_a, lr: float) -> MlrParams:
    """One Riemannian SGD update.

    Base points move along the manifold: the Euclidean gradient is rescaled
    by the inverse conformal metric, ``((1 - c||p||^2)/2)^2``, and fed to
    the exponential map. Normals are free Euclidean parameters and take a
    plain SGD step; they are not re-transported when their base moves.
    """
    c = params.curvature
    grad_p = _arr(grad_p)
    grad_a = _arr(grad_a)
    p2 = np.sum(params.p * params.p, axis=-1)
    scale = ((1.0 - c * p2) / 2.0) ** 2
    new_p = exp_map(params.p, -lr * scale[:, None] * grad_p, c)
    new_a = params.a - lr * grad_a
    return MlrParams(p=new_p, a=new_a, curvature=c)


def init_params(num_classes: int, dim: int, curvature, rng) -> MlrParams:
    """Near-origin start: p_k = exp_0(0.01 u_k) with u_k standard normal,
    a_k standard normal scaled to unit norm."""
    c = _cval(curvature)
    u = rng.standard_normal((num_classes, dim))
    p = exp_map(np.zeros((num_classes, dim)), 0.01 * u, c)
    a = rng.standard_normal((num_classes, dim))
    a = a / np.linalg.norm(a, axis=-1, keepdims=True)
    return MlrParams(p=p, a=a, curvature=c)


def train(dataset, config: TrainConfig, curvature, num_classes: int | None = None):
    """Mini-batch Riemannian SGD over shuffled epochs.

    The dataset carries no curvature of its own, so the model curvature is
    an explicit argument. Returns the trained parameters and a history of
    (epoch, mean_ce, train_accuracy) rows, one per epoch, evaluated on the
    full training set after that epoch's updates. Deterministic for a fixed
    config: batches are drawn from a counter-based generator seeded by
    ``config.seed`` and consumed in ascending sample order within a batch.
    """
    X = _arr(dataset.points)
    Y = np.asarray(dataset.labels, dtype=np.int64)
    N = X.shape[0]
    if N == 0:
        raise ValueError("cannot train on an empty dataset")
    C = int(num_classes) if num_classes is not None else int(np.max(Y)) + 1
    if C < 2:
        raise ValueError("need at least two classes to train")
    c = _cval(curvature)

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
    params = init_params(C, X.shape[1], c, rng)

    history: list[tuple[int, float, float]] = []
    for epoch in range(config.epochs):
        perm = rng.permutation(N)
        for start in range(0, N, config.batch_size):
            idx = np.sort(perm[start : start + config.batch_size])
            gp, ga = grad_params(params, X[idx], Y[idx])
            step = config.learning_rate
            if config.loss_reduction == "sum":
                step = step * idx.shape[0]
            params = rsgd_step(params, gp, ga, step)
        s = mlr_logits(params, X)
        mean_ce = float(np.mean(objective_value(ObjectiveKind.CE, s, Y)))
        acc = float(np.mean(np.argmax(s, axis=-1) == Y))
        history.append((epoch, mean_ce, acc))
    return params, history


def save_checkpoint(params: MlrParams, path) -> None:
    """Write the checkpoint JSON; numbers carry 17 significant digits so the
    reload is bit-exact."""

    def row(vals):
        return "[" + ", ".join(f"{v:.17g}" for v in vals) + "]"

    lines = [
        "{",
        f'  "curvature": {params.curvature:.17g},',
        f'  "dim": {params.dim},',
        f'  "num_classes": {params.num_classes},',
        '  "p": [' + ", ".join(row(r) for r in params.p) + "],",
        '  "a": [' + ", ".join(row(r) for r in params.a) + "]",
        "}",
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> MlrParams:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("curvature", "dim", "num_classes", "p", "a"):
        if key not in doc:
            raise ValueError(f"{path}: checkpoint missing field {key!r}")
    p = np.asarray(doc["p"], dtype=np.float64)
    a = np.asarray(doc["a"], dtype=np.float64)
    if p.shape != (doc["num_classes"], doc["dim"]) or a.shape != p.shape:
        raise ValueError(f"{path}: checkpoint arrays do not match declared shape")
    return MlrParams(p=p, a=a, curvature=float(doc["curvature"]))
