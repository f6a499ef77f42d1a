"""Gradient attacks on Poincare-ball classifiers with hyperbolic-distance
budgets.

Two families, each in single-step (FGM) and iterated-projected (PGD) form:

* Riemannian: steps follow geodesics via the exponential map, projection is
  the geodesic pullback onto the budget ball. The step size
  ``eps / (lambda_x ||g||)`` lands exactly at hyperbolic distance eps.
* Euclidean: steps are straight lines in ball coordinates; the step length
  is calibrated by a safeguarded Newton solve so the endpoint still sits at
  hyperbolic distance eps. The iterated variant projects back along the
  straight segment to the original input with the same solver.

The Newton solve exploits a closed form: with y = x + t g,
``||(-x) (+) y|| = ||x - y|| / sqrt(P(t))`` where P is the quadratic
``(1 - c||x||^2)^2 + 2 c t <x,g> (c||x||^2 - 1) + t^2 c^2 ||x||^2 ||g||^2``,
so the distance along the ray and its derivative are cheap scalar
expressions and the objective is monotone in t (the sublevel sets of the
distance are nested Euclidean balls around x, so the ray crosses each
sphere once).

All attack entry points are batched: ``x`` may be one point (n,) or a
matrix (N, n). Zero gradients never error; the sample is left in place and
flagged.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import (
    BALL_MARGIN,
    _arr,
    _cval,
    conformal_factor,
    distance,
    exp_map,
    log_map,
    project_into_ball,
    project_to_hyperbolic_ball,
)
from .model import MlrParams, ObjectiveKind, grad_input, predict

__all__ = [
    "ZERO_GRAD_NORM",
    "CHUNK_SIZE",
    "AttackFamily",
    "NewtonConfig",
    "StepSizeRule",
    "AttackSpec",
    "AttackResult",
    "RecordSet",
    "NumericFailureError",
    "AttackExecutionError",
    "fgm_riemannian",
    "fgm_euclidean_l2",
    "fgm_euclidean_hypcal",
    "pgd_riemannian",
    "pgd_euclidean",
    "calibrate_pullback_step",
    "run_attack",
    "write_records_csv",
    "read_records_csv",
    "worker_count",
]

# Gradients below this Euclidean norm give no usable direction.
ZERO_GRAD_NORM = 1e-12
# Fixed batch granularity for parallel runs; a constant chunk size keeps the
# output bytes identical whatever the worker count.
CHUNK_SIZE = 4096


class NumericFailureError(ArithmeticError):
    """A calibration solve failed beyond the bisection fallback."""


class AttackExecutionError(RuntimeError):
    """An attack aborted; carries the id of the failing sample."""

    def __init__(self, sample_id: int, cause: Exception):
        self.sample_id = int(sample_id)
        super().__init__(f"attack failed on sample {sample_id}: {cause}")


class AttackFamily(Enum):
    EUCLIDEAN_FGM = "euclidean_fgm"
    HYPERBOLIC_FGM = "hyperbolic_fgm"
    EUCLIDEAN_PGD = "euclidean_pgd"
    HYPERBOLIC_PGD = "hyperbolic_pgd"


@dataclass(frozen=True)
class NewtonConfig:
    """Safeguarded-Newton settings for the distance calibration.

    ``tol`` is relative to the budget: the solve stops once
    ``|d - eps| <= tol * eps``.
    """

    max_iter: int = 50
    tol: float = 1e-10

    def __post_init__(self):
        if self.max_iter < 1 or not (self.tol > 0):
            raise ValueError("need max_iter >= 1 and tol > 0")


@dataclass(frozen=True)
class StepSizeRule:
    """Per-step size policy for PGD.

    ``exact_budget`` applies the single-step FGM calibration at every
    iterate. ``fixed`` uses a constant step: ``alpha`` an absolute tangent
    scale, or ``alpha_scale`` a multiple of the budget (the usual choice is
    half the budget, ``alpha_scale = 0.5``).
    """

    kind: str = "exact_budget"
    alpha: float | None = None
    alpha_scale: float | None = None

    def __post_init__(self):
        if self.kind not in ("exact_budget", "fixed"):
            raise ValueError(f"unknown step rule {self.kind!r}")
        if self.kind == "fixed":
            given = (self.alpha is not None) + (self.alpha_scale is not None)
            if given != 1:
                raise ValueError("fixed rule needs exactly one of alpha / alpha_scale")
            val = self.alpha if self.alpha is not None else self.alpha_scale
            if not (val > 0):
                raise ValueError("fixed step must be positive")
        elif self.alpha is not None or self.alpha_scale is not None:
            raise ValueError("exact_budget takes no step parameters")

    def resolve(self, eps: float) -> float:
        if self.kind != "fixed":
            raise ValueError("only fixed rules resolve to a constant step")
        return self.alpha if self.alpha is not None else self.alpha_scale * eps


@dataclass(frozen=True)
class AttackSpec:
    """Fully determines one attack run."""

    family: AttackFamily
    objective: ObjectiveKind
    epsilon: float
    steps: int = 1
    step_rule: StepSizeRule = field(default_factory=StepSizeRule)
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise ValueError("attack budget epsilon must be positive")
        if self.steps < 1:
            raise ValueError("need at least one step")
        if self.family in (AttackFamily.EUCLIDEAN_FGM, AttackFamily.HYPERBOLIC_FGM):
            if self.steps != 1:
                raise ValueError("FGM is single-step; use a PGD family for steps > 1")
            if self.step_rule.kind != "exact_budget":
                raise ValueError("FGM always uses the exact-budget step")


@dataclass(frozen=True)
class AttackResult:
    """Outcome of one attack call; every field is batched over the inputs.

    ``newton_converged`` is False for samples whose calibration needed the
    bisection fallback (Riemannian attacks never solve, so it stays True).
    """

    adversarial: np.ndarray
    achieved_distance: np.ndarray
    steps_taken: np.ndarray
    zero_gradient: np.ndarray
    newton_converged: np.ndarray


def _batchify(x, y):
    X = _arr(x)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    Y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if Y.shape[0] != X.shape[0]:
        raise ValueError("inputs and labels disagree in length")
    return X, Y, single


def _squeeze_result(res: AttackResult, single: bool) -> AttackResult:
    if not single:
        return res
    return AttackResult(
        adversarial=res.adversarial[0],
        achieved_distance=res.achieved_distance[0],
        steps_taken=res.steps_taken[0],
        zero_gradient=res.zero_gradient[0],
        newton_converged=res.newton_converged[0],
    )


def fgm_riemannian(params: MlrParams, x, y, spec: AttackSpec) -> AttackResult:
    """Single geodesic step of length eps: ``exp_x(eps g / (lambda_x ||g||))``."""
    if spec.family is not AttackFamily.HYPERBOLIC_FGM:
        raise ValueError(f"spec family {spec.family} is not hyperbolic_fgm")
    X, Y, single = _batchify(x, y)
    c = params.curvature
    g = grad_input(spec.objective, params, X, Y)
    gn = np.linalg.norm(g, axis=-1)
    zero = gn < ZERO_GRAD_NORM
    gn_safe = np.where(zero, 1.0, gn)
    alpha = spec.epsilon / (conformal_factor(X, c) * gn_safe)
    adv = exp_map(X, alpha[:, None] * g, c)
    adv = np.where(zero[:, None], X, adv)
    return _squeeze_result(
        AttackResult(
            adversarial=adv,
            achieved_distance=distance(X, adv, c),
            steps_taken=np.where(zero, 0, 1),
            zero_gradient=zero,
            newton_converged=np.ones(X.shape[0], dtype=bool),
        ),
        single,
    )


def fgm_euclidean_l2(params: MlrParams, x, y, objective: ObjectiveKind, eps2: float, c=None) -> AttackResult:
    """Plain FGM with a Euclidean L2 budget: ``x + eps2 g / ||g||``, clamped
    into the ball. The reference attack the calibrated variant generalizes."""
    if not (eps2 >= 0):
        raise ValueError("Euclidean budget must be nonnegative")
    X, Y, single = _batchify(x, y)
    c = params.curvature if c is None else _cval(c)
    g = grad_input(objective, params, X, Y)
    gn = np.linalg.norm(g, axis=-1)
    zero = gn < ZERO_GRAD_NORM
    gn_safe = np.where(zero, 1.0, gn)
    adv = project_into_ball(X + (eps2 / gn_safe)[:, None] * g, c)
    adv = np.where(zero[:, None], X, adv)
    return _squeeze_result(
        AttackResult(
            adversarial=adv,
            achieved_distance=np.linalg.norm(adv - X, axis=-1),
            steps_taken=np.where(zero, 0, 1),
            zero_gradient=zero,
            newton_converged=np.ones(X.shape[0], dtype=bool),
        ),
        single,
    )


def _ray_distance_terms(X, g, c):
    x2 = np.sum(X * X, axis=-1)
    xg = np.sum(X * g, axis=-1)
    g2 = np.sum(g * g, axis=-1)
    return x2, xg, g2


def _newton_straight_line(X, g, eps, c, newton: NewtonConfig, active=None):
    """Solve d_c(x, x + t g) = eps for t >= 0, one root per row.

    Returns (t, converged) where ``converged`` is False for rows that fell
    back to bisection. Rows outside ``active`` (or with ~zero g) return 0.
    Raises :class:`NumericFailureError` if even the fallback cannot place
    the residual under a loose floor.
    """
    N = X.shape[0]
    sc = math.sqrt(c)
    x2, xg, g2 = _ray_distance_terms(X, g, c)
    gn = np.sqrt(g2)
    if active is None:
        active = np.ones(N, dtype=bool)
    active = active & (gn >= ZERO_GRAD_NORM)

    one = (1.0 - c * x2) ** 2
    lin = 2.0 * c * xg * (c * x2 - 1.0)
    quad = c * c * x2 * g2

    def f_and_deriv(t):
        P = one + t * (lin + t * quad)
        Pp = lin + 2.0 * t * quad
        m = sc * t * gn / np.sqrt(P)
        m = np.minimum(m, 1.0 - 1e-15)
        fv = (2.0 / sc) * np.arctanh(m) - eps
        dv = 2.0 * gn * (P - 0.5 * t * Pp) / (np.sqrt(P) * (P - c * t * t * g2))
        return fv, dv

    # cap: the parameter where the ray reaches just inside the boundary
    g2s = np.where(active, g2, 1.0)
    radius = (1.0 - 1e-13) / sc
    disc = xg * xg + g2s * (radius * radius - x2)
    t_cap = (-xg + np.sqrt(np.maximum(disc, 0.0))) / g2s
    t_cap = np.where(active, t_cap * (1.0 - 1e-12), 1.0)

    lam = conformal_factor(X, c)
    t = np.clip(eps / (lam * np.where(active, gn, 1.0)), 0.0, t_cap)
    lo = np.zeros(N)
    hi = t_cap.copy()
    tol = newton.tol * eps
    converged = np.zeros(N, dtype=bool)
    for _ in range(newton.max_iter):
        open_rows = active & ~converged
        if not np.any(open_rows):
            break
        fv, dv = f_and_deriv(t)
        done_now = np.abs(fv) <= tol
        lo = np.where(open_rows & (fv < 0), t, lo)
        hi = np.where(open_rows & (fv > 0), t, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_new = t - fv / dv
        bad = ~np.isfinite(t_new) | (t_new <= lo) | (t_new >= hi)
        # rows at tolerance still take one last in-bracket Newton step: the
        # quadratic polish parks the residual at rounding level
        t_new = np.where(bad, np.where(done_now, t, 0.5 * (lo + hi)), t_new)
        t = np.where(open_rows, t_new, t)
        converged |= open_rows & done_now

    needs_fallback = active & ~converged
    if np.any(needs_fallback):
        # plain bisection on the maintained bracket
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fv, _ = f_and_deriv(mid)
            lo = np.where(needs_fallback & (fv < 0), mid, lo)
            hi = np.where(needs_fallback & (fv >= 0), mid, hi)
            t = np.where(needs_fallback, mid, t)
        fv, _ = f_and_deriv(t)
        still_bad = needs_fallback & (np.abs(fv) > 1e-6 * eps)
        if np.any(still_bad):
            raise NumericFailureError(
                f"straight-line calibration failed on {np.count_nonzero(still_bad)} samples"
            )
    t = np.where(active, t, 0.0)
    return t, ~needs_fallback


def fgm_euclidean_hypcal(params: MlrParams, x, y, spec: AttackSpec) -> AttackResult:
    """Straight-line step whose length is Newton-calibrated so the endpoint
    sits at hyperbolic distance eps from the input."""
    if spec.family is not AttackFamily.EUCLIDEAN_FGM:
        raise ValueError(f"spec family {spec.family} is not euclidean_fgm")
    X, Y, single = _batchify(x, y)
    c = params.curvature
    g = grad_input(spec.objective, params, X, Y)
    gn = np.linalg.norm(g, axis=-1)
    zero = gn < ZERO_GRAD_NORM
    t, conv = _newton_straight_line(X, g, spec.epsilon, c, spec.newton, active=~zero)
    adv = project_into_ball(X + t[:, None] * g, c)
    adv = np.where(zero[:, None], X, adv)
    return _squeeze_result(
        AttackResult(
            adversarial=adv,
            achieved_distance=distance(X, adv, c),
            steps_taken=np.where(zero, 0, 1),
            zero_gradient=zero,
            newton_converged=conv | zero,
        ),
        single,
    )


def pgd_riemannian(params: MlrParams, x, y, spec: AttackSpec) -> AttackResult:
    """T geodesic steps, each followed by geodesic projection onto the
    budget ball around the original input."""
    if spec.family is not AttackFamily.HYPERBOLIC_PGD:
        raise ValueError(f"spec family {spec.family} is not hyperbolic_pgd")
    X, Y, single = _batchify(x, y)
    c = params.curvature
    eps = spec.epsilon
    cur = X.copy()
    N = X.shape[0]
    zero = np.zeros(N, dtype=bool)
    steps_taken = np.zeros(N, dtype=np.int64)
    active = np.ones(N, dtype=bool)
    for _ in range(spec.steps):
        g = grad_input(spec.objective, params, cur, Y)
        gn = np.linalg.norm(g, axis=-1)
        hit_zero = active & (gn < ZERO_GRAD_NORM)
        zero |= hit_zero
        active &= ~hit_zero
        if not np.any(active):
            break
        gn_safe = np.where(gn < ZERO_GRAD_NORM, 1.0, gn)
        if spec.step_rule.kind == "exact_budget":
            alpha = eps / (conformal_factor(cur, c) * gn_safe)
        else:
            alpha = np.full(N, spec.step_rule.resolve(eps))
        cand = exp_map(cur, alpha[:, None] * g, c)
        cand = project_to_hyperbolic_ball(X, cand, eps, c)
        cur = np.where(active[:, None], cand, cur)
        steps_taken += active
    return _squeeze_result(
        AttackResult(
            adversarial=cur,
            achieved_distance=distance(X, cur, c),
            steps_taken=steps_taken,
            zero_gradient=zero,
            newton_converged=np.ones(N, dtype=bool),
        ),
        single,
    )


def pgd_euclidean(params: MlrParams, x, y, spec: AttackSpec) -> AttackResult:
    """T straight-line steps; iterates beyond the budget are pulled back
    along the straight segment toward the original input until they sit on
    the budget sphere (the same scalar solve as the calibrated FGM)."""
    if spec.family is not AttackFamily.EUCLIDEAN_PGD:
        raise ValueError(f"spec family {spec.family} is not euclidean_pgd")
    X, Y, single = _batchify(x, y)
    c = params.curvature
    eps = spec.epsilon
    cur = X.copy()
    N = X.shape[0]
    zero = np.zeros(N, dtype=bool)
    steps_taken = np.zeros(N, dtype=np.int64)
    conv = np.ones(N, dtype=bool)
    active = np.ones(N, dtype=bool)
    for _ in range(spec.steps):
        g = grad_input(spec.objective, params, cur, Y)
        gn = np.linalg.norm(g, axis=-1)
        hit_zero = active & (gn < ZERO_GRAD_NORM)
        zero |= hit_zero
        active &= ~hit_zero
        if not np.any(active):
            break
        if spec.step_rule.kind == "exact_budget":
            t, step_conv = _newton_straight_line(cur, g, eps, c, spec.newton, active=active)
            conv &= step_conv | ~active
            cand = cur + t[:, None] * g
        else:
            alpha = spec.step_rule.resolve(eps)
            cand = cur + alpha * g
        cand = project_into_ball(cand, c)
        d = distance(X, cand, c)
        outside = active & (d > eps * (1.0 + 1e-12))
        if np.any(outside):
            delta = cand - X
            beta, proj_conv = _newton_straight_line(X, delta, eps, c, spec.newton, active=outside)
            conv &= proj_conv | ~outside
            pulled = project_into_ball(X + beta[:, None] * delta, c)
            cand = np.where(outside[:, None], pulled, cand)
        cur = np.where(active[:, None], cand, cur)
        steps_taken += active
    return _squeeze_result(
        AttackResult(
            adversarial=cur,
            achieved_distance=distance(X, cur, c),
            steps_taken=steps_taken,
            zero_gradient=zero,
            newton_converged=conv,
        ),
        single,
    )


def calibrate_pullback_step(x_img, g, eps_img: float, c, newton: NewtonConfig = NewtonConfig()):
    """Step size for attacks on models that lift inputs through ``exp_0``.

    The budget lives in the pre-image space: find alpha with
    ``||log_0(exp_{x_h}(alpha g)) - x_img||_2 = eps_img`` where
    ``x_h = exp_0(x_img)``. Returns (alpha, converged). The derivative is
    taken by central differences; a bisection fallback guards the solve.
    """
    x_img = _arr(x_img)
    g = _arr(g)
    c = _cval(c)
    if x_img.ndim != 1:
        raise ValueError("pullback calibration is per-sample")
    gn = float(np.linalg.norm(g))
    if gn < ZERO_GRAD_NORM:
        raise ValueError("pullback calibration needs a nonzero direction")
    if not (eps_img >= 0):
        raise ValueError("budget must be nonnegative")
    if eps_img == 0.0:
        return 0.0, True
    x_h = exp_map(np.zeros_like(x_img), x_img, c)

    def residual(alpha):
        moved = exp_map(x_h, alpha * g, c)
        back = log_map(np.zeros_like(moved), moved, c)
        return float(np.linalg.norm(back - x_img)) - eps_img

    # bracket the root: residual(0) = -eps < 0, grows without bound
    lo, flo = 0.0, -eps_img
    hi = eps_img / gn
    for _ in range(200):
        if residual(hi) > 0:
            break
        lo = hi
        hi *= 2.0
    else:
        raise NumericFailureError("could not bracket the pullback step")

    tol = newton.tol * eps_img
    alpha = min(max(eps_img / gn, lo), hi)
    converged = False
    for _ in range(newton.max_iter):
        r = residual(alpha)
        if abs(r) <= tol:
            converged = True
            break
        if r < 0:
            lo = alpha
        else:
            hi = alpha
        h = 1e-7 * max(abs(alpha), 1e-3)
        drda = (residual(alpha + h) - residual(alpha - h)) / (2.0 * h)
        step = alpha - r / drda if drda != 0 else float("nan")
        alpha = step if (math.isfinite(step) and lo < step < hi) else 0.5 * (lo + hi)
    if not converged:
        for _ in range(200):
            alpha = 0.5 * (lo + hi)
            if residual(alpha) < 0:
                lo = alpha
            else:
                hi = alpha
        if abs(residual(alpha)) > 1e-6 * eps_img:
            raise NumericFailureError("pullback calibration failed beyond fallback")
    return alpha, converged


@dataclass(frozen=True)
class RecordSet:
    """Per-sample evaluation rows, stored column-wise for bulk analysis."""

    sample_id: np.ndarray
    true_label: np.ndarray
    clean_pred: np.ndarray
    adv_pred: np.ndarray
    attack: np.ndarray
    objective: np.ndarray
    epsilon: np.ndarray
    achieved_distance: np.ndarray
    zero_gradient: np.ndarray
    clean_incorrect: np.ndarray

    def __post_init__(self):
        n = self.sample_id.shape[0]
        for name in (
            "true_label", "clean_pred", "adv_pred", "attack", "objective",
            "epsilon", "achieved_distance", "zero_gradient", "clean_incorrect",
        ):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"record column {name} has inconsistent length")

    def __len__(self) -> int:
        return self.sample_id.shape[0]

    @classmethod
    def concat(cls, sets) -> "RecordSet":
        sets = list(sets)
        if not sets:
            raise ValueError("nothing to concatenate")
        fields = {}
        for name in cls.__dataclass_fields__:
            fields[name] = np.concatenate([getattr(s, name) for s in sets])
        return cls(**fields)

    def filter(self, mask: np.ndarray) -> "RecordSet":
        return RecordSet(**{
            name: getattr(self, name)[mask] for name in self.__dataclass_fields__
        })


_DISPATCH = {
    AttackFamily.HYPERBOLIC_FGM: fgm_riemannian,
    AttackFamily.EUCLIDEAN_FGM: fgm_euclidean_hypcal,
    AttackFamily.HYPERBOLIC_PGD: pgd_riemannian,
    AttackFamily.EUCLIDEAN_PGD: pgd_euclidean,
}


def worker_count() -> int:
    """Worker cap from ``HYPATK_THREADS``; 0 or unset means auto."""
    raw = os.environ.get("HYPATK_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"HYPATK_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise ValueError("HYPATK_THREADS must be >= 0")
    if n == 0:
        return min(os.cpu_count() or 1, 8)
    return n


def run_attack(spec: AttackSpec, params: MlrParams, dataset) -> RecordSet:
    """Attack every sample of the dataset and record the outcomes.

    Samples the clean model already misclassifies are attacked all the
    same, flagged ``clean_incorrect``. Work is split into fixed-size chunks
    handed to a thread pool; chunking never depends on the worker count, so
    the records are byte-identical for any ``HYPATK_THREADS`` setting.
    """
    X = _arr(dataset.points)
    Y = np.asarray(dataset.labels, dtype=np.int64)
    N = X.shape[0]
    if N == 0:
        raise ValueError("cannot attack an empty dataset")
    fn = _DISPATCH[spec.family]

    bounds = [(i, min(i + CHUNK_SIZE, N)) for i in range(0, N, CHUNK_SIZE)]

    def work(xs, ys):
        cln = predict(params, xs)
        res = fn(params, xs, ys, spec)
        return cln, res, predict(params, res.adversarial)

    def one_chunk(span):
        i0, i1 = span
        try:
            return work(X[i0:i1], Y[i0:i1])
        except Exception as exc:
            # replay row by row to name the offender
            for j in range(i0, i1):
                try:
                    work(X[j : j + 1], Y[j : j + 1])
                except Exception as inner:
                    raise AttackExecutionError(j, inner) from inner
            raise AttackExecutionError(i0, exc) from exc

    workers = worker_count()
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_chunk, bounds))
    else:
        results = [one_chunk(b) for b in bounds]

    clean = np.concatenate([r[0] for r in results])
    adv_pred = np.concatenate([r[2] for r in results])
    dist = np.concatenate([r[1].achieved_distance for r in results])
    zero = np.concatenate([r[1].zero_gradient for r in results])
    n = N
    return RecordSet(
        sample_id=np.arange(n, dtype=np.int64),
        true_label=Y.copy(),
        clean_pred=clean,
        adv_pred=adv_pred,
        attack=np.full(n, spec.family.value, dtype="U16"),
        objective=np.full(n, spec.objective.value, dtype="U4"),
        epsilon=np.full(n, float(spec.epsilon)),
        achieved_distance=dist,
        zero_gradient=zero,
        clean_incorrect=clean != Y,
    )


RECORDS_HEADER = (
    "sample_id,true_label,clean_pred,adv_pred,attack,objective,"
    "epsilon,achieved_distance,zero_gradient,clean_incorrect"
)


def write_records_csv(records: RecordSet, path) -> None:
    lines = [RECORDS_HEADER]
    for i in range(len(records)):
        lines.append(
            f"{records.sample_id[i]},{records.true_label[i]},"
            f"{records.clean_pred[i]},{records.adv_pred[i]},"
            f"{records.attack[i]},{records.objective[i]},"
            f"{records.epsilon[i]:.17g},{records.achieved_distance[i]:.17g},"
            f"{int(records.zero_gradient[i])},{int(records.clean_incorrect[i])}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_records_csv(path) -> RecordSet:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != RECORDS_HEADER:
            raise ValueError(f"{path}: not a records file (header {header!r})")
        cols = [[] for _ in range(10)]
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 10:
                raise ValueError(f"{path}:{lineno}: expected 10 fields, got {len(parts)}")
            for store, value in zip(cols, parts):
                store.append(value)
    return RecordSet(
        sample_id=np.asarray(cols[0], dtype=np.int64),
        true_label=np.asarray(cols[1], dtype=np.int64),
        clean_pred=np.asarray(cols[2], dtype=np.int64),
        adv_pred=np.asarray(cols[3], dtype=np.int64),
        attack=np.asarray(cols[4], dtype="U16"),
        objective=np.asarray(cols[5], dtype="U4"),
        epsilon=np.asarray(cols[6], dtype=np.float64),
        achieved_distance=np.asarray(cols[7], dtype=np.float64),
        zero_gradient=np.asarray(cols[8], dtype=np.int64).astype(bool),
        clean_incorrect=np.asarray(cols[9], dtype=np.int64).astype(bool),
    )
