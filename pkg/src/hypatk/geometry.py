"""Poincare ball primitives: Mobius gyrovector operations, exp/log maps,
parallel transport, distances, and the numerical-safety policy everything
else relies on.

Conventions
-----------
* A point is a float64 array whose last axis holds the ball coordinates;
  leading axes broadcast, so every function here works on single points and
  on batches alike.
* Curvature is a runtime parameter. The space has constant curvature ``-c``
  with ``c > 0``; points live in the open ball of radius ``1/sqrt(c)``.
* Constructed points are kept at Euclidean norm <= ``(1 - BALL_MARGIN)/sqrt(c)``
  and atanh arguments are capped at ``1 - ATANH_CLAMP``. Both clamps are
  counted in :data:`diagnostics` instead of failing silently.
* All operations are pure; nothing here mutates its inputs.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BALL_MARGIN",
    "ATANH_CLAMP",
    "DENOM_FLOOR",
    "BoundaryProximityError",
    "Curvature",
    "PoincarePoint",
    "TangentVector",
    "diagnostics",
    "conformal_factor",
    "mobius_add",
    "gyration",
    "distance",
    "exp_map",
    "log_map",
    "parallel_transport",
    "project_into_ball",
    "project_to_hyperbolic_ball",
]

# Boundary-safety constants. atanh and the Mobius denominators blow up at the
# boundary, so constructed points are clamped strictly inside the ball.
BALL_MARGIN = 1e-5
ATANH_CLAMP = 1e-12
DENOM_FLOOR = 1e-12


class BoundaryProximityError(ArithmeticError):
    """A Mobius denominator degenerated; the operands hug the boundary."""


class _Diagnostics:
    """Counters for numerical-safety clamps.

    Clamping never changes control flow, but callers that care (tests, the
    sampling clamp-rate report) can reset and inspect these counters.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.atanh_clamps = 0
        self.ball_clamps = 0
        self.gradient_ties = 0

    def reset(self):
        with self._lock:
            self.atanh_clamps = 0
            self.ball_clamps = 0
            self.gradient_ties = 0

    def count_atanh(self, n):
        if n:
            with self._lock:
                self.atanh_clamps += int(n)

    def count_ball(self, n):
        if n:
            with self._lock:
                self.ball_clamps += int(n)

    def count_ties(self, n):
        if n:
            with self._lock:
                self.gradient_ties += int(n)


diagnostics = _Diagnostics()


@dataclass(frozen=True)
class Curvature:
    """Positive curvature magnitude ``c``; the space has curvature ``-c``."""

    c: float

    def __post_init__(self):
        if not (isinstance(self.c, (int, float)) and math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"curvature must be a finite positive real, got {self.c!r}")
        object.__setattr__(self, "c", float(self.c))

    @property
    def sqrt(self) -> float:
        return math.sqrt(self.c)

    @property
    def ball_radius(self) -> float:
        """Euclidean radius of the open ball, ``1/sqrt(c)``."""
        return 1.0 / math.sqrt(self.c)

    def __float__(self) -> float:
        return self.c


def _cval(c) -> float:
    """Accept a Curvature or a raw positive float."""
    if isinstance(c, Curvature):
        return c.c
    c = float(c)
    if not (math.isfinite(c) and c > 0):
        raise ValueError(f"curvature must be a finite positive real, got {c!r}")
    return c


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _dot(x, y) -> np.ndarray:
    return np.sum(x * y, axis=-1)


def _sqnorm(x) -> np.ndarray:
    return np.sum(x * x, axis=-1)


@dataclass(frozen=True)
class PoincarePoint:
    """A point (or batch of points) inside the ball.

    Construct through :meth:`create` to get the ball invariant enforced;
    the raw constructor trusts its input.
    """

    coords: np.ndarray

    @property
    def dim(self) -> int:
        return self.coords.shape[-1]

    @classmethod
    def create(cls, coords, c) -> "PoincarePoint":
        """Wrap ``coords``, clamping into the safety margin of the ball for ``c``."""
        return cls(project_into_ball(coords, c))

    def __post_init__(self):
        object.__setattr__(self, "coords", _arr(self.coords))


@dataclass(frozen=True)
class TangentVector:
    """An ambient-coordinate tangent vector attached at ``base``."""

    base: PoincarePoint
    vec: np.ndarray

    def __post_init__(self):
        vec = _arr(self.vec)
        if vec.shape[-1] != self.base.dim:
            raise ValueError(
                f"tangent dim {vec.shape[-1]} does not match base dim {self.base.dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise ValueError("tangent vector must be finite")
        object.__setattr__(self, "vec", vec)

    def riemannian_norm(self, c) -> np.ndarray:
        """Metric length ``lambda_base * ||vec||``."""
        return conformal_factor(self.base.coords, c) * np.linalg.norm(self.vec, axis=-1)


def conformal_factor(x, c) -> np.ndarray:
    """Metric scale ``lambda_x = 2 / (1 - c ||x||^2)`` at ``x``.

    Equals 2 at the origin and grows monotonically toward the boundary.
    """
    c = _cval(c)
    x = _arr(x)
    return 2.0 / (1.0 - c * _sqnorm(x))


def mobius_add(x, y, c) -> np.ndarray:
    """Mobius addition ``x (+) y`` on the ball.

        x (+) y = ((1 + 2c<x,y> + c||y||^2) x + (1 - c||x||^2) y)
                  / (1 + 2c<x,y> + c^2 ||x||^2 ||y||^2)

    Non-commutative, non-associative; the left identity ``0 (+) y = y`` and
    left inverse ``(-x) (+) x = 0`` hold.
    """
    c = _cval(c)
    x = _arr(x)
    y = _arr(y)
    xy = _dot(x, y)
    x2 = _sqnorm(x)
    y2 = _sqnorm(y)
    den = 1.0 + 2.0 * c * xy + c * c * x2 * y2
    if np.any(den < DENOM_FLOOR):
        raise BoundaryProximityError(
            "Mobius denominator degenerated; operands are too close to the boundary"
        )
    num = (1.0 + 2.0 * c * xy + c * y2)[..., None] * x + (1.0 - c * x2)[..., None] * y
    return num / den[..., None]


def gyration(x, y, z, c) -> np.ndarray:
    """Gyration ``gyr[x, y] z = -(x (+) y) (+) (x (+) (y (+) z))``.

    The gyrator is a linear isometry of the tangent directions, so ``z`` may
    be any ambient vector: it is rescaled into the ball before the Mobius
    composition and scaled back afterwards, which keeps the denominators
    well-conditioned without changing the result.
    """
    c = _cval(c)
    x = _arr(x)
    y = _arr(y)
    z = _arr(z)
    zn = np.linalg.norm(z, axis=-1)
    # Evaluate on vectors of norm 0.5/sqrt(c); gyration is linear in z.
    target = 0.5 / math.sqrt(c)
    scale = np.where(zn > 0.0, target / np.where(zn > 0.0, zn, 1.0), 0.0)
    zs = z * scale[..., None]
    xy = mobius_add(x, y, c)
    w = mobius_add(-xy, mobius_add(x, mobius_add(y, zs, c), c), c)
    back = np.where(zn > 0.0, np.where(zn > 0.0, zn, 1.0) / target, 0.0)
    return w * back[..., None]


def distance(x, y, c) -> np.ndarray:
    """Hyperbolic distance ``d_c(x, y) = (2/sqrt(c)) atanh(sqrt(c) ||-x (+) y||)``.

    Evaluated through the cancellation-free identity
    ``||-x (+) y|| = ||x - y|| / sqrt(P)`` with
    ``P = 1 - 2c<x,y> + c^2 ||x||^2 ||y||^2`` (P is the gyro-denominator, so
    the same near-boundary failure applies). Nearby points subtract exactly,
    which keeps tiny distances accurate to full precision. Coincident inputs
    (bitwise equal rows) return exactly 0. atanh arguments are capped at
    ``1 - ATANH_CLAMP``; a fired cap is counted in :data:`diagnostics`.
    """
    c = _cval(c)
    x = _arr(x)
    y = _arr(y)
    sc = math.sqrt(c)
    den = 1.0 - 2.0 * c * _dot(x, y) + c * c * _sqnorm(x) * _sqnorm(y)
    if np.any(den < DENOM_FLOOR):
        raise BoundaryProximityError(
            "gyro-denominator vanished; points too close to the boundary"
        )
    m = sc * np.linalg.norm(x - y, axis=-1) / np.sqrt(den)
    over = m > 1.0 - ATANH_CLAMP
    diagnostics.count_atanh(np.count_nonzero(over))
    m = np.minimum(m, 1.0 - ATANH_CLAMP)
    d = (2.0 / sc) * np.arctanh(m)
    same = np.all(x == y, axis=-1)
    if np.any(same):
        d = np.where(same, 0.0, d)
    return d


def exp_map(x, v, c) -> np.ndarray:
    """Exponential map at ``x``: follow the geodesic with initial direction ``v``.

        exp_x(v) = x (+) ( tanh(sqrt(c) lambda_x ||v|| / 2) * v / (sqrt(c)||v||) )

    The geodesic distance travelled equals the metric length
    ``lambda_x ||v||``. A zero tangent returns ``x`` exactly.
    """
    c = _cval(c)
    x = _arr(x)
    v = _arr(v)
    sc = math.sqrt(c)
    vn = np.linalg.norm(v, axis=-1)
    vn_safe = np.where(vn > 0.0, vn, 1.0)
    lam = conformal_factor(x, c)
    t = np.tanh(sc * lam * vn / 2.0) / (sc * vn_safe)
    return project_into_ball(mobius_add(x, t[..., None] * v, c), c)


def log_map(x, y, c) -> np.ndarray:
    """Logarithmic map at ``x``: the tangent vector whose exp reaches ``y``.

        log_x(y) = (2 / (sqrt(c) lambda_x)) atanh(sqrt(c)||u||) u / ||u||,
        u = -x (+) y

    Inverse of :func:`exp_map`; ``log_x(x)`` is exactly zero.
    """
    c = _cval(c)
    x = _arr(x)
    y = _arr(y)
    sc = math.sqrt(c)
    u = mobius_add(-x, y, c)
    un = np.linalg.norm(u, axis=-1)
    m = sc * un
    over = m > 1.0 - ATANH_CLAMP
    diagnostics.count_atanh(np.count_nonzero(over))
    m = np.minimum(m, 1.0 - ATANH_CLAMP)
    lam = conformal_factor(x, c)
    un_safe = np.where(un > 0.0, un, 1.0)
    coef = (2.0 / (sc * lam)) * np.arctanh(m) / un_safe
    out = coef[..., None] * u
    same = np.all(x == y, axis=-1)
    if np.any(same):
        out = np.where(same[..., None], 0.0, out)
    return out


def parallel_transport(x, y, v, c) -> np.ndarray:
    """Transport tangent vector ``v`` from ``x`` to ``y``:
    ``(lambda_x / lambda_y) gyr[y, -x] v``.

    An isometry between the tangent spaces:
    ``lambda_x ||v|| = lambda_y ||result||``.
    """
    c = _cval(c)
    x = _arr(x)
    y = _arr(y)
    v = _arr(v)
    ratio = conformal_factor(x, c) / conformal_factor(y, c)
    return ratio[..., None] * gyration(y, -x, v, c)


def project_into_ball(x, c, return_clamped: bool = False):
    """Clamp raw coordinates into the safety margin of the ball.

    Interior points pass through unchanged; anything at or beyond norm
    ``(1 - BALL_MARGIN)/sqrt(c)`` is radially rescaled onto that radius.
    With ``return_clamped=True`` also returns the per-row clamp mask.
    """
    c = _cval(c)
    x = _arr(x)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot project non-finite coordinates into the ball")
    max_norm = (1.0 - BALL_MARGIN) / math.sqrt(c)
    n = np.linalg.norm(x, axis=-1)
    clamped = n > max_norm
    diagnostics.count_ball(np.count_nonzero(clamped))
    if np.any(clamped):
        # Slight undershoot keeps the rescale idempotent in floating point.
        scale = np.where(clamped, max_norm * (1.0 - 1e-12) / np.where(n > 0, n, 1.0), 1.0)
        out = x * scale[..., None]
    else:
        out = x.copy() if return_clamped else x
    if return_clamped:
        return out, clamped
    return out


def project_to_hyperbolic_ball(center, y, eps: float, c) -> np.ndarray:
    """Shortest-path projection onto the geodesic ball around ``center``.

    Points within distance ``eps`` of ``center`` are returned unchanged;
    anything farther is pulled back along the connecting geodesic onto the
    sphere ``d_c(center, .) = eps``.
    """
    c = _cval(c)
    if not (eps > 0):
        raise ValueError(f"projection radius must be positive, got {eps!r}")
    center = _arr(center)
    y = _arr(y)
    d = distance(center, y, c)
    # The tiny tolerance band keeps the projection exactly idempotent.
    outside = d > eps * (1.0 + 1e-12)
    if not np.any(outside):
        return y.copy()
    w = log_map(center, y, c)
    d_safe = np.where(d > 0.0, d, 1.0)
    proj = exp_map(center, (eps / d_safe)[..., None] * w, c)
    return np.where(np.broadcast_to(outside[..., None], proj.shape), proj, y)
