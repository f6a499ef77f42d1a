"""A walking tour of the Poincare-ball primitives.

Everything in the package is built on a handful of geometry operations:
Mobius addition, the exponential and logarithmic maps, parallel transport,
and the hyperbolic distance. This script exercises each one on concrete
numbers so you can see the geometry behave.
"""

import numpy as np

from hypatk import (
    conformal_factor,
    distance,
    exp_map,
    gyration,
    log_map,
    mobius_add,
    parallel_transport,
    project_to_hyperbolic_ball,
)

C = 1.0  # curvature; the ball is ||x|| < 1/sqrt(c)


def main():
    print("=== distances blow up near the boundary ===")
    origin = np.zeros(2)
    for r in (0.1, 0.5, 0.9, 0.99, 0.999999):
        x = np.array([r, 0.0])
        print(
            f"  euclidean |x| = {r:<9g} hyperbolic d(0, x) = {distance(origin, x, C):.6f}"
            f"   (metric factor {conformal_factor(x, C):.3g})"
        )

    print()
    print("=== exp and log are inverse ===")
    rng = np.random.default_rng(7)
    x = np.array([0.3, -0.4])
    v = rng.standard_normal(2) * 0.2
    y = exp_map(x, v, C)
    back = log_map(x, y, C)
    print(f"  x = {x}, tangent v = {np.round(v, 6)}")
    print(f"  exp_x(v)        = {np.round(y, 6)}")
    print(f"  log_x(exp_x(v)) = {np.round(back, 6)}   (error {np.linalg.norm(back - v):.2e})")
    print(f"  geodesic length d(x, exp_x(v)) = {distance(x, y, C):.6f}")
    print(f"  metric length   lambda_x |v|   = {conformal_factor(x, C) * np.linalg.norm(v):.6f}")

    print()
    print("=== Mobius addition is not commutative, gyration fixes it up ===")
    a = np.array([0.2, 0.1])
    b = np.array([-0.3, 0.4])
    ab = mobius_add(a, b, C)
    ba = mobius_add(b, a, C)
    print(f"  a + b = {np.round(ab, 6)}")
    print(f"  b + a = {np.round(ba, 6)}")
    print(f"  gyr[a,b](b + a) = {np.round(gyration(a, b, ba, C), 6)}  (matches a + b)")

    print()
    print("=== parallel transport preserves metric length ===")
    w = np.array([0.05, 0.12])
    moved = parallel_transport(a, b, w, C)
    len_a = conformal_factor(a, C) * np.linalg.norm(w)
    len_b = conformal_factor(b, C) * np.linalg.norm(moved)
    print(f"  tangent at a: {w}, length {len_a:.6f}")
    print(f"  transported to b: {np.round(moved, 6)}, length {len_b:.6f}")

    print()
    print("=== projecting back into a hyperbolic ball around a center ===")
    center = np.array([0.5, 0.0])
    stray = np.array([0.93, 0.1])
    print(f"  d(center, stray) = {distance(center, stray, C):.4f}")
    for radius in (2.0, 1.0, 0.25):
        proj = project_to_hyperbolic_ball(center, stray, radius, C)
        print(
            f"  projected to radius {radius:<4g} -> {np.round(proj, 6)}"
            f"  (new distance {distance(center, proj, C):.6f})"
        )


if __name__ == "__main__":
    main()
