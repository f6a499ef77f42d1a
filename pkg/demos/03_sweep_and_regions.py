"""Sweep the attack budget and look at what the classifier actually learned.

Accuracy-versus-budget curves are the headline comparison between attack
families; the misclassification matrices say where the errors go; the
decision-region raster shows the carved-up disk itself.
"""

import numpy as np

from hypatk import (
    AttackFamily,
    AttackSpec,
    DatasetSpec,
    ObjectiveKind,
    TrainConfig,
    comparative_matrix,
    epsilon_sweep,
    generate_dataset,
    misclass_matrix,
    predict,
    rasterize_decision_regions,
    run_attack,
    train,
)
from hypatk.analysis import render_raster_text

CURVATURE = 1.0


def main():
    spec = DatasetSpec(
        num_classes=4,
        circle_radius_hyp=1.5,
        variance=0.25,
        samples_per_class_train=1000,
        samples_per_class_test=1000,
        curvature=CURVATURE,
        dim=2,
        seed=20240817,
    )
    train_ds, test_ds = generate_dataset(spec)
    params, _ = train(
        train_ds, TrainConfig(learning_rate=5e-5, batch_size=1024, epochs=60, seed=1),
        CURVATURE, num_classes=4,
    )
    clean = float(np.mean(predict(params, test_ds.points) == test_ds.labels))
    print(f"clean test accuracy: {clean:.2%}")

    epsilons = (0.25, 0.5, 1.0, 1.5, 2.0)
    families = (AttackFamily.HYPERBOLIC_FGM, AttackFamily.EUCLIDEAN_FGM)
    sweep = epsilon_sweep(params, test_ds, families, [ObjectiveKind.CE], epsilons)

    print("\naccuracy under a growing cross-entropy FGM budget:")
    print(f"  {'eps':>5s}   {'riemannian':>10s}   {'euclidean':>10s}")
    for eps in epsilons:
        row = {
            a: float(sweep.accuracy[(sweep.attack == a) & (sweep.epsilon == eps)][0])
            for a in ("hyperbolic_fgm", "euclidean_fgm")
        }
        print(f"  {eps:>5.2f}   {row['hyperbolic_fgm']:>10.2%}   {row['euclidean_fgm']:>10.2%}")

    print("\nwhere do the errors go? misclassification matrices at eps = 1.0")
    records = {
        fam: run_attack(AttackSpec(fam, ObjectiveKind.CE, 1.0), params, test_ds)
        for fam in families
    }
    mats = {fam: misclass_matrix(records[fam], num_classes=4) for fam in families}
    for fam in families:
        m = mats[fam]
        print(f"  {fam.value} (rows = true class, columns = predicted):")
        for i in range(4):
            cells = "  ".join(f"{v:5.3f}" for v in m.values[i])
            print(f"    class {i}: {cells}   ({m.row_counts[i]} errors)")

    diff = comparative_matrix(
        [mats[AttackFamily.HYPERBOLIC_FGM]], [mats[AttackFamily.EUCLIDEAN_FGM]]
    )
    print("  riemannian minus euclidean:")
    for i in range(4):
        print("    " + "  ".join(f"{v:+6.3f}" for v in diff[i]))

    # (the SVG renderer also marks decision-hyperplane traces; the text view
    # keeps just the argmax regions)
    print("\ndecision regions on the disk (digits = class, . = outside the ball):")
    raster = rasterize_decision_regions(params, resolution=33)
    print(render_raster_text(raster))


if __name__ == "__main__":
    main()
