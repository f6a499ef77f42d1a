"""hypatk: adversarial attacks for Poincare-ball classifiers.

Ball geometry primitives, a wrapped-normal synthetic benchmark, hyperbolic
multinomial logistic regression with Riemannian SGD, Euclidean and Riemannian
FGM/PGD attacks with hyperbolic-distance budgets, and the evaluation/analysis
machinery around them.
"""

from .analysis import (
    MisclassMatrix,
    Raster,
    SweepResult,
    accuracy,
    comparative_matrix,
    epsilon_sweep,
    misclass_matrix,
    rasterize_decision_regions,
)
from .attacks import (
    AttackExecutionError,
    AttackFamily,
    AttackResult,
    AttackSpec,
    NewtonConfig,
    NumericFailureError,
    RecordSet,
    StepSizeRule,
    calibrate_pullback_step,
    fgm_euclidean_hypcal,
    fgm_euclidean_l2,
    fgm_riemannian,
    pgd_euclidean,
    pgd_riemannian,
    read_records_csv,
    run_attack,
    write_records_csv,
)
from .geometry import (
    BoundaryProximityError,
    Curvature,
    PoincarePoint,
    TangentVector,
    conformal_factor,
    distance,
    exp_map,
    gyration,
    log_map,
    mobius_add,
    parallel_transport,
    project_into_ball,
    project_to_hyperbolic_ball,
)
from .model import (
    InvalidParamsError,
    MlrParams,
    ObjectiveKind,
    TrainConfig,
    grad_input,
    grad_params,
    init_params,
    load_checkpoint,
    mlr_logits,
    objective_value,
    predict,
    save_checkpoint,
    train,
)
from .sampling import (
    DatasetSpec,
    InvalidSpecError,
    LabeledDataset,
    WrappedNormalSpec,
    generate_dataset,
    make_class_means,
    read_dataset_csv,
    sample_wrapped_normal,
    write_dataset_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AttackExecutionError",
    "AttackFamily",
    "AttackResult",
    "AttackSpec",
    "BoundaryProximityError",
    "Curvature",
    "DatasetSpec",
    "InvalidParamsError",
    "InvalidSpecError",
    "LabeledDataset",
    "MisclassMatrix",
    "MlrParams",
    "NewtonConfig",
    "NumericFailureError",
    "ObjectiveKind",
    "PoincarePoint",
    "Raster",
    "RecordSet",
    "StepSizeRule",
    "SweepResult",
    "TangentVector",
    "TrainConfig",
    "WrappedNormalSpec",
    "accuracy",
    "calibrate_pullback_step",
    "comparative_matrix",
    "conformal_factor",
    "distance",
    "epsilon_sweep",
    "exp_map",
    "fgm_euclidean_hypcal",
    "fgm_euclidean_l2",
    "fgm_riemannian",
    "generate_dataset",
    "grad_input",
    "grad_params",
    "gyration",
    "init_params",
    "load_checkpoint",
    "log_map",
    "make_class_means",
    "misclass_matrix",
    "mlr_logits",
    "mobius_add",
    "objective_value",
    "parallel_transport",
    "pgd_euclidean",
    "pgd_riemannian",
    "predict",
    "project_into_ball",
    "project_to_hyperbolic_ball",
    "rasterize_decision_regions",
    "read_dataset_csv",
    "read_records_csv",
    "run_attack",
    "sample_wrapped_normal",
    "save_checkpoint",
    "train",
    "write_dataset_csv",
    "write_records_csv",
]
