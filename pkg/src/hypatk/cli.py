"""Deterministic batch front-end: generate -> train -> sweep -> report.

Every subcommand reads one JSON config file, works entirely under an output
directory, and self-checks the files it wrote before exiting 0. Reruns from
the same config produce byte-identical CSVs, whatever ``HYPATK_THREADS``
says.

Exit codes: 0 success, 2 config error, 3 data error (missing or malformed
input files, or selections matching no data), 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (
    SWEEP_HEADER,
    comparative_matrix,
    epsilon_sweep,
    misclass_matrix,
    rasterize_decision_regions,
    read_sweep_csv,
    render_raster_svg,
    render_raster_text,
    render_sweep_svg,
    write_comparative_csv,
    write_matrix_csv,
    write_sweep_csv,
)
from .attacks import (
    AttackExecutionError,
    AttackFamily,
    AttackSpec,
    NewtonConfig,
    NumericFailureError,
    RecordSet,
    StepSizeRule,
    read_records_csv,
    worker_count,
    write_records_csv,
)
from .geometry import BoundaryProximityError
from .model import (
    InvalidParamsError,
    ObjectiveKind,
    TrainConfig,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from .sampling import DatasetSpec, InvalidSpecError, generate_dataset, read_dataset_csv, write_dataset_csv

__all__ = ["main", "RunConfig", "ConfigError", "DataError", "load_config"]


class ConfigError(ValueError):
    """The config file cannot be parsed into a valid run configuration."""


class DataError(RuntimeError):
    """An input file is missing, malformed, or matches no requested group."""


_DEFAULTS = {
    "curvature": 1.0,
    "output_dir": "out",
    "dataset": {
        "num_classes": 4,
        "circle_radius_hyp": 1.5,
        "variance": 0.25,
        "samples_per_class_train": 10000,
        "samples_per_class_test": 10000,
        "dim": 2,
        "seed": 20240817,
    },
    "train": {
        "learning_rate": 5e-5,
        "batch_size": 4096,
        "epochs": 100,
        "seed": 1,
        "loss_reduction": "sum",
    },
    "attacks": {
        "families": ["hyperbolic_fgm", "euclidean_fgm"],
        "objectives": ["ce", "nfl", "sl", "ll"],
        "epsilons": [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
        "pgd_steps": 10,
        "pgd_step_rule": {"kind": "fixed", "alpha_scale": 0.5},
        "newton": {"max_iter": 50, "tol": 1e-10},
    },
    "report": {
        "resolution": 128,
        "compare": {
            "a": {"attack": "hyperbolic_fgm", "objective": "ce"},
            "b": {"attack": "euclidean_fgm", "objective": "ce"},
        },
    },
}


@dataclass(frozen=True)
class RunConfig:
    curvature: float
    dataset: DatasetSpec
    train: TrainConfig
    families: tuple
    objectives: tuple
    epsilons: tuple
    pgd_steps: int
    pgd_rule: StepSizeRule
    newton: NewtonConfig
    resolution: int
    compare_a: dict
    compare_b: dict
    output_dir: Path
    emit_svg: bool

    @property
    def attacks(self) -> list:
        """The sweep grid expanded into one spec per cell."""
        specs = []
        for family in self.families:
            is_pgd = family in (AttackFamily.EUCLIDEAN_PGD, AttackFamily.HYPERBOLIC_PGD)
            for objective in self.objectives:
                for eps in self.epsilons:
                    specs.append(
                        AttackSpec(
                            family=family,
                            objective=objective,
                            epsilon=eps,
                            steps=self.pgd_steps if is_pgd else 1,
                            step_rule=self.pgd_rule if is_pgd else StepSizeRule(),
                            newton=self.newton,
                        )
                    )
        return specs


def _merge_section(name, defaults, user):
    if not isinstance(user, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    unknown = set(user) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(user)
    return merged


def load_config(path, output_dir=None, emit_svg=False) -> RunConfig:
    """Parse and validate the JSON config, applying the benchmark defaults."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(doc) - set(_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    curvature = doc.get("curvature", _DEFAULTS["curvature"])
    ds = _merge_section("dataset", _DEFAULTS["dataset"], doc.get("dataset", {}))
    tr = _merge_section("train", _DEFAULTS["train"], doc.get("train", {}))
    at = _merge_section("attacks", _DEFAULTS["attacks"], doc.get("attacks", {}))
    rp = _merge_section("report", _DEFAULTS["report"], doc.get("report", {}))

    try:
        dataset = DatasetSpec(
            num_classes=ds["num_classes"],
            circle_radius_hyp=ds["circle_radius_hyp"],
            variance=ds["variance"],
            samples_per_class_train=ds["samples_per_class_train"],
            samples_per_class_test=ds["samples_per_class_test"],
            curvature=curvature,
            dim=ds["dim"],
            seed=ds["seed"],
        )
        train_cfg = TrainConfig(
            learning_rate=tr["learning_rate"],
            batch_size=tr["batch_size"],
            epochs=tr["epochs"],
            seed=tr["seed"],
            loss_reduction=tr["loss_reduction"],
        )
        families = tuple(AttackFamily(f) for f in at["families"])
        objectives = tuple(ObjectiveKind(o) for o in at["objectives"])
        epsilons = tuple(sorted(float(e) for e in at["epsilons"]))
        if len(set(epsilons)) != len(epsilons):
            raise ConfigError("duplicate epsilon values")
        if not families or not objectives or not epsilons:
            raise ConfigError("attack families, objectives and epsilons must be nonempty")
        if any(e <= 0 for e in epsilons):
            raise ConfigError("epsilons must be positive")
        rule_doc = _merge_section(
            "attacks.pgd_step_rule",
            {"kind": "fixed", "alpha": None, "alpha_scale": None},
            at["pgd_step_rule"],
        )
        if rule_doc["kind"] == "fixed" and rule_doc["alpha"] is None and rule_doc["alpha_scale"] is None:
            rule_doc["alpha_scale"] = 0.5
        pgd_rule = StepSizeRule(
            kind=rule_doc["kind"],
            alpha=rule_doc["alpha"],
            alpha_scale=rule_doc["alpha_scale"],
        )
        newton_doc = _merge_section(
            "attacks.newton", _DEFAULTS["attacks"]["newton"], at["newton"]
        )
        newton = NewtonConfig(max_iter=newton_doc["max_iter"], tol=newton_doc["tol"])
        pgd_steps = int(at["pgd_steps"])
        if pgd_steps < 1:
            raise ConfigError("pgd_steps must be at least 1")
        resolution = int(rp["resolution"])
        compare = _merge_section("report.compare", _DEFAULTS["report"]["compare"], rp["compare"])
        for side in ("a", "b"):
            sel = compare[side]
            if not isinstance(sel, dict) or "attack" not in sel or "objective" not in sel:
                raise ConfigError(f"report.compare.{side} needs 'attack' and 'objective'")
            AttackFamily(sel["attack"])
            ObjectiveKind(sel["objective"])
    except ConfigError:
        raise
    except (InvalidSpecError, InvalidParamsError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc

    out = Path(output_dir) if output_dir is not None else Path(doc.get("output_dir", _DEFAULTS["output_dir"]))
    return RunConfig(
        curvature=float(curvature),
        dataset=dataset,
        train=train_cfg,
        families=families,
        objectives=objectives,
        epsilons=epsilons,
        pgd_steps=pgd_steps,
        pgd_rule=pgd_rule,
        newton=newton,
        resolution=resolution,
        compare_a=dict(compare["a"]),
        compare_b=dict(compare["b"]),
        output_dir=out,
        emit_svg=bool(emit_svg),
    )


# ------------------------------------------------------------------ file map


def _paths(cfg: RunConfig) -> dict:
    out = cfg.output_dir
    return {
        "train": out / "train.csv",
        "test": out / "test.csv",
        "checkpoint": out / "checkpoint.json",
        "history": out / "history.csv",
        "sweep": out / "sweep.csv",
        "sweep_svg": out / "sweep.svg",
        "comparative": out / "comparative.csv",
        "raster_text": out / "raster.txt",
        "raster_svg": out / "raster.svg",
    }


def _records_path(cfg: RunConfig, family: str, objective: str) -> Path:
    return cfg.output_dir / f"records_{family}_{objective}.csv"


def _matrix_path(cfg: RunConfig, family: str, objective: str, eps: float) -> Path:
    return cfg.output_dir / f"matrix_{family}_{objective}_eps{eps:g}.csv"


def _require(path: Path) -> Path:
    if not path.is_file():
        raise DataError(f"required input {path} does not exist; run the earlier stages first")
    return path


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise DataError(f"self-check failed: {message}")


# ---------------------------------------------------------------- subcommands


def cmd_generate(cfg: RunConfig) -> None:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    paths = _paths(cfg)
    train_ds, test_ds = generate_dataset(cfg.dataset)
    write_dataset_csv(train_ds, paths["train"])
    write_dataset_csv(test_ds, paths["test"])
    for split, ds in (("train", train_ds), ("test", test_ds)):
        counts = np.bincount(ds.labels, minlength=cfg.dataset.num_classes)
        for k, n in enumerate(counts):
            print(f"{split} class {k}: {n} samples")
    # self-check: both files read back with the right shape
    for split, ds, path in (("train", train_ds, paths["train"]), ("test", test_ds, paths["test"])):
        back = read_dataset_csv(path, split=split)
        _check(len(back) == len(ds), f"{path} row count")
        _check(np.array_equal(back.points, ds.points), f"{path} round-trip")
    print(f"wrote {paths['train']} and {paths['test']}")


def cmd_train(cfg: RunConfig) -> None:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    paths = _paths(cfg)
    try:
        dataset = read_dataset_csv(_require(paths["train"]), split="train")
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    params, history = train(
        dataset, cfg.train, cfg.curvature, num_classes=cfg.dataset.num_classes
    )
    save_checkpoint(params, paths["checkpoint"])
    lines = ["epoch,mean_ce,train_accuracy"]
    for epoch, mean_ce, acc in history:
        lines.append(f"{epoch},{mean_ce:.17g},{acc:.17g}")
    paths["history"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    if history:
        print(f"final epoch: mean_ce={history[-1][1]:.6f} train_accuracy={history[-1][2]:.4f}")
    # self-check: checkpoint reloads bit-exact, history has one row per epoch
    back = load_checkpoint(paths["checkpoint"])
    _check(np.array_equal(back.p, params.p) and np.array_equal(back.a, params.a),
           "checkpoint round-trip")
    n_rows = len(paths["history"].read_text(encoding="utf-8").splitlines()) - 1
    _check(n_rows == cfg.train.epochs, "history row count")
    print(f"wrote {paths['checkpoint']} and {paths['history']}")


def cmd_sweep(cfg: RunConfig) -> None:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    paths = _paths(cfg)
    try:
        params = load_checkpoint(_require(paths["checkpoint"]))
        dataset = read_dataset_csv(_require(paths["test"]), split="test")
    except ValueError as exc:
        raise DataError(str(exc)) from exc

    buffers: dict = {}
    written = []

    def per_run(spec: AttackSpec, records: RecordSet) -> None:
        key = (spec.family.value, spec.objective.value)
        buffers.setdefault(key, []).append(records)
        if len(buffers[key]) == len(cfg.epsilons):
            path = _records_path(cfg, *key)
            write_records_csv(RecordSet.concat(buffers.pop(key)), path)
            written.append(path)
            print(f"wrote {path}")

    sweep = epsilon_sweep(
        params,
        dataset,
        cfg.families,
        cfg.objectives,
        cfg.epsilons,
        pgd_steps=cfg.pgd_steps,
        pgd_rule=cfg.pgd_rule,
        newton=cfg.newton,
        per_run=per_run,
    )
    write_sweep_csv(sweep, paths["sweep"])
    print(f"wrote {paths['sweep']} ({len(sweep)} rows)")
    clean_acc = float(np.mean(predict(params, dataset.points) == dataset.labels))
    print(f"clean test accuracy: {clean_acc:.4f}")

    # self-check: re-read everything this command produced
    back = read_sweep_csv(paths["sweep"])
    _check(len(back) == len(cfg.families) * len(cfg.objectives) * len(cfg.epsilons),
           "sweep row count")
    expected_rows = len(dataset) * len(cfg.epsilons)
    for path in written:
        rec = read_records_csv(path)
        _check(len(rec) == expected_rows, f"{path} row count")
    if cfg.emit_svg:
        # the chart derives from the CSV, not from in-memory state
        paths["sweep_svg"].write_text(render_sweep_svg(back), encoding="utf-8")
        print(f"wrote {paths['sweep_svg']}")


def _select_matrices(matrices: dict, selection: dict) -> list:
    chosen = []
    for (family, objective, eps), matrix in matrices.items():
        if family != selection["attack"] or objective != selection["objective"]:
            continue
        if "epsilon" in selection and float(selection["epsilon"]) != eps:
            continue
        chosen.append(matrix)
    return chosen


def cmd_report(cfg: RunConfig) -> None:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    paths = _paths(cfg)
    try:
        params = load_checkpoint(_require(paths["checkpoint"]))
    except ValueError as exc:
        raise DataError(str(exc)) from exc

    matrices: dict = {}
    for family in cfg.families:
        for objective in cfg.objectives:
            path = _require(_records_path(cfg, family.value, objective.value))
            try:
                records = read_records_csv(path)
            except ValueError as exc:
                raise DataError(str(exc)) from exc
            for eps in cfg.epsilons:
                subset = records.filter(records.epsilon == eps)
                if len(subset) == 0:
                    raise DataError(f"{path} has no rows for epsilon {eps:g}")
                m = misclass_matrix(subset, num_classes=params.num_classes)
                matrices[(family.value, objective.value, eps)] = m
                write_matrix_csv(m, _matrix_path(cfg, family.value, objective.value, eps))
    print(f"wrote {len(matrices)} misclassification matrices")

    groups_a = _select_matrices(matrices, cfg.compare_a)
    groups_b = _select_matrices(matrices, cfg.compare_b)
    if not groups_a or not groups_b:
        available = sorted({(f, o) for (f, o, _) in matrices})
        raise DataError(
            f"comparison selection matched no records; available groups: {available}"
        )
    comp = comparative_matrix(groups_a, groups_b)
    write_comparative_csv(comp, paths["comparative"])
    print(f"wrote {paths['comparative']}")

    if params.dim == 2:
        raster = rasterize_decision_regions(params, cfg.resolution)
        paths["raster_text"].write_text(render_raster_text(raster), encoding="utf-8")
        print(f"wrote {paths['raster_text']}")
        if cfg.emit_svg:
            paths["raster_svg"].write_text(render_raster_svg(raster), encoding="utf-8")
            print(f"wrote {paths['raster_svg']}")
    else:
        print("model is not 2-D; skipping the decision-region raster")

    # self-check: matrices reload within the writer's precision and the
    # raster grid has the requested size
    probe = next(iter(matrices))
    reread = _read_matrix_csv(_matrix_path(cfg, *probe))
    _check(np.allclose(reread, matrices[probe].values, atol=0, rtol=0),
           "matrix round-trip")
    _check(paths["comparative"].is_file(), "comparative matrix file")
    if params.dim == 2:
        lines = paths["raster_text"].read_text(encoding="utf-8").splitlines()
        _check(len(lines) == cfg.resolution, "raster line count")


def _read_matrix_csv(path: Path) -> np.ndarray:
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    if header[-1] != "row_count":
        raise DataError(f"{path}: not a matrix file")
    C = len(header) - 1
    values = np.zeros((C, C))
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != C + 1:
            raise DataError(f"{path}: row {i} has {len(parts)} fields, expected {C + 1}")
        values[i] = [float(v) for v in parts[:C]]
    return values


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hypatk",
        description="Hyperbolic adversarial-attack benchmark pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--output-dir", default=None, help="override the config's output directory")
        p.add_argument("--emit-svg", action="store_true", help="also write SVG renderings")
    args = parser.parse_args(argv)

    try:
        worker_count()  # fail fast on a malformed HYPATK_THREADS
        cfg = load_config(args.config, output_dir=args.output_dir, emit_svg=args.emit_svg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        _COMMANDS[args.command](cfg)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericFailureError, AttackExecutionError, BoundaryProximityError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
