"""Experiment harness: repeated-split kernel comparisons with reports.

`run_table1` compares three fixed kernels (polynomial degree 2 / offset 1,
gaussian width 1, linear) and their label-aware combination on the cancer
benchmark. `run_param_select` runs a menu of gaussian widths and the
combination of all of them, quantifying how the combined kernel absorbs
badly parameterized members.

Reports are deterministic functions of (config, seed): repetition rows,
per-method aggregates (sample standard deviation, n-1 denominator), and
the best sweep C per method. Wall-clock time is kept out of the canonical
JSON so identical runs emit identical bytes.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .classify import evaluate, predict_batch, train
from .combine import CombinerConfig, LabelDiagonal, combine_multi, combine_test_rows
from .data import LabeledDataset, SplitPlan, fit_apply_scaling, load_cancer, load_delimited, make_splits
from .kernels import GramMatrix, KernelSpec, cross_gram, gram_matrix, psd_repair
from .oneclass import oc_scores, train_oneclass_gram
from .qp import ConvergenceError, SolverConfig

log = logging.getLogger(__name__)

DEFAULT_TABLE1_KERNELS = (
    KernelSpec("polynomial", degree=2, offset=1.0),
    KernelSpec("gaussian", width_c=1.0),
    KernelSpec("linear"),
)

DEFAULT_WIDTHS = (0.1, 1.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0)

COMBINED_LABEL = "AV"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run depends on; echoed verbatim into the report."""

    dataset: str = "cancer"
    kernels: tuple[KernelSpec, ...] = ()
    combine: CombinerConfig = CombinerConfig()
    include_combined: bool = True
    c_default: float = 1.0
    c_sweep: tuple[float, ...] = (0.1, 1.0, 10.0, 100.0)
    nu: float = 0.5
    master_seed: int = 42
    repetitions: int = 10
    train_fraction: float = 0.7
    scaling: str = "unit_interval"
    psd_mode: str = "diagonal_shift"
    psd_tol: float = 1e-10
    solver: SolverConfig = SolverConfig()
    backend: str = "auto"

    def c_values(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.c_sweep) | {self.c_default}))

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "kernels": [k.to_string() for k in self.kernels],
            "combine": {
                "g_function": self.combine.g_function,
                "test_eval_mode": self.combine.test_eval_mode,
                "threshold": self.combine.threshold,
            },
            "include_combined": self.include_combined,
            "c_default": self.c_default,
            "c_sweep": list(self.c_sweep),
            "nu": self.nu,
            "master_seed": self.master_seed,
            "repetitions": self.repetitions,
            "train_fraction": self.train_fraction,
            "scaling": self.scaling,
            "psd_mode": self.psd_mode,
            "psd_tol": self.psd_tol,
            "solver": {
                "kkt_tol": self.solver.kkt_tol,
                "max_iterations": self.solver.max_iterations,
                "objective_tol": self.solver.objective_tol,
            },
            "backend": self.backend,
        }


@dataclass(frozen=True)
class RepetitionRow:
    method: str
    C: float
    repetition: int
    train_error: float
    test_error: float
    sv_percent: float


@dataclass(frozen=True)
class MethodAggregate:
    method: str
    C: float
    repetitions: int
    train_error_mean: float
    train_error_sd: float
    test_error_mean: float
    test_error_sd: float
    sv_percent_mean: float
    sv_percent_sd: float


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    master_seed: int
    methods: list[str]
    rows: list[RepetitionRow]
    aggregates: list[MethodAggregate]
    incomplete: list[str]
    best_c_by_method: dict[str, float]
    wall_clock_seconds: float | None = field(default=None, compare=False)


def _mean_sd(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, sd


def aggregate_rows(methods: list[str], c_values, rows: list[RepetitionRow]) -> list[MethodAggregate]:
    out = []
    for method in methods:
        for C in c_values:
            got = [r for r in rows if r.method == method and r.C == C]
            if not got:
                continue
            tr = _mean_sd([r.train_error for r in got])
            te = _mean_sd([r.test_error for r in got])
            sv = _mean_sd([r.sv_percent for r in got])
            out.append(MethodAggregate(method, C, len(got), tr[0], tr[1], te[0], te[1], sv[0], sv[1]))
    return out


def _best_c(methods: list[str], c_values, aggregates: list[MethodAggregate]) -> dict[str, float]:
    best = {}
    for method in methods:
        best_err = np.inf
        for C in c_values:  # ascending: ties go to the smaller C
            for agg in aggregates:
                if agg.method == method and agg.C == C and agg.test_error_mean < best_err:
                    best_err = agg.test_error_mean
                    best[method] = C
    return best


def load_dataset(dataset: str) -> LabeledDataset:
    if dataset == "cancer":
        return load_cancer()
    return load_delimited(dataset)


def _method_labels(kernels, include_combined) -> list[str]:
    labels = [k.to_string() for k in kernels]
    if include_combined and len(kernels) >= 1:
        labels.append(COMBINED_LABEL)
    return labels


def _run_repetition(cfg: ExperimentConfig, ds, kernels, rep, train_idx, test_idx):
    train_raw = ds.subset(train_idx, f"rep{rep}-train")
    test_raw = ds.subset(test_idx, f"rep{rep}-test")
    train_ds, test_ds, _ = fit_apply_scaling(train_raw, test_raw, cfg.scaling)
    grams = [gram_matrix(spec, train_ds.X) for spec in kernels]
    crosses = [cross_gram(spec, train_ds.X, test_ds.X) for spec in kernels]
    combined = combined_rows = None
    if cfg.include_combined:
        y = LabelDiagonal(train_ds.y)
        combined = psd_repair(combine_multi(grams, y, cfg.combine), cfg.psd_mode, cfg.psd_tol)
        provisional = None
        if cfg.combine.test_eval_mode == "predicted_label" and len(kernels) > 1:
            # provisional labels from a classifier on the plain kernel average
            kbar = GramMatrix(sum(g.entries for g in grams) / len(grams))
            aux = train(train_ds, kbar, cfg.c_default, cfg.solver, "kbar", cfg.backend)
            provisional = predict_batch(aux, sum(crosses) / len(crosses))
        combined_rows = combine_test_rows(crosses, y, cfg.combine, provisional)

    rows = []
    for C in cfg.c_values():
        for spec, G, R in zip(kernels, grams, crosses):
            model = train(train_ds, G, C, cfg.solver, spec.to_string(), cfg.backend)
            train_error, _ = evaluate(model, train_ds, G.entries)
            test_error, sv_percent = evaluate(model, test_ds, R)
            rows.append(RepetitionRow(spec.to_string(), C, rep, train_error, test_error, sv_percent))
        if cfg.include_combined:
            model = train(train_ds, combined, C, cfg.solver, COMBINED_LABEL, cfg.backend)
            train_error, _ = evaluate(model, train_ds, combined.entries)
            test_error, sv_percent = evaluate(model, test_ds, combined_rows)
            rows.append(RepetitionRow(COMBINED_LABEL, C, rep, train_error, test_error, sv_percent))
    return rows


def _run_experiment(name: str, cfg: ExperimentConfig, kernels) -> ExperimentReport:
    started = time.perf_counter()
    ds = load_dataset(cfg.dataset)
    plan = SplitPlan(cfg.master_seed, cfg.repetitions, cfg.train_fraction)
    splits = make_splits(ds, plan)
    methods = _method_labels(kernels, cfg.include_combined)
    rows: list[RepetitionRow] = []
    incomplete: list[str] = []
    for rep, (train_idx, test_idx) in enumerate(splits):
        try:
            rows.extend(_run_repetition(cfg, ds, kernels, rep, train_idx, test_idx))
        except (ConvergenceError, ValueError) as exc:
            log.warning("repetition %d aborted: %s", rep, exc)
            incomplete.append(f"repetition {rep}: {exc}")
    aggregates = aggregate_rows(methods, cfg.c_values(), rows)
    report = ExperimentReport(
        experiment=name,
        config=cfg.to_dict(),
        master_seed=cfg.master_seed,
        methods=methods,
        rows=rows,
        aggregates=aggregates,
        incomplete=incomplete,
        best_c_by_method=_best_c(methods, cfg.c_values(), aggregates),
        wall_clock_seconds=time.perf_counter() - started,
    )
    return report


def run_table1(cfg: ExperimentConfig) -> ExperimentReport:
    """Three fixed kernels plus their combination on the cancer benchmark."""
    kernels = cfg.kernels or DEFAULT_TABLE1_KERNELS
    return _run_experiment("table1", replace(cfg, kernels=tuple(kernels)), tuple(kernels))


def run_param_select(cfg: ExperimentConfig, widths=DEFAULT_WIDTHS) -> ExperimentReport:
    """A menu of gaussian widths plus the combination of the full menu."""
    kernels = cfg.kernels or tuple(KernelSpec("gaussian", width_c=float(c)) for c in widths)
    return _run_experiment("paramselect", replace(cfg, kernels=tuple(kernels)), tuple(kernels))


def run_oneclass_flags(
    ds: LabeledDataset,
    kernel: KernelSpec,
    nu: float,
    solver: SolverConfig = SolverConfig(),
    scaling: str = "none",
    backend: str = "auto",
):
    """Score a dataset with the one-class estimator; returns (flagged, scores).

    `flagged` holds the indices the estimator places outside the
    high-density region (decision -1).
    """
    scaled, _, _ = fit_apply_scaling(ds, None, scaling)
    G = gram_matrix(kernel, scaled.X)
    model = train_oneclass_gram(G, nu, solver, backend=backend)
    scores = oc_scores(model, G.entries)
    flagged = np.flatnonzero(scores < 0.0)
    return flagged, scores


# ---------------------------------------------------------------------------
# report serialization


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "experiment": report.experiment,
        "config": report.config,
        "master_seed": report.master_seed,
        "methods": list(report.methods),
        "rows": [vars(r).copy() for r in report.rows],
        "aggregates": [vars(a).copy() for a in report.aggregates],
        "incomplete": list(report.incomplete),
        "best_c_by_method": dict(sorted(report.best_c_by_method.items())),
    }


def report_from_dict(d: dict) -> ExperimentReport:
    return ExperimentReport(
        experiment=d["experiment"],
        config=d["config"],
        master_seed=d["master_seed"],
        methods=list(d["methods"]),
        rows=[RepetitionRow(**r) for r in d["rows"]],
        aggregates=[MethodAggregate(**a) for a in d["aggregates"]],
        incomplete=list(d["incomplete"]),
        best_c_by_method=dict(d["best_c_by_method"]),
    )


def _check_aggregates(report: ExperimentReport):
    c_values = sorted({r.C for r in report.rows})
    recomputed = aggregate_rows(report.methods, c_values, report.rows)
    if len(recomputed) != len(report.aggregates):
        raise ValueError("stored aggregates do not match repetition rows")
    for a, b in zip(report.aggregates, recomputed):
        for name in (
            "train_error_mean", "train_error_sd",
            "test_error_mean", "test_error_sd",
            "sv_percent_mean", "sv_percent_sd",
        ):
            if abs(getattr(a, name) - getattr(b, name)) > 1e-12:
                raise ValueError(f"stored aggregate {a.method!r} C={a.C} field {name} is stale")


def render_json(report: ExperimentReport) -> str:
    _check_aggregates(report)
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def render_csv(report: ExperimentReport) -> str:
    lines = ["method,C,repetition,train_error,test_error,sv_percent"]
    for r in report.rows:
        lines.append(f"{r.method},{r.C!r},{r.repetition},{r.train_error!r},{r.test_error!r},{r.sv_percent!r}")
    return "\n".join(lines) + "\n"


def _fmt(mean: float, sd: float) -> str:
    return f"{mean:.1f} ({sd:.1f})"


def render_markdown(report: ExperimentReport) -> str:
    """Benchmark table: mean (sd) per method, at the default C and best sweep C."""
    c_default = report.config.get("c_default", 1.0)
    lines = [
        f"# {report.experiment} report",
        "",
        f"- dataset: {report.config.get('dataset')}",
        f"- seed: {report.master_seed}, repetitions: {report.config.get('repetitions')}",
        f"- C = {c_default:g}",
        "",
        "| Method | Training error | Test error | % SV |",
        "| --- | --- | --- | --- |",
    ]
    by_key = {(a.method, a.C): a for a in report.aggregates}
    for method in report.methods:
        a = by_key.get((method, c_default))
        if a is None:
            lines.append(f"| {method} | (incomplete) | (incomplete) | (incomplete) |")
            continue
        lines.append(
            f"| {method} | {_fmt(a.train_error_mean, a.train_error_sd)} "
            f"| {_fmt(a.test_error_mean, a.test_error_sd)} "
            f"| {_fmt(a.sv_percent_mean, a.sv_percent_sd)} |"
        )
    c_values = sorted({r.C for r in report.rows})
    if len(c_values) > 1:
        lines += [
            "",
            f"Best C per method over sweep {c_values}:",
            "",
            "| Method | best C | Test error | % SV |",
            "| --- | --- | --- | --- |",
        ]
        for method in report.methods:
            C = report.best_c_by_method.get(method)
            a = by_key.get((method, C))
            if a is None:
                continue
            lines.append(
                f"| {method} | {C:g} | {_fmt(a.test_error_mean, a.test_error_sd)} "
                f"| {_fmt(a.sv_percent_mean, a.sv_percent_sd)} |"
            )
    if report.incomplete:
        lines += ["", "Incomplete repetitions:", ""]
        lines += [f"- {item}" for item in report.incomplete]
    return "\n".join(lines) + "\n"


def emit_report(report: ExperimentReport, out_dir, formats=("json", "csv", "md")) -> dict:
    """Write the report files; returns {format: path}."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    renderers = {"json": render_json, "csv": render_csv, "md": render_markdown}
    paths = {}
    for fmt in formats:
        if fmt not in renderers:
            raise ValueError(f"unknown report format {fmt!r}")
        path = out / f"{report.experiment}.{fmt}"
        path.write_text(renderers[fmt](report), encoding="utf-8")
        paths[fmt] = str(path)
    return paths
