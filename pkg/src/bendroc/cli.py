"""``bendroc`` command line.

Every command reads its settings from an optional JSON config file
(``--config``); any flag given on the command line overrides the file.
Data goes to files or stdout, diagnostics to stderr. Exit status is 0 on
success, 1 on a runtime error and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

from .dataio import DataError, Schema, ScoredDataset, dumps_dataset, read_dataset
from .featselect import rank_features
from .model import BinModel, FitError
from .oer import SolverConfig, predicted_operating_point
from .pipeline import METHODS, PipelineSettings, cross_validate, fit_model, solve_sweep
from .synth import GENERATORS


class UsageError(Exception):
    pass


@dataclass
class PipelineConfig:
    input: str | None = None
    schema: dict = field(default_factory=dict)
    features: list = field(default_factory=lambda: [0])
    bins: list = field(default_factory=lambda: [8])
    strategy: str = "equal_width"
    ranges: list | None = None
    min_count: int = 5
    sigma_floor: float | None = None
    equal_variance: bool = False
    learning_rate: float | None = None
    eps: float | None = None
    clamp: float | None = None
    max_iterations: int = 100_000
    init: str = "closed_form"
    lambda_grid_size: int = 200
    folds: int = 10
    seed: int = 0
    nbins: int = 10
    sd_threshold: float = 0.05
    prior_threshold: float = 0.05
    out: str | None = None
    model: str | None = None

    @classmethod
    def load(cls, path: str | None, overrides: dict[str, Any]) -> "PipelineConfig":
        doc: dict[str, Any] = {}
        if path:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            if not isinstance(doc, dict):
                raise UsageError("config file must hold a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        doc.update({k: v for k, v in overrides.items() if v is not None and k in known})
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if len(self.features) != len(self.bins):
            raise UsageError("give one bin count per feature")
        if any(int(b) < 1 for b in self.bins):
            raise UsageError("bin counts must be >= 1")
        if self.strategy not in ("equal_width", "quantile"):
            raise UsageError(f"unknown strategy {self.strategy!r}")
        if self.min_count < 1:
            raise UsageError("min_count must be >= 1")
        if self.sigma_floor is not None and not self.sigma_floor > 0:
            raise UsageError("sigma_floor must be > 0")
        if self.lambda_grid_size < 2:
            raise UsageError("lambda_grid_size must be >= 2")
        if self.nbins < 2:
            raise UsageError("nbins must be >= 2")

    def load_data(self) -> ScoredDataset:
        if not self.input:
            raise UsageError("no input file given")
        return read_dataset(self.input, Schema.from_mapping(self.schema))

    def settings(self, data: ScoredDataset) -> PipelineSettings:
        feats = tuple(_feature_index(data, f) for f in self.features)
        ranges = None
        if self.ranges is not None:
            ranges = tuple(None if r is None else (float(r[0]), float(r[1])) for r in self.ranges)
        try:
            solver = SolverConfig(
                learning_rate=self.learning_rate,
                eps=self.eps,
                max_iterations=self.max_iterations,
                clamp=self.clamp,
                init=self.init,
            )
            return PipelineSettings(
                features=feats,
                bins=tuple(int(b) for b in self.bins),
                strategy=self.strategy,
                ranges=ranges,
                min_count=self.min_count,
                sigma_floor=self.sigma_floor,
                equal_variance=self.equal_variance,
                solver=solver,
                lambda_grid_size=self.lambda_grid_size,
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc


def _feature_index(data: ScoredDataset, ref) -> int:
    if isinstance(ref, int) or (isinstance(ref, str) and ref.isdigit()):
        idx = int(ref)
    elif ref in data.aux_names:
        idx = data.aux_names.index(ref)
    else:
        raise UsageError(f"unknown feature {ref!r}; columns are {list(data.aux_names)}")
    if not 0 <= idx < data.n_features:
        raise UsageError(f"feature index {idx} out of range (dataset has {data.n_features})")
    return idx


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to a sibling temp file, then rename it over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _require_out(cfg: PipelineConfig) -> str:
    if not cfg.out:
        raise UsageError("--out is required")
    return cfg.out


# ---- commands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    data = GENERATORS[args.example](args.n, args.seed)
    write_atomic(args.out, dumps_dataset(data))
    print(f"wrote {len(data.labels)} rows to {args.out}", file=sys.stderr)
    return 0


def _stats_table(model: BinModel) -> str:
    header = f"{'bin':>4} {'range':<28} {'n+':>6} {'n-':>6} {'mu+':>9} {'sd+':>8} {'mu-':>9} {'sd-':>8} {'p+':>7} {'p-':>7}"
    lines = [header]
    for i, s in enumerate(model.stats):
        lines.append(
            f"{i:>4} {model.partition.describe(i):<28.28} {s.n_pos:>6} {s.n_neg:>6} "
            f"{s.mu_pos:>9.4f} {s.sigma_pos:>8.4f} {s.mu_neg:>9.4f} {s.sigma_neg:>8.4f} "
            f"{s.p_pos:>7.4f} {s.p_neg:>7.4f}"
        )
    return "\n".join(lines)


def cmd_fit(cfg: PipelineConfig) -> int:
    out = _require_out(cfg)
    data = cfg.load_data()
    model = fit_model(data, cfg.settings(data))
    write_atomic(out, json.dumps(model.to_dict(), indent=2))
    print(_stats_table(model))
    return 0


def cmd_sweep(cfg: PipelineConfig) -> int:
    out = _require_out(cfg)
    data = cfg.load_data()
    settings = cfg.settings(data)
    if cfg.model:
        with open(cfg.model, encoding="utf-8") as fh:
            model = BinModel.from_dict(json.load(fh))
    else:
        model = fit_model(data, settings)
    curves = solve_sweep(model, data, settings)
    rows = []
    for c in curves:
        fpr, tpr = predicted_operating_point(model, c)
        rows.extend(
            (repr(c.lam), i, repr(float(k)), int(c.converged), repr(fpr), repr(tpr))
            for i, k in enumerate(c.thresholds)
        )
    write_atomic(out, _csv_text(("lambda", "bin", "k", "converged", "predicted_fpr", "predicted_tpr"), rows))
    bad = sum(not c.converged for c in curves)
    if bad:
        print(f"warning: {bad} of {len(curves)} lambda values did not converge", file=sys.stderr)
    return 0


def cmd_select(cfg: PipelineConfig) -> int:
    out = _require_out(cfg)
    data = cfg.load_data()
    strategy = cfg.strategy
    reports = rank_features(
        data,
        cfg.nbins,
        thresholds=(cfg.sd_threshold, cfg.prior_threshold),
        strategy=strategy,
        min_count=cfg.min_count,
    )
    rows = [(r.feature, repr(r.sd_variance), repr(r.prior_variance), int(r.accepted)) for r in reports]
    write_atomic(out, _csv_text(("feature", "sd_variance", "prior_variance", "accepted"), rows))
    for r in reports:
        verdict = "accepted" if r.accepted else "rejected"
        print(f"{r.feature}: sd_var={r.sd_variance:.4g} prior_var={r.prior_variance:.4g} {verdict}")
    return 0


def cmd_roc(cfg: PipelineConfig) -> int:
    out = Path(_require_out(cfg))
    if cfg.folds < 2:
        raise UsageError("evaluation requires held-out data: folds must be >= 2")
    data = cfg.load_data()
    summary, results = cross_validate(data, cfg.settings(data), folds=cfg.folds, seed=cfg.seed)
    out.mkdir(parents=True, exist_ok=True)
    for f, res in enumerate(results):
        for name, curve in res.curves.items():
            rows = ((repr(float(a)), repr(float(b)), repr(float(p))) for a, b, p in zip(curve.fpr, curve.tpr, curve.param))
            write_atomic(out / f"fold{f}_{name}.csv", _csv_text(("fpr", "tpr", "param"), rows))
    doc = summary.as_dict()
    doc["converged"] = all(r.converged for r in results)
    write_atomic(out / "summary.json", json.dumps(doc, indent=2))
    rows = [(r["method"], repr(r["auc_mean"]), repr(r["auc_std"])) for r in summary.rows()]
    write_atomic(out / "summary.csv", _csv_text(("method", "auc_mean", "auc_std"), rows))

    for m in METHODS:
        print(f"{m:<13} AUC {summary.mean(m):.5f} +/- {summary.std(m):.5f}")
    print(f"AUC delta (oer - fixed): {summary.delta:+.5f}")
    print(f"relative 1-AUC reduction: {summary.relative_error_reduction:.2%}")
    print(f"sign test: oer >= fixed in {summary.wins}/{len(summary.per_fold)} folds, p = {summary.sign_test_p:.4g}")
    if not doc["converged"]:
        print("warning: some threshold solves did not converge", file=sys.stderr)
    return 0


# ---- argument parsing -------------------------------------------------------


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _range(text: str) -> list[float]:
    try:
        lo, hi = (float(t) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from exc
    return [lo, hi]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--input", help="delimited score file with a header row")
    p.add_argument("--out", help="output path")
    p.add_argument("--label-col", help="label column name")
    p.add_argument("--score-col", help="score column name")
    p.add_argument("--aux", type=_csv_list, help="comma-separated auxiliary columns (default: all others)")
    p.add_argument("--delimiter")
    p.add_argument("--features", type=_csv_list, help="features to partition, by name or index")
    p.add_argument("--bins", type=_int_list, help="interior bins per partitioned feature")
    p.add_argument("--strategy", choices=("equal_width", "quantile"))
    p.add_argument("--range", dest="ranges", type=_range, action="append", help="LO,HI per feature (equal width)")
    p.add_argument("--min-count", type=int)
    p.add_argument("--sigma-floor", type=float)
    p.add_argument("--equal-variance", action="store_true", default=None)
    p.add_argument("--seed", type=int)


def _add_solver(p: argparse.ArgumentParser) -> None:
    p.add_argument("--learning-rate", type=float, help="fixed step size (default: adaptive)")
    p.add_argument("--eps", type=float)
    p.add_argument("--clamp", type=float, help="threshold bound K")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--init", choices=("zero", "closed_form", "grid"))
    p.add_argument("--lambda-grid-size", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bendroc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("example", choices=sorted(GENERATORS))
    p.add_argument("--n", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit per-bin score statistics and save the model")
    _add_common(p)

    p = sub.add_parser("sweep", help="solve thresholds over a lambda grid")
    _add_common(p)
    _add_solver(p)
    p.add_argument("--model", help="previously fitted model JSON (skips fitting)")

    p = sub.add_parser("select", help="rank auxiliary features")
    _add_common(p)
    p.add_argument("--nbins", type=int)
    p.add_argument("--sd-threshold", type=float)
    p.add_argument("--prior-threshold", type=float)

    p = sub.add_parser("roc", help="cross-validated ROC comparison against the baselines")
    _add_common(p)
    _add_solver(p)
    p.add_argument("--folds", type=int)
    return parser


def _config_from_args(args) -> PipelineConfig:
    ov = dict(vars(args))
    schema_ov = {
        k: v
        for k, v in (("label", ov.pop("label_col", None)), ("score", ov.pop("score_col", None)),
                     ("aux", ov.pop("aux", None)), ("delimiter", ov.pop("delimiter", None)))
        if v is not None
    }
    cfg = PipelineConfig.load(ov.pop("config", None), ov)
    cfg.schema = {**cfg.schema, **schema_ov}
    return cfg


COMMANDS = {"fit": cmd_fit, "sweep": cmd_sweep, "select": cmd_select, "roc": cmd_roc}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "synth":
            if args.n < 1:
                raise UsageError("--n must be >= 1")
            return cmd_synth(args)
        return COMMANDS[args.command](_config_from_args(args))
    except UsageError as exc:
        print(f"bendroc {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (OSError, DataError, FitError, ValueError, json.JSONDecodeError) as exc:
        print(f"bendroc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
