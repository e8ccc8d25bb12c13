"""Command-line front end: dataset generation, fitting, and comparison tables.

Subcommands:
    synth    write a synthetic dataset CSV (kind 1 or 2)
    fit      standardize → vanilla-PCA init → penalty-method fit → report
    compare  split-based comparison of vanilla PCA against the fair fit

Every command is deterministic given its full flag set including --seed, and
every run writes a JSON manifest next to its outputs.  Options for fit and
compare may also come from a flat key=value config file (--config); explicit
flags override the file, the file overrides built-in defaults.  Floating
point output is printed with 6 significant digits; files keep full precision.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    DataSet,
    SplitSpec,
    apply_standardization,
    load_csv,
    split,
    standardize,
    synth1,
    synth2,
    write_csv,
)
from .exceptions import ConfigurationError
from .kernels import BandwidthSelection, KernelConfig, median_heuristic
from .metrics import (
    FitReport,
    classifier_accuracy,
    communalities,
    delta_dp,
    explained_variance,
    fairness_mmd2,
    train_downstream_classifier,
)
from .objective import Covariance, PenaltyProblem, constraint_h, pca_loadings
from .solver import FitStatus, RepmsConfig, repms_fit


@dataclass
class RunManifest:
    """Provenance record paired with every set of emitted result files."""

    command: str
    config: dict
    input_paths: list[str]
    seeds: list[int]
    output_paths: list[str]
    version: str
    runtime_seconds: float

    def write(self, path: Path) -> None:
        path.write_text(
            json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


_SOLVER_KEYS = (
    "eps0",
    "eps_min",
    "theta_eps",
    "rho0",
    "theta_rho",
    "rho_max",
    "d_min",
    "max_outer_iters",
    "inner_max_iters",
)

_CONFIG_TYPES = {
    "data": str,
    "protected": str,
    "outcome": str,
    "dim": int,
    "tau": float,
    "taus": lambda s: [float(x) for x in s.split(",") if x.strip()],
    "seed": int,
    "splits": int,
    "train_frac": float,
    "sigma": float,
    "out": str,
    "eps0": float,
    "eps_min": float,
    "theta_eps": float,
    "rho0": float,
    "theta_rho": float,
    "rho_max": float,
    "d_min": float,
    "max_outer_iters": int,
    "inner_max_iters": int,
}

_FIT_DEFAULTS = {
    "outcome": None,
    "tau": 1e-5,
    "seed": 0,
    "sigma": None,
}

_COMPARE_DEFAULTS = {
    "outcome": None,
    "taus": [1e-5],
    "seed": 0,
    "splits": 10,
    "train_frac": 0.7,
    "sigma": None,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # surface with a message and nonzero exit code
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairpca",
        description="MMD-constrained fair PCA on the Stiefel manifold",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    p_synth.add_argument("--kind", type=int, choices=(1, 2), required=True)
    p_synth.add_argument("--p", type=int, help="dimension for kind 2 (20, 30, ..., 100)")
    p_synth.add_argument("--n-per-group", type=int, default=250, help="kind-2 group size")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", "-o", required=True)
    p_synth.set_defaults(handler=_run_synth)

    def add_shared(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--data", default=argparse.SUPPRESS)
        p.add_argument("--protected", default=argparse.SUPPRESS)
        p.add_argument("--outcome", default=argparse.SUPPRESS)
        p.add_argument("--dim", type=int, default=argparse.SUPPRESS)
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        p.add_argument("--sigma", type=float, default=argparse.SUPPRESS,
                       help="RBF bandwidth override (median heuristic otherwise)")
        p.add_argument("--out", "-o", default=argparse.SUPPRESS)
        for key in _SOLVER_KEYS:
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, type=_CONFIG_TYPES[key], default=argparse.SUPPRESS)

    p_fit = sub.add_parser("fit", help="fit the fair loading matrix on a CSV dataset")
    add_shared(p_fit)
    p_fit.add_argument("--tau", type=float, default=argparse.SUPPRESS)
    p_fit.set_defaults(handler=_run_fit)

    p_cmp = sub.add_parser("compare", help="per-split comparison against vanilla PCA")
    add_shared(p_cmp)
    p_cmp.add_argument("--tau", type=float, action="append", dest="taus",
                       default=argparse.SUPPRESS, help="repeatable fairness tolerance")
    p_cmp.add_argument("--splits", type=int, default=argparse.SUPPRESS)
    p_cmp.add_argument("--train-frac", type=float, default=argparse.SUPPRESS)
    p_cmp.set_defaults(handler=_run_compare)

    return parser


def _read_kv_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    merged = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        for key, raw in _read_kv_file(config_path).items():
            if key not in _CONFIG_TYPES:
                raise ConfigurationError(f"unknown config key {key!r} in {config_path}")
            merged[key] = _CONFIG_TYPES[key](raw)
    cli = {k: v for k, v in vars(args).items() if k not in ("command", "handler", "config")}
    merged.update(cli)
    for key in ("data", "protected", "dim", "out"):
        if key not in merged or merged[key] is None:
            raise ConfigurationError(f"missing required option --{key}")
    return merged


def _solver_config(cfg: dict, tau: float, seed: int) -> RepmsConfig:
    kwargs = {k: cfg[k] for k in _SOLVER_KEYS if k in cfg}
    return RepmsConfig(tau=tau, seed=seed, **kwargs)


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}_{suffix}")


def _fmt(x: float) -> str:
    return format(x, ".6g")


def _run_synth(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    out = Path(args.out)
    if args.kind == 1:
        ds = synth1(args.seed)
    else:
        if args.p is None:
            raise ConfigurationError("--p is required for synth kind 2")
        ds = synth2(args.p, args.seed, n_per_group=args.n_per_group)
    write_csv(ds, out)
    manifest = RunManifest(
        command="synth",
        config={"kind": args.kind, "p": args.p, "n_per_group": args.n_per_group,
                "seed": args.seed, "out": str(out)},
        input_paths=[],
        seeds=[args.seed],
        output_paths=[str(out)],
        version=__version__,
        runtime_seconds=time.perf_counter() - started,
    )
    manifest.write(_sibling(out, "manifest.json"))
    print(f"wrote {ds.n_samples}x{ds.n_features} dataset to {out}")
    return 0


def _prepare_problem(ds_std: DataSet, dim: int, sigma_override: float | None):
    """Covariance, PCA init, bandwidth, and penalty problem for standardized data."""
    cov = Covariance.from_data(ds_std.features)
    V0 = pca_loadings(cov, dim)
    if sigma_override is None:
        kernel = KernelConfig(
            median_heuristic(ds_std.features @ V0), BandwidthSelection.MEDIAN_HEURISTIC
        )
    else:
        kernel = KernelConfig(float(sigma_override), BandwidthSelection.MANUAL)
    problem = PenaltyProblem(cov, ds_std.group_features(0), ds_std.group_features(1), kernel)
    return cov, V0, kernel, problem


def _config_echo(cfg: dict, kernel: KernelConfig, solver: RepmsConfig) -> dict:
    echo = {
        "sigma": kernel.sigma,
        "sigma_selection": kernel.selection.value,
        "covariance_divisor": "n-1",
        "standardization": "per-column z-score",
        "version": __version__,
        "tau": solver.tau,
        "seed": solver.seed,
        "dim": cfg["dim"],
    }
    for key in _SOLVER_KEYS:
        echo[key] = getattr(solver, key)
    return echo


def _run_fit(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = _merge_config(args, _FIT_DEFAULTS)
    out = Path(cfg["out"])

    ds = load_csv(cfg["data"], cfg["protected"], cfg.get("outcome"))
    ds_std = standardize(ds)
    cov, V0, kernel, problem = _prepare_problem(ds_std, cfg["dim"], cfg.get("sigma"))
    solver_cfg = _solver_config(cfg, tau=cfg["tau"], seed=cfg["seed"])
    outcome = repms_fit(problem, V0, solver_cfg)
    V = outcome.V

    ddp = None
    echo = _config_echo(cfg, kernel, solver_cfg)
    if ds_std.outcome is not None:
        projected = ds_std.features @ V
        clf_kernel = KernelConfig(
            median_heuristic(projected), BandwidthSelection.MEDIAN_HEURISTIC
        )
        clf = train_downstream_classifier(projected, ds_std.outcome, clf_kernel)
        ddp = delta_dp(projected, ds_std.protected, clf)
        echo["classifier"] = "rbf_kernel_logistic_ridge(lambda=1e-2)"
        echo["delta_dp_scope"] = "in_sample"

    report = FitReport(
        explained_variance_pct=explained_variance(cov, V),
        mmd2_train=constraint_h(problem, V),
        mmd2_test=None,
        delta_dp=ddp,
        communalities=communalities(V),
        status=outcome.status.value,
        config_echo=echo,
    )

    loadings_path = _sibling(out, "loadings.csv")
    _write_loadings(V, loadings_path)
    out.write_text("\n".join(report.to_kv_lines(ds.feature_names)) + "\n", encoding="utf-8")
    manifest = RunManifest(
        command="fit",
        config=_jsonable(cfg),
        input_paths=[str(cfg["data"])],
        seeds=[cfg["seed"]],
        output_paths=[str(out), str(loadings_path)],
        version=__version__,
        runtime_seconds=time.perf_counter() - started,
    )
    manifest.write(_sibling(out, "manifest.json"))

    print(
        f"status={report.status} "
        f"explained_variance_pct={_fmt(report.explained_variance_pct)} "
        f"mmd2_train={_fmt(report.mmd2_train)}"
        + (f" delta_dp={_fmt(ddp)}" if ddp is not None else "")
    )
    return 0


def _run_compare(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = _merge_config(args, _COMPARE_DEFAULTS)
    out = Path(cfg["out"])
    taus = list(cfg["taus"])

    ds = load_csv(cfg["data"], cfg["protected"], cfg.get("outcome"))
    methods = [("pca", None)] + [("mmd-fair-pca", tau) for tau in taus]

    split_rows: list[list[str]] = []
    split_header: list[str] | None = None
    comm_rows: list[tuple] = []
    cells: dict[tuple, dict[str, list]] = {
        m: {"var_pct": [], "acc_pct": [], "mmd2_test": [], "delta_dp": [], "improper": 0}
        for m in methods
    }

    for split_idx in range(cfg["splits"]):
        seed_i = cfg["seed"] + split_idx
        train, test = split(ds, SplitSpec(cfg["train_frac"], seed_i))
        train_std = standardize(train)
        test_std = apply_standardization(test, train_std.standardization)
        cov, V0, kernel, problem = _prepare_problem(train_std, cfg["dim"], cfg.get("sigma"))

        for method in methods:
            name, tau = method
            if tau is None:
                V, status = V0, FitStatus.PROPER_TERMINATION.value
            else:
                solver_cfg = _solver_config(cfg, tau=tau, seed=seed_i)
                outcome = repms_fit(problem, V0, solver_cfg)
                V, status = outcome.V, outcome.status.value

            acc = None
            ddp = None
            if train_std.outcome is not None:
                train_proj = train_std.features @ V
                test_proj = test_std.features @ V
                clf_kernel = KernelConfig(
                    median_heuristic(train_proj), BandwidthSelection.MEDIAN_HEURISTIC
                )
                clf = train_downstream_classifier(train_proj, train_std.outcome, clf_kernel)
                acc = classifier_accuracy(clf, test_proj, test_std.outcome)
                ddp = delta_dp(test_proj, test_std.protected, clf)

            report = FitReport(
                explained_variance_pct=explained_variance(cov, V),
                mmd2_train=constraint_h(problem, V),
                mmd2_test=fairness_mmd2(test_std, V, kernel),
                delta_dp=ddp,
                communalities=communalities(V),
                status=status,
                config_echo={},
            )
            rep_header, rep_row = report.to_csv_row(ds.feature_names)
            if split_header is None:
                split_header = ["method", "tau", "split", "acc_pct"] + rep_header
            split_rows.append(
                [name, "" if tau is None else repr(tau), str(split_idx),
                 "" if acc is None else repr(acc)] + rep_row
            )
            for fname, value in zip(ds.feature_names, report.communalities):
                comm_rows.append((name, tau, split_idx, fname, value))

            cell = cells[method]
            cell["var_pct"].append(report.explained_variance_pct)
            cell["mmd2_test"].append(report.mmd2_test)
            if acc is not None:
                cell["acc_pct"].append(acc)
            if ddp is not None:
                cell["delta_dp"].append(ddp)
            if status != FitStatus.PROPER_TERMINATION.value:
                cell["improper"] += 1

    splits_path = _sibling(out, "splits.csv")
    _write_rows(splits_path, split_header, split_rows)
    comm_path = _sibling(out, "communalities.csv")
    _write_rows(
        comm_path,
        ["method", "tau", "split", "feature", "communality"],
        [
            [name, "" if tau is None else repr(tau), str(idx), fname, repr(float(value))]
            for name, tau, idx, fname, value in comm_rows
        ],
    )

    summary_header = ["method", "tau"]
    for metric in ("var_pct", "acc_pct", "mmd2_test", "delta_dp"):
        summary_header += [f"{metric}_mean", f"{metric}_std"]
    summary_header.append("improper_count")
    summary_rows = []
    stats: dict[tuple, dict[str, tuple[float, float]]] = {}
    for method in methods:
        name, tau = method
        cell = cells[method]
        stats[method] = {}
        row = [name, "" if tau is None else repr(tau)]
        for metric in ("var_pct", "acc_pct", "mmd2_test", "delta_dp"):
            values = cell[metric]
            if values:
                mean = float(np.mean(values))
                std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
                stats[method][metric] = (mean, std)
                row += [repr(mean), repr(std)]
            else:
                row += ["", ""]
        row.append(str(cell["improper"]))
        summary_rows.append(row)
    _write_rows(out, summary_header, summary_rows)

    manifest = RunManifest(
        command="compare",
        config=_jsonable(cfg),
        input_paths=[str(cfg["data"])],
        seeds=[cfg["seed"] + i for i in range(cfg["splits"])],
        output_paths=[str(out), str(splits_path), str(comm_path)],
        version=__version__,
        runtime_seconds=time.perf_counter() - started,
    )
    manifest.write(_sibling(out, "manifest.json"))

    for method in methods:
        name, tau = method
        parts = [f"method={name}"]
        if tau is not None:
            parts.append(f"tau={_fmt(tau)}")
        for metric, (mean, std) in stats[method].items():
            parts.append(f"{metric}={_fmt(mean)}({_fmt(std)})")
        parts.append(f"improper={cells[method]['improper']}")
        print(" ".join(parts))
    return 0


def _write_loadings(V: np.ndarray, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"pc{j}" for j in range(V.shape[1])])
        for row in V:
            writer.writerow([repr(float(v)) for v in row])


def _write_rows(path: Path, header: list[str] | None, rows: list[list[str]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow(header)
        writer.writerows(rows)


def _jsonable(cfg: dict) -> dict:
    return {k: (list(v) if isinstance(v, (list, tuple)) else v) for k, v in cfg.items()}


if __name__ == "__main__":
    sys.exit(main())
