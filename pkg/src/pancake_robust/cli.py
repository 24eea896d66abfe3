"""Command-line front door: config loading, subcommand dispatch, and report I/O.

Subcommands (one verb per module surface): generate, corrupt, train,
certify-pancakes, sumnorm, verify-lemmas, experiment, sweep.  Datasets
are CSV, reports and configs are JSON.  Exit codes: 0 success, 1
validation failure, 2 premise or property check failure (so CI can gate
on the theorems), 3 I/O error, 64 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .adversary import CorruptionSpec, apply_corruption
from .analysis import (
    ExperimentConfig,
    ExperimentStageError,
    minimized_pancake_margin_bound,
    run_experiment,
    verify_outlier_gradient_bound,
)
from .core import (
    LabeledPoint,
    MarginCertificate,
    read_dataset_csv,
    validate_dataset,
    write_dataset_csv,
)
from .distributions import GeneratorSpec, generate_margin_separable
from .errors import InfeasibleSpecError, InvalidInputError
from .optimizer import HINGE, LOGISTIC, TrainConfig, loss_by_name, train
from .pancakes import PancakeParams, certify_empirical, direction_net
from .seeds import derive_seed, make_rng
from .sumnorm import (
    BOX_SYMMETRIC_ONE,
    BOX_ZERO_ONE,
    SignedPointSet,
    her_sum_norm_exact,
    her_sum_norm_heuristic,
    lin_sum_norm,
    rounding_check,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CHECK_FAILED = 2
EXIT_IO = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # noqa: D401 - argparse hook
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_hash() -> str:
    digest = hashlib.sha256()
    package_dir = Path(__file__).parent
    for path in sorted(package_dir.glob("*.py")):
        digest.update(path.read_bytes())
    return digest.hexdigest()[:12]


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _write_json(data: dict, path: str | None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _default_workers() -> int:
    return int(os.environ.get("PANCAKE_WORKERS", "1"))


def _cmd_generate(args) -> int:
    spec = GeneratorSpec.from_dict(_load_json(args.config))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    for note in spec.warnings():
        print(f"warning: {note}", file=sys.stderr)
    dataset, cert, stats = generate_margin_separable(spec)
    write_dataset_csv(dataset, args.out)
    if args.cert:
        _write_json(cert.to_dict(), args.cert)
    print(
        f"wrote {dataset.n} points (d={dataset.d}) to {args.out}; "
        f"{stats.draws} draws, {stats.rejected_margin} margin and "
        f"{stats.rejected_norm} norm rejections"
    )
    return EXIT_OK


def _cmd_corrupt(args) -> int:
    dataset = read_dataset_csv(args.infile)
    spec = CorruptionSpec.from_dict(_load_json(args.config))
    cert = None
    if args.cert:
        cert = MarginCertificate.from_dict(_load_json(args.cert))
    corrupted = apply_corruption(dataset, spec, cert)
    write_dataset_csv(corrupted, args.out)
    print(
        f"corrupted {corrupted.n_outliers}/{corrupted.n} points "
        f"({spec.strategy}, eta={spec.eta}) -> {args.out}"
    )
    return EXIT_OK


def _cmd_train(args) -> int:
    dataset = read_dataset_csv(args.infile)
    issues = validate_dataset(dataset)
    if issues:
        for issue in issues:
            print(f"invalid dataset: {issue}", file=sys.stderr)
        return EXIT_INVALID
    cfg = TrainConfig(
        gamma=args.gamma,
        iterations=args.iters,
        schedule=args.schedule,
        step_scale=args.step_scale,
        restarts=args.restarts,
        seed=args.seed,
        averaging=args.avg == "on",
    )
    result = train(dataset, loss_by_name(args.loss), cfg)
    _write_json(result.to_dict(), args.out)
    print(
        f"objective {result.objective:.6g}, stationarity gap "
        f"{result.stationarity_gap:.3g}, max ||w_t|| "
        f"{result.trajectory.max_iterate_norm:.6g} (cap {1.0 / args.gamma:.6g})"
    )
    return EXIT_OK


def _cmd_certify(args) -> int:
    dataset = read_dataset_csv(args.infile)
    anchors = read_dataset_csv(args.anchors) if args.anchors else dataset
    reference = dataset.inliers() if args.density_denominator == "inliers" else dataset
    params = PancakeParams(args.tau, args.rho, args.beta)
    net = direction_net(
        dataset.d, args.tau_prime, seed=args.seed, max_size=args.net_cap
    )
    report = certify_empirical(
        reference, anchors, net, params, workers=args.workers
    )
    payload = report.to_dict()
    payload["exhaustive"] = net.exhaustive
    payload["params"] = params.to_dict()
    _write_json(payload, args.out)
    verdict = "holds" if report.passes(params.beta) else "FAILS"
    print(
        f"beta_hat = {report.beta_hat:.6g} over {report.net_size} directions "
        f"(beta = {params.beta}): condition {verdict}"
    )
    return EXIT_OK if report.passes(params.beta) else EXIT_CHECK_FAILED


def _cmd_sumnorm(args) -> int:
    dataset = read_dataset_csv(args.infile)
    signed = SignedPointSet.from_dataset(dataset)
    if len(signed) == 0:
        print("no outlier rows in input", file=sys.stderr)
        return EXIT_INVALID
    if args.box is not None:
        box = BOX_ZERO_ONE if args.box == "zero-one" else BOX_SYMMETRIC_ONE
        method = "exact" if args.method == "exact" else "projected-gradient"
        report = lin_sum_norm(
            signed, box=box, method=method, restarts=args.restarts, seed=args.seed
        )
    elif args.method == "exact":
        report = her_sum_norm_exact(signed)
    else:
        report = her_sum_norm_heuristic(
            signed, restarts=args.restarts, seed=args.seed
        )
    payload = report.to_dict()
    if args.trials:
        coeffs = np.clip(np.abs(report.witness), 0.0, 1.0)
        payload["rounding_check"] = rounding_check(
            signed, coeffs, args.trials, seed=args.seed
        ).to_dict()
    _write_json(payload, args.out)
    print(
        f"sum norm {report.value:.9g} over {len(signed)} outliers "
        f"({report.method}, exact={report.exact})"
    )
    return EXIT_OK


def _cmd_verify_lemmas(args) -> int:
    rng = make_rng(args.seed)
    failures = 0

    # projected-margin bound: grid minimum vs the analytic minimizer
    grid = np.arange(0.0, 0.999 + 1e-12, 1e-4)
    for _ in range(args.instances):
        gamma = rng.uniform(0.1, 0.9)
        tau = gamma * rng.uniform(0.05, 0.95)
        values = (gamma - grid * tau) / np.sqrt(1.0 - grid * grid)
        at = float(grid[int(np.argmin(values))])
        expected = tau / gamma
        if abs(at - expected) > 2e-4 or abs(
            values.min() - minimized_pancake_margin_bound(gamma, tau)
        ) > 1e-6:
            failures += 1
    print(f"margin-bound minimizer: {args.instances} instances, {failures} failures")

    # outlier gradient cap fuzz
    bound_failures = 0
    for _ in range(args.instances):
        d = int(rng.integers(2, 6))
        m = int(rng.integers(1, 11))
        X = rng.uniform(-1.0, 1.0, (m, d))
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = np.where(norms > 1.0, X / norms, X)
        y = 2 * rng.integers(0, 2, m) - 1
        points = [LabeledPoint(X[i], int(y[i])) for i in range(m)]
        gamma = rng.uniform(0.2, 0.9)
        w = rng.standard_normal(d)
        w = w / np.linalg.norm(w) * rng.uniform(0.0, 1.0 / gamma)
        for loss in (HINGE, LOGISTIC):
            if not verify_outlier_gradient_bound(points, loss, w).passed:
                bound_failures += 1
    print(
        f"outlier gradient cap: {2 * args.instances} instances, "
        f"{bound_failures} failures"
    )
    failures += bound_failures

    # hereditary vs zero-one box equivalence
    eq_failures = 0
    for _ in range(args.instances):
        d = int(rng.integers(2, 7))
        m = int(rng.integers(1, 13))
        V = rng.uniform(-1.0, 1.0, (m, d))
        norms = np.linalg.norm(V, axis=1, keepdims=True)
        V = np.where(norms > 1.0, V / norms, V)
        her = her_sum_norm_exact(V).value
        lin = lin_sum_norm(V, box=BOX_ZERO_ONE, method="exact").value
        if abs(her - lin) > 1e-9:
            eq_failures += 1
    print(f"hereditary == zero-one box: {args.instances} instances, {eq_failures} failures")
    failures += eq_failures

    # rounding inequality
    rc_failures = 0
    for i in range(args.instances):
        d = int(rng.integers(2, 7))
        m = int(rng.integers(1, 13))
        V = rng.uniform(-1.0, 1.0, (m, d))
        a = rng.uniform(0.0, 1.0, m)
        check = rounding_check(V, a, trials=2000, seed=derive_seed(args.seed, f"rc{i}"))
        if not check.consistent:
            rc_failures += 1
    print(f"rounding inequality: {args.instances} instances, {rc_failures} failures")
    failures += rc_failures

    return EXIT_OK if failures == 0 else EXIT_CHECK_FAILED


def _cmd_experiment(args) -> int:
    config = ExperimentConfig.from_dict(_load_json(args.config))
    report = run_experiment(config, workers=args.workers)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(report.to_dict(), str(out_dir / "experiment.json"))
    if args.emit_csv:
        rows = _experiment_metric_rows(report)
        _write_metric_csv(rows, out_dir / "experiment_metrics.csv")
    ok = report.premises.passed and report.certification.passes(
        config.pancake.beta
    )
    print(
        f"error rate {report.conclusion.error_rate:.6g} "
        f"(beta {config.pancake.beta}), premises "
        f"{'pass' if report.premises.passed else 'FAIL'} "
        f"(slack {report.premises.slack:.4g}), beta_hat "
        f"{report.certification.beta_hat:.6g}"
    )
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _experiment_metric_rows(report) -> list[tuple[str, str, float]]:
    rows = [
        ("generate", "n", float(report.n)),
        ("generate", "inlier_margin", report.inlier_margin),
        ("corrupt", "n_outliers", float(report.n_outliers)),
        ("corrupt", "eta", report.eta),
        ("train", "objective", report.train_result.objective),
        ("train", "stationarity_gap", report.train_result.stationarity_gap),
        ("certify", "beta_hat", report.certification.beta_hat),
        ("certify", "rho_used", report.rho_used),
        ("sumnorm", "her_sum_norm", report.sum_norm.value),
        ("premises", "slack", report.premises.slack),
        ("conclusion", "error_rate", report.conclusion.error_rate),
    ]
    return rows


def _write_metric_csv(rows, path) -> None:
    with open(path, "w") as fh:
        fh.write("stage,metric,value\n")
        for stage, metric, value in rows:
            fh.write(f"{stage},{metric},{value:.17g}\n")


def emit_plot_data(rows, path) -> None:
    """Write long-format sweep rows ``sweep_param,seed,metric,value``."""
    with open(path, "w") as fh:
        fh.write("sweep_param,seed,metric,value\n")
        for param, seed, metric, value in rows:
            fh.write(f"{param},{seed},{metric},{value:.17g}\n")


def _sweep_sumnorm_scaling(config: dict) -> list[tuple]:
    n_outliers = int(config.get("n_outliers", 100))
    restarts = int(config.get("restarts", 50))
    rows = []
    for d in config["d_values"]:
        for seed in config["seeds"]:
            rng = make_rng(derive_seed(int(seed), f"sphere-d{d}"))
            V = rng.standard_normal((n_outliers, int(d)))
            V /= np.linalg.norm(V, axis=1, keepdims=True)
            report = her_sum_norm_heuristic(
                V, restarts=restarts, seed=derive_seed(int(seed), f"heur-d{d}")
            )
            rows.append((d, seed, "her_sum_norm", report.value))
            rows.append(
                (d, seed, "scaled", report.value * math.sqrt(d) / n_outliers)
            )
    return rows


def _set_config_path(config: ExperimentConfig, path: str, value) -> ExperimentConfig:
    head, _, rest = path.partition(".")
    if not rest:
        return replace(config, **{head: value})
    inner = getattr(config, head)
    return replace(config, **{head: replace(inner, **{rest: value})})


def _sweep_experiment(config: dict, workers: int) -> list[tuple]:
    base = ExperimentConfig.from_dict(config["base"])
    rows = []
    for value in config["values"]:
        for seed in config["seeds"]:
            cfg = _set_config_path(base, config["param"], value)
            cfg = replace(cfg, master_seed=int(seed))
            report = run_experiment(cfg, workers=workers)
            rows.append((value, seed, "error_rate", report.conclusion.error_rate))
            rows.append((value, seed, "her_sum_norm", report.sum_norm.value))
            rows.append((value, seed, "slack", report.premises.slack))
            rows.append((value, seed, "beta_hat", report.certification.beta_hat))
    return rows


def _cmd_sweep(args) -> int:
    config = _load_json(args.config)
    kind = config.get("kind")
    if kind == "sumnorm-scaling":
        rows = _sweep_sumnorm_scaling(config)
    elif kind == "experiment":
        rows = _sweep_experiment(config, args.workers)
    else:
        print(f"unknown sweep kind {kind!r}", file=sys.stderr)
        return EXIT_INVALID
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_plot_data(rows, out_dir / "sweep.csv")
    print(f"wrote {len(rows)} rows to {out_dir / 'sweep.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pancakes", description=__doc__)
    parser.add_argument(
        "--version",
        action="version",
        version=f"pancake-robust {__version__}+{_build_hash()}",
    )
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("generate", help="sample a margin-separable dataset")
    p.add_argument("--config", required=True, help="GeneratorSpec JSON")
    p.add_argument("--out", required=True, help="dataset CSV to write")
    p.add_argument("--cert", help="write the margin certificate JSON here")
    p.add_argument("--seed", type=int, help="override the spec seed")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("corrupt", help="apply a corruption strategy")
    p.add_argument("--in", dest="infile", required=True, help="dataset CSV")
    p.add_argument("--config", required=True, help="CorruptionSpec JSON")
    p.add_argument("--out", required=True, help="corrupted CSV to write")
    p.add_argument("--cert", help="margin certificate JSON (boundary flips)")
    p.set_defaults(func=_cmd_corrupt)

    p = sub.add_parser("train", help="constrained surrogate-loss training")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--loss", choices=["hinge", "logistic"], default="hinge")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--schedule", choices=["constant", "inverse_sqrt"],
                   default="inverse_sqrt")
    p.add_argument("--step-scale", type=float, default=None)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--avg", choices=["on", "off"], default="on")
    p.add_argument("--out", help="TrainResult JSON (stdout when omitted)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("certify-pancakes", help="empirical dense-pancakes check")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--anchors", help="anchor dataset CSV (default: the input)")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--tau-prime", type=float, default=0.5)
    p.add_argument("--net-cap", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=_default_workers())
    p.add_argument("--density-denominator", choices=["all", "inliers"],
                   default="all")
    p.add_argument("--out", help="CertificationReport JSON (stdout when omitted)")
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("sumnorm", help="sum norms of the outlier rows")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--method", choices=["exact", "heuristic"], default="exact")
    p.add_argument("--box", choices=["zero-one", "sym-one"], default=None,
                   help="compute the box-relaxed linear norm instead")
    p.add_argument("--restarts", type=int, default=50)
    p.add_argument("--trials", type=int, default=None,
                   help="also run a rounding check with this many trials")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="SumNormReport JSON (stdout when omitted)")
    p.set_defaults(func=_cmd_sumnorm)

    p = sub.add_parser("verify-lemmas", help="randomized lemma verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=50)
    p.set_defaults(func=_cmd_verify_lemmas)

    p = sub.add_parser("experiment", help="full pipeline run")
    p.add_argument("--config", required=True, help="ExperimentConfig JSON")
    p.add_argument("--out", default="experiment-out")
    p.add_argument("--emit-csv", action="store_true")
    p.add_argument("--workers", type=int, default=_default_workers())
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("sweep", help="parameter sweep with plot-data CSV")
    p.add_argument("--config", required=True, help="sweep config JSON")
    p.add_argument("--out", default="sweep-out")
    p.add_argument("--workers", type=int, default=_default_workers())
    p.set_defaults(func=_cmd_sweep)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ExperimentStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.original, OSError):
            return EXIT_IO
        return EXIT_INVALID
    except (InvalidInputError, InfeasibleSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
