"""Numeric verifiers for the margin/outlier lemmas and the end-to-end pipeline.

The verifiers are diagnostic: they return reports with pass flags rather
than gating anything, because their value is falsifiability.  The
pipeline runs generate -> corrupt -> train -> certify -> sum norm ->
premise check -> fresh-sample conclusion, with every stage seeded by a
fixed split of the master seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .adversary import CorruptionSpec, apply_corruption
from .core import (
    Dataset,
    LabeledPoint,
    MarginCertificate,
    margin_of,
    validate_dataset,
)
from .distributions import GeneratorSpec, RejectionStats, generate_margin_separable
from .errors import DegenerateDirectionError, InvalidInputError
from .optimizer import (
    SurrogateLoss,
    TrainConfig,
    TrainResult,
    loss_by_name,
    loss_grad,
    train,
)
from .pancakes import (
    CertificationReport,
    PancakeParams,
    TransferParams,
    certify_empirical,
    direction_net,
    estimate_density_floor,
)
from .seeds import derive_seed
from .sumnorm import (
    BOX_SYMMETRIC_ONE,
    SUBSET_ENUMERATION_LIMIT,
    SignedPointSet,
    SumNormReport,
    her_sum_norm_exact,
    her_sum_norm_heuristic,
    lin_sum_norm,
)

LEMMA_TOL = 1e-9


def pancake_margin_bound(gamma_star: float, tau: float, alpha: float) -> float:
    """The projected-margin lower bound ``(gamma* - alpha tau) / sqrt(1 - alpha^2)``."""
    if not (0.0 <= alpha < 1.0):
        raise InvalidInputError(f"alpha must lie in [0, 1), got {alpha}")
    return (gamma_star - alpha * tau) / math.sqrt(1.0 - alpha * alpha)


def minimized_pancake_margin_bound(gamma_star: float, tau: float) -> float:
    """Worst case of the bound over alpha, attained at alpha = tau/gamma*."""
    if tau >= gamma_star:
        raise InvalidInputError("the minimized bound requires tau < gamma_star")
    return math.sqrt(gamma_star * gamma_star - tau * tau)


@dataclass(frozen=True, eq=False)
class PancakeMarginReport:
    """Margins of pancake points along the deflated separator direction.

    ``v_prime`` is the separator direction with its component along the
    pancake direction removed and renormalized; ``bound`` is the
    alpha-minimized lower bound ``sqrt(gamma*^2 - tau^2)``.
    """

    alpha: float
    v_prime: np.ndarray
    bound: float
    per_point_margins: np.ndarray
    passed: bool

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "v_prime": self.v_prime.tolist(),
            "bound": self.bound,
            "per_point_margins": self.per_point_margins.tolist(),
            "passed": self.passed,
        }


def verify_pancake_margin_lemma(
    v,
    cert: MarginCertificate,
    tau: float,
    pancake_points: Sequence[LabeledPoint],
) -> PancakeMarginReport:
    """Check the margin every pancake point keeps along the deflated separator.

    Preconditions: ``v`` is a unit direction with ``alpha = <v, v*> >= 0``
    and not parallel to the separator direction ``v*``; ``tau < gamma*``;
    every point satisfies the inlier margin ``y <x, v*> >= gamma*`` and
    the pancake cap ``y <x, v> <= tau``.  The verified claims are
    ``y <x, v'> >= (gamma* - alpha tau) / sqrt(1 - alpha^2)`` for
    ``v' = normalize(v* - alpha v)``, and the alpha-free floor
    ``y <x, v'> >= sqrt(gamma*^2 - tau^2)``.
    """
    v = np.asarray(v, dtype=np.float64)
    if abs(float(np.linalg.norm(v)) - 1.0) > 1e-9:
        raise InvalidInputError("v must be a unit vector")
    v_star = cert.direction()
    gamma = cert.gamma_star
    if not tau < gamma:
        raise InvalidInputError(f"need tau < gamma_star, got tau={tau}, gamma={gamma}")
    alpha = float(v @ v_star)
    if alpha < -LEMMA_TOL:
        raise InvalidInputError(f"need <v, v*> >= 0, got alpha={alpha}")
    alpha = max(alpha, 0.0)
    if alpha >= 1.0 - 1e-12:
        raise DegenerateDirectionError(
            "v is parallel to the separator direction; v' is undefined"
        )
    if not pancake_points:
        raise InvalidInputError("need at least one pancake point")
    X = np.stack([p.x for p in pancake_points])
    y = np.array([p.y for p in pancake_points], dtype=np.float64)
    star_margins = y * (X @ v_star)
    if np.any(star_margins < gamma - LEMMA_TOL):
        raise InvalidInputError(
            "a point violates the inlier margin y<x,v*> >= gamma_star"
        )
    cap = y * (X @ v)
    if np.any(cap > tau + LEMMA_TOL):
        raise InvalidInputError("a point violates the pancake cap y<x,v> <= tau")

    deflated = v_star - alpha * v
    v_prime = deflated / float(np.linalg.norm(deflated))
    margins = y * (X @ v_prime)
    alpha_bound = pancake_margin_bound(gamma, tau, alpha)
    floor = minimized_pancake_margin_bound(gamma, tau)
    passed = bool(
        np.all(margins >= alpha_bound - LEMMA_TOL)
        and np.all(margins >= floor - LEMMA_TOL)
    )
    return PancakeMarginReport(
        alpha=alpha,
        v_prime=v_prime,
        bound=floor,
        per_point_margins=margins,
        passed=passed,
    )


def verify_hinge_gradient_active(
    w, gamma: float, tau: float, points: Sequence[LabeledPoint]
) -> bool:
    """Reconstructed activity check for hinge gradients on pancake points.

    With ``||w|| <= 1/gamma`` and ``tau <= gamma/2``, a point whose
    projection onto ``w/||w||`` is capped by tau has functional margin
    ``y <x, w> <= 1/2 < 1``, so the hinge derivative there is exactly -1.
    Returns True when every given point is in that active regime.
    """
    w = np.asarray(w, dtype=np.float64)
    norm = float(np.linalg.norm(w))
    if norm == 0.0 or norm > 1.0 / gamma + 1e-9:
        raise InvalidInputError("w must be nonzero with ||w|| <= 1/gamma")
    if tau > gamma / 2.0 + 1e-12:
        raise InvalidInputError("activity check requires tau <= gamma/2")
    direction = w / norm
    for p in points:
        if p.y * float(p.x @ direction) <= tau + LEMMA_TOL:
            if p.y * float(p.x @ w) >= 1.0:
                return False
    return True


@dataclass(frozen=True)
class GradientBoundReport:
    """Summed outlier gradient norm against the box-relaxed sum norm cap."""

    lhs: float
    rhs: float
    passed: bool
    exact: bool

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "passed": self.passed,
            "exact": self.exact,
        }


def verify_outlier_gradient_bound(
    outliers: Sequence[LabeledPoint] | Dataset,
    loss: SurrogateLoss,
    w,
) -> GradientBoundReport:
    """Check ``||sum_O grad loss|| <= L * LinSumNorm(O)`` over the [-1,1] box.

    Each gradient is ``f'(y<x,w>) y x`` with ``|f'| <= L``, so the summed
    gradient is L times a combination of the signed vectors with
    coefficients in [-1, 1]; the symmetric-box linear sum norm is exactly
    the maximum such combination, making this a theorem.  Any failure
    signals a bug.
    """
    if isinstance(outliers, Dataset):
        mask = outliers.outlier_mask
        points = [p for p, m in zip(outliers.points, mask) if m]
    else:
        points = list(outliers)
    w = np.asarray(w, dtype=np.float64)
    if not points:
        return GradientBoundReport(0.0, 0.0, True, True)
    total = np.zeros(w.shape[0])
    for p in points:
        total += loss_grad(loss, w, p)
    lhs = float(np.linalg.norm(total))
    V = np.stack([p.y * p.x for p in points])
    if len(points) <= SUBSET_ENUMERATION_LIMIT:
        cap = lin_sum_norm(V, box=BOX_SYMMETRIC_ONE, method="exact")
    else:
        cap = lin_sum_norm(V, box=BOX_SYMMETRIC_ONE, method="projected-gradient")
    rhs = loss.lipschitz * cap.value
    passed = lhs <= rhs + LEMMA_TOL
    return GradientBoundReport(lhs=lhs, rhs=rhs, passed=passed, exact=cap.exact)


@dataclass(frozen=True)
class TheoremPremises:
    """The two premises: tau <= gamma*/2 and positive outlier-budget slack.

    ``slack = (1 - eta) * rho * gamma* * n - 2 * HerSumNorm(O)``; the
    robustness guarantee needs it strictly positive.
    """

    tau: float
    rho: float
    beta: float
    gamma_star: float
    eta: float
    n: int
    her_sum_norm_O: float
    slack: float
    her_exact: bool

    @property
    def tau_ok(self) -> bool:
        return self.tau <= self.gamma_star / 2.0 + 1e-12

    @property
    def slack_ok(self) -> bool:
        return self.slack > 0.0

    @property
    def passed(self) -> bool:
        return self.tau_ok and self.slack_ok

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "rho": self.rho,
            "beta": self.beta,
            "gamma_star": self.gamma_star,
            "eta": self.eta,
            "n": self.n,
            "her_sum_norm_O": self.her_sum_norm_O,
            "slack": self.slack,
            "her_exact": self.her_exact,
            "tau_ok": self.tau_ok,
            "slack_ok": self.slack_ok,
            "passed": self.passed,
        }


def outlier_sum_norm(
    dataset: Dataset, restarts: int = 50, seed: int = 0
) -> SumNormReport:
    """Hereditary sum norm of the outliers' signed vectors.

    Exact up to the enumeration guard, then a flagged heuristic lower
    bound (a lower bound can only make the premise slack look better;
    the ``exact`` flag says which engine ran).
    """
    signed = SignedPointSet.from_dataset(dataset)
    if len(signed) <= SUBSET_ENUMERATION_LIMIT:
        return her_sum_norm_exact(signed)
    return her_sum_norm_heuristic(signed, restarts=restarts, seed=seed)


def check_theorem_premises(
    dataset: Dataset,
    cert: MarginCertificate,
    params: PancakeParams,
    her_restarts: int = 50,
    seed: int = 0,
    sum_norm_report: SumNormReport | None = None,
) -> TheoremPremises:
    """Evaluate both premises on a role-tagged dataset."""
    report = sum_norm_report
    if report is None:
        report = outlier_sum_norm(dataset, restarts=her_restarts, seed=seed)
    eta = dataset.eta
    slack = (1.0 - eta) * params.rho * cert.gamma_star * dataset.n - 2.0 * report.value
    return TheoremPremises(
        tau=params.tau,
        rho=params.rho,
        beta=params.beta,
        gamma_star=cert.gamma_star,
        eta=eta,
        n=dataset.n,
        her_sum_norm_O=report.value,
        slack=slack,
        her_exact=report.exact,
    )


@dataclass(frozen=True)
class ConclusionReport:
    """Misclassification rate of w on fresh inliers against the beta target."""

    error_rate: float
    beta: float
    n_test: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "error_rate": self.error_rate,
            "beta": self.beta,
            "n_test": self.n_test,
            "passed": self.passed,
        }


def evaluate_conclusion(w, test: Dataset, beta: float) -> ConclusionReport:
    """Error rate ``y <x, w> <= 0`` on a clean test set (boundary counts as error)."""
    if test.outlier_mask.any():
        raise InvalidInputError("conclusion test sets must contain only inliers")
    w = np.asarray(w, dtype=np.float64)
    margins = test.y * (test.X @ w)
    error_rate = float((margins <= 0.0).mean())
    return ConclusionReport(
        error_rate=error_rate,
        beta=beta,
        n_test=test.n,
        passed=error_rate <= beta,
    )


class ExperimentStageError(RuntimeError):
    """Wraps a failure inside a named pipeline stage."""

    def __init__(self, stage: str, original: BaseException) -> None:
        super().__init__(f"stage {stage!r}: {original}")
        self.stage = stage
        self.original = original


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Everything a full pipeline run needs, serialized field for field."""

    master_seed: int
    generator: GeneratorSpec
    corruption: CorruptionSpec
    train: TrainConfig
    pancake: PancakeParams
    transfer: TransferParams
    loss: str = "hinge"
    n_test: int = 10_000
    net_max_size: int = 500
    estimate_rho: bool = True
    her_restarts: int = 50

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "generator": self.generator.to_dict(),
            "corruption": self.corruption.to_dict(),
            "train": self.train.to_dict(),
            "pancake": self.pancake.to_dict(),
            "transfer": self.transfer.to_dict(),
            "loss": self.loss,
            "n_test": self.n_test,
            "net_max_size": self.net_max_size,
            "estimate_rho": self.estimate_rho,
            "her_restarts": self.her_restarts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(
            master_seed=int(data["master_seed"]),
            generator=GeneratorSpec.from_dict(data["generator"]),
            corruption=CorruptionSpec.from_dict(data["corruption"]),
            train=TrainConfig.from_dict(data["train"]),
            pancake=PancakeParams.from_dict(data["pancake"]),
            transfer=TransferParams.from_dict(data["transfer"]),
            loss=data.get("loss", "hinge"),
            n_test=int(data.get("n_test", 10_000)),
            net_max_size=int(data.get("net_max_size", 500)),
            estimate_rho=bool(data.get("estimate_rho", True)),
            her_restarts=int(data.get("her_restarts", 50)),
        )


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    config: ExperimentConfig
    seeds: dict[str, int]
    rejection: RejectionStats
    generator_warnings: tuple[str, ...]
    validation_issues: tuple[str, ...]
    n: int
    n_outliers: int
    eta: float
    inlier_margin: float
    train_result: TrainResult
    certification: CertificationReport
    net_exhaustive: bool
    rho_config: float
    rho_used: float
    sum_norm: SumNormReport
    premises: TheoremPremises
    conclusion: ConclusionReport
    timings: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "seeds": dict(self.seeds),
            "rejection": self.rejection.to_dict(),
            "generator_warnings": list(self.generator_warnings),
            "validation_issues": list(self.validation_issues),
            "n": self.n,
            "n_outliers": self.n_outliers,
            "eta": self.eta,
            "inlier_margin": self.inlier_margin,
            "train": self.train_result.to_dict(),
            "certification": self.certification.to_dict(),
            "net_exhaustive": self.net_exhaustive,
            "rho_config": self.rho_config,
            "rho_used": self.rho_used,
            "sum_norm": self.sum_norm.to_dict(),
            "premises": self.premises.to_dict(),
            "conclusion": self.conclusion.to_dict(),
            "timings": dict(self.timings),
        }


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Run the full pipeline deterministically from the master seed.

    Stage seeds are split from the master seed by name, so the run is
    reproducible end to end and stages stay independent under reseeding.
    Premise or certification failures are recorded, never raised; only
    genuine stage errors propagate, labeled with their stage.
    """
    seeds = {
        stage: derive_seed(config.master_seed, stage)
        for stage in ("generate", "corrupt", "train", "net", "sumnorm", "test")
    }
    timings: dict[str, float] = {}

    def run_stage(stage: str, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except Exception as exc:
            raise ExperimentStageError(stage, exc) from exc
        timings[stage] = time.perf_counter() - start
        return result

    gen_spec = replace(config.generator, seed=seeds["generate"])
    clean, cert, rejection = run_stage("generate", generate_margin_separable, gen_spec)

    corruption = replace(config.corruption, seed=seeds["corrupt"])
    corrupted = run_stage("corrupt", apply_corruption, clean, corruption, cert)

    train_cfg = replace(config.train, seed=seeds["train"])
    loss = loss_by_name(config.loss)
    train_result = run_stage("train", train, corrupted, loss, train_cfg)

    net = direction_net(
        config.generator.d,
        config.transfer.tau_prime,
        seed=seeds["net"],
        max_size=config.net_max_size,
    )

    def certify_stage():
        rho_used = config.pancake.rho
        if config.estimate_rho:
            rho_used = estimate_density_floor(
                corrupted,
                corrupted,
                net,
                config.pancake.tau,
                config.pancake.beta,
                workers=workers,
            )
        params = PancakeParams(config.pancake.tau, rho_used, config.pancake.beta)
        return rho_used, certify_empirical(
            corrupted, corrupted, net, params, workers=workers
        )

    rho_used, certification = run_stage("certify", certify_stage)

    premises_params = PancakeParams(
        config.pancake.tau, rho_used, config.pancake.beta
    )
    sum_norm = run_stage(
        "sumnorm",
        outlier_sum_norm,
        corrupted,
        config.her_restarts,
        seeds["sumnorm"],
    )
    premises = check_theorem_premises(
        corrupted, cert, premises_params, sum_norm_report=sum_norm
    )

    test_spec = replace(
        config.generator, n=config.n_test, seed=seeds["test"]
    )
    test_set, _, _ = run_stage("test", generate_margin_separable, test_spec)
    conclusion = evaluate_conclusion(
        train_result.w, test_set, config.pancake.beta
    )

    return ExperimentReport(
        config=config,
        seeds=seeds,
        rejection=rejection,
        generator_warnings=tuple(config.generator.warnings()),
        validation_issues=tuple(validate_dataset(corrupted)),
        n=corrupted.n,
        n_outliers=corrupted.n_outliers,
        eta=corrupted.eta,
        inlier_margin=margin_of(corrupted, cert, "inlier"),
        train_result=train_result,
        certification=certification,
        net_exhaustive=net.exhaustive,
        rho_config=config.pancake.rho,
        rho_used=rho_used,
        sum_norm=sum_norm,
        premises=premises,
        conclusion=conclusion,
        timings=timings,
    )
