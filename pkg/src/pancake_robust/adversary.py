"""Corruption strategies that turn a clean dataset into D = I + O.

Label-flip strategies negate labels of existing points (features are
never touched) and retag them as outliers; malicious injection appends
identical unit-vector points.  The flip budget is ``k = floor(eta * n)``,
never rounded up, and all tie-breaks use ascending dataset index so runs
are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import INLIER, OUTLIER, Dataset, LabeledPoint, MarginCertificate
from .errors import InvalidInputError
from .seeds import make_rng

FLIP_RANDOM = "flip_random"
FLIP_BOUNDARY = "flip_boundary"
FLIP_ALIGNED = "flip_aligned"
INJECT_MALICIOUS = "inject_malicious"
STRATEGIES = (FLIP_RANDOM, FLIP_BOUNDARY, FLIP_ALIGNED, INJECT_MALICIOUS)


@dataclass(frozen=True, eq=False)
class CorruptionSpec:
    strategy: str
    eta: float
    seed: int = 0
    u: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise InvalidInputError(f"unknown corruption strategy {self.strategy!r}")
        eta = float(self.eta)
        if not (0.0 <= eta < 1.0):
            raise InvalidInputError(f"eta must lie in [0, 1), got {eta}")
        object.__setattr__(self, "eta", eta)
        if self.u is not None:
            u = np.array(self.u, dtype=np.float64)
            _check_unit(u)
            u.setflags(write=False)
            object.__setattr__(self, "u", u)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "eta": self.eta,
            "seed": self.seed,
            "u": None if self.u is None else self.u.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorruptionSpec":
        u = data.get("u")
        return cls(
            strategy=data["strategy"],
            eta=float(data["eta"]),
            seed=int(data.get("seed", 0)),
            u=None if u is None else np.asarray(u, dtype=np.float64),
        )


def _check_unit(u: np.ndarray) -> None:
    if u.ndim != 1 or abs(float(np.linalg.norm(u)) - 1.0) > 1e-9:
        raise InvalidInputError("direction u must be a unit vector")


def _require_all_inlier(dataset: Dataset) -> None:
    if dataset.outlier_mask.any():
        raise InvalidInputError("flip strategies expect an all-inlier dataset")


def corruption_count(eta: float, n: int) -> int:
    # floor with a dust guard so eta*n landing epsilon below an integer
    # still counts it; the budget is never exceeded by more than round-off.
    return int(math.floor(eta * n + 1e-9))


def _flip(dataset: Dataset, indices: np.ndarray) -> Dataset:
    flip = set(int(i) for i in indices)
    points = tuple(
        LabeledPoint(p.x, -p.y) if i in flip else p
        for i, p in enumerate(dataset.points)
    )
    roles = tuple(
        OUTLIER if i in flip else r for i, r in enumerate(dataset.roles)
    )
    return Dataset(points, roles, dataset.d)


def flip_random(dataset: Dataset, eta: float, seed: int) -> Dataset:
    """Negate the labels of k points chosen uniformly without replacement."""
    _require_all_inlier(dataset)
    k = corruption_count(eta, dataset.n)
    if k == 0:
        return dataset
    rng = make_rng(seed)
    indices = rng.choice(dataset.n, size=k, replace=False)
    return _flip(dataset, indices)


def flip_boundary(dataset: Dataset, eta: float, cert: MarginCertificate) -> Dataset:
    """Flip the k points with the smallest functional margin under the certificate."""
    _require_all_inlier(dataset)
    k = corruption_count(eta, dataset.n)
    if k == 0:
        return dataset
    margins = dataset.y * (dataset.X @ cert.w_star)
    order = np.argsort(margins, kind="stable")
    return _flip(dataset, order[:k])


def flip_aligned(dataset: Dataset, eta: float, u) -> Dataset:
    """Flip the k points whose signed vectors become most aligned with u.

    Picks the k most negative ``<u, y * x>``; after flipping, those
    points contribute ``-y * x`` and so maximize the summed projection of
    the outliers' signed vectors onto u over all k-subsets (the objective
    is linear, so the greedy choice is optimal).
    """
    _require_all_inlier(dataset)
    u = np.asarray(u, dtype=np.float64)
    _check_unit(u)
    k = corruption_count(eta, dataset.n)
    if k == 0:
        return dataset
    scores = dataset.y * (dataset.X @ u)
    order = np.argsort(scores, kind="stable")
    return _flip(dataset, order[:k])


def inject_malicious(dataset: Dataset, eta: float, u) -> Dataset:
    """Append k identical outliers (x=u, y=+1) so outliers are an eta fraction.

    ``k = floor(eta * n / (1 - eta))`` makes ``k / (n + k) ~= eta``.  The
    injected signed vectors are k copies of the same unit vector, so the
    hereditary sum norm of the injected set is exactly k: the worst case
    where the adversary's mass adds up coherently.
    """
    u = np.asarray(u, dtype=np.float64)
    _check_unit(u)
    if u.shape[0] != dataset.d:
        raise InvalidInputError(
            f"direction dimension {u.shape[0]} != dataset dimension {dataset.d}"
        )
    eta = float(eta)
    if not (0.0 <= eta < 1.0):
        raise InvalidInputError(f"eta must lie in [0, 1), got {eta}")
    k = corruption_count(eta / (1.0 - eta), dataset.n)
    if k == 0:
        return dataset
    injected = tuple(LabeledPoint(u, 1) for _ in range(k))
    return Dataset(
        dataset.points + injected,
        dataset.roles + (OUTLIER,) * k,
        dataset.d,
    )


def apply_corruption(
    dataset: Dataset,
    spec: CorruptionSpec,
    cert: MarginCertificate | None = None,
) -> Dataset:
    """Dispatch on the strategy; boundary flips require the certificate."""
    if spec.strategy == FLIP_RANDOM:
        return flip_random(dataset, spec.eta, spec.seed)
    if spec.strategy == FLIP_BOUNDARY:
        if cert is None:
            raise InvalidInputError("flip_boundary needs a margin certificate")
        return flip_boundary(dataset, spec.eta, cert)
    direction = spec.u
    if direction is None:
        if cert is None:
            raise InvalidInputError(
                f"{spec.strategy} needs a direction u or a certificate to derive one"
            )
        direction = cert.direction()
    if spec.strategy == FLIP_ALIGNED:
        return flip_aligned(dataset, spec.eta, direction)
    return inject_malicious(dataset, spec.eta, direction)
