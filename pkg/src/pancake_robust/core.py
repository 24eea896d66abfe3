"""Domain types, vector geometry, dataset validation, and margin certificates.

A dataset is an ordered collection of labeled points in the closed unit
ball of R^d, each tagged as an inlier or an outlier.  A margin certificate
is a separator ``w`` with ``||w|| <= 1/gamma`` whose functional margin
``y * <x, w>`` is at least 1 on every inlier; equivalently the unit
direction ``u = gamma * w`` realizes margin ``y * <x, u> >= gamma``.

All types are immutable after construction and all operations are pure,
so everything here is safe to share across concurrent workers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import EmptySelectionError, InvalidInputError

# IEEE double round-off headroom for ball/margin checks on d <= ~1000 sums.
BALL_TOL = 1e-9
MARGIN_TOL = 1e-9

INLIER = "inlier"
OUTLIER = "outlier"
ROLES = (INLIER, OUTLIER)


def _as_vector(x) -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"expected a 1-d vector, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabeledPoint:
    """A feature vector with a signed label.

    Labels are stored as signed integers, never booleans, so expressions
    like ``y * (x @ w)`` are the literal algebra.  Construction does not
    enforce the unit-ball or label invariants; ``validate_dataset``
    reports violations instead of raising, so malformed data can be
    loaded and inspected.
    """

    x: np.ndarray
    y: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _as_vector(self.x))
        y = self.y
        if isinstance(y, float) and not y.is_integer():
            raise InvalidInputError(f"label must be an integer, got {y!r}")
        object.__setattr__(self, "y", int(y))

    @property
    def d(self) -> int:
        return self.x.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabeledPoint):
            return NotImplemented
        return self.y == other.y and np.array_equal(self.x, other.x)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered points with parallel inlier/outlier role tags.

    Role tags live here rather than on the points so corruption
    strategies can retag without copying features.
    """

    points: tuple[LabeledPoint, ...]
    roles: tuple[str, ...]
    d: int

    def __post_init__(self) -> None:
        points = tuple(self.points)
        roles = tuple(self.roles)
        if not points:
            raise InvalidInputError("a dataset needs at least one point")
        if len(roles) != len(points):
            raise InvalidInputError(
                f"{len(points)} points but {len(roles)} role tags"
            )
        unknown = sorted(set(roles) - set(ROLES))
        if unknown:
            raise InvalidInputError(f"unknown role tags: {unknown}")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "d", int(self.d))

    @classmethod
    def from_points(
        cls,
        points: Iterable[LabeledPoint],
        roles: Sequence[str] | None = None,
        d: int | None = None,
    ) -> "Dataset":
        points = tuple(points)
        if roles is None:
            roles = (INLIER,) * len(points)
        if d is None:
            if not points:
                raise InvalidInputError("cannot infer dimension of an empty dataset")
            d = points[0].d
        return cls(points, tuple(roles), d)

    @classmethod
    def from_arrays(cls, X, y, outlier=None) -> "Dataset":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        if X.ndim != 2:
            raise InvalidInputError(f"X must be (n, d), got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise InvalidInputError("y must be parallel to the rows of X")
        if outlier is None:
            outlier = np.zeros(X.shape[0], dtype=bool)
        outlier = np.asarray(outlier, dtype=bool)
        points = tuple(LabeledPoint(X[i], int(y[i])) for i in range(X.shape[0]))
        roles = tuple(OUTLIER if o else INLIER for o in outlier)
        return cls(points, roles, X.shape[1])

    @property
    def n(self) -> int:
        return len(self.points)

    @cached_property
    def X(self) -> np.ndarray:
        if any(p.d != self.d for p in self.points):
            raise InvalidInputError(
                "dataset has mixed dimensions; see validate_dataset"
            )
        X = np.stack([p.x for p in self.points])
        X.setflags(write=False)
        return X

    @cached_property
    def y(self) -> np.ndarray:
        arr = np.array([p.y for p in self.points], dtype=np.int64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def outlier_mask(self) -> np.ndarray:
        arr = np.array([r == OUTLIER for r in self.roles], dtype=bool)
        arr.setflags(write=False)
        return arr

    @property
    def n_outliers(self) -> int:
        return int(self.outlier_mask.sum())

    @property
    def eta(self) -> float:
        """Realized outlier fraction |O| / n."""
        return self.n_outliers / self.n

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        if indices.dtype == bool:
            indices = np.flatnonzero(indices)
        if indices.size == 0:
            raise EmptySelectionError("subset selected no points")
        points = tuple(self.points[int(i)] for i in indices)
        roles = tuple(self.roles[int(i)] for i in indices)
        return Dataset(points, roles, self.d)

    def inliers(self) -> "Dataset":
        return self.subset(~self.outlier_mask)

    def outliers(self) -> "Dataset":
        return self.subset(self.outlier_mask)

    def __iter__(self) -> Iterator[LabeledPoint]:
        return iter(self.points)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.d == other.d
            and self.roles == other.roles
            and len(self.points) == len(other.points)
            and all(p == q for p, q in zip(self.points, other.points))
        )


@dataclass(frozen=True, eq=False)
class MarginCertificate:
    """Reference separator ``w_star`` with target margin ``gamma_star``.

    The norm bound ``||w_star|| <= 1/gamma_star`` is enforced at
    construction; whether the certificate actually separates a given
    dataset's inliers at margin 1 is checked by ``margin_of``.
    """

    w_star: np.ndarray
    gamma_star: float

    def __post_init__(self) -> None:
        w = _as_vector(self.w_star)
        gamma = float(self.gamma_star)
        if not np.isfinite(gamma) or gamma <= 0:
            raise InvalidInputError(f"gamma_star must be positive, got {gamma}")
        if not np.all(np.isfinite(w)):
            raise InvalidInputError("w_star has non-finite entries")
        norm = float(np.linalg.norm(w))
        if norm > 1.0 / gamma + BALL_TOL:
            raise InvalidInputError(
                f"||w_star|| = {norm:.9g} exceeds 1/gamma_star = {1.0 / gamma:.9g}"
            )
        object.__setattr__(self, "w_star", w)
        object.__setattr__(self, "gamma_star", gamma)

    @property
    def d(self) -> int:
        return self.w_star.shape[0]

    @property
    def u_star(self) -> np.ndarray:
        """Separator direction scaled into the unit ball, ``gamma * w``."""
        return self.gamma_star * self.w_star

    def direction(self) -> np.ndarray:
        """Exactly unit-norm separator direction."""
        norm = float(np.linalg.norm(self.w_star))
        if norm == 0.0:
            raise InvalidInputError("certificate separator is the zero vector")
        return self.w_star / norm

    def to_dict(self) -> dict:
        return {"w_star": self.w_star.tolist(), "gamma_star": self.gamma_star}

    @classmethod
    def from_dict(cls, data: dict) -> "MarginCertificate":
        return cls(np.asarray(data["w_star"], dtype=np.float64), float(data["gamma_star"]))


def project_to_ball(w, radius: float) -> np.ndarray:
    """Euclidean projection onto the centered ball of the given radius.

    Returns ``w`` unchanged when it is already inside; otherwise rescales
    to norm at most ``radius``.  The rescale loop guarantees the result
    re-projects to itself bit for bit, so the operation is exactly
    idempotent despite round-off.
    """
    w = np.asarray(w, dtype=np.float64)
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("cannot project a vector with non-finite entries")
    radius = float(radius)
    if radius <= 0:
        raise InvalidInputError(f"radius must be positive, got {radius}")
    norm = float(np.linalg.norm(w))
    while norm > radius:
        w = w * (radius / norm)
        norm = float(np.linalg.norm(w))
    return w


def validate_dataset(dataset: Dataset) -> list[str]:
    """Report every violated invariant; an empty list means valid.

    Checks dimension agreement, the unit-ball bound ``||x|| <= 1`` (with
    round-off tolerance), finiteness, and labels in {-1, +1}.
    """
    issues: list[str] = []
    for i, point in enumerate(dataset.points):
        if point.d != dataset.d:
            issues.append(
                f"point {i}: dimension {point.d} != dataset dimension {dataset.d}"
            )
        elif not np.all(np.isfinite(point.x)):
            issues.append(f"point {i}: non-finite feature entries")
        else:
            norm = float(np.linalg.norm(point.x))
            if norm > 1.0 + BALL_TOL:
                issues.append(f"point {i}: norm {norm:.9g} exceeds the unit ball")
        if point.y not in (-1, 1):
            issues.append(f"point {i}: label {point.y} not in {{-1, +1}}")
    return issues


def margin_of(dataset: Dataset, cert: MarginCertificate, roles: str = INLIER) -> float:
    """Minimum functional margin ``y * <x, w_star>`` over the selected points.

    The certificate is valid for the dataset's inliers iff
    ``margin_of(D, cert, "inlier") >= 1 - MARGIN_TOL``.  ``roles`` selects
    which points enter the minimum: ``"inlier"``, ``"outlier"`` or ``"all"``.
    """
    if cert.d != dataset.d:
        raise InvalidInputError(
            f"certificate dimension {cert.d} != dataset dimension {dataset.d}"
        )
    if roles == "all":
        mask = np.ones(dataset.n, dtype=bool)
    elif roles == INLIER:
        mask = ~dataset.outlier_mask
    elif roles == OUTLIER:
        mask = dataset.outlier_mask
    else:
        raise InvalidInputError(f"unknown role filter {roles!r}")
    if not mask.any():
        raise EmptySelectionError(f"no points with role filter {roles!r}")
    margins = dataset.y[mask] * (dataset.X[mask] @ cert.w_star)
    return float(margins.min())


# Dataset CSV contract: header `y,role,x0,...,x{d-1}`; y in {-1,1}; role in
# {inlier,outlier}; features written with 17 significant digits so that
# write -> read round-trips every IEEE double bit for bit.

def write_dataset_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "role"] + [f"x{j}" for j in range(dataset.d)])
        for point, role in zip(dataset.points, dataset.roles):
            writer.writerow(
                [str(point.y), role] + [f"{v:.17g}" for v in point.x]
            )


def read_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty dataset file") from None
        if len(header) < 3 or header[0] != "y" or header[1] != "role":
            raise InvalidInputError(
                f"{path}: expected header 'y,role,x0,...', got {header[:3]}"
            )
        d = len(header) - 2
        points: list[LabeledPoint] = []
        roles: list[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise InvalidInputError(
                    f"{path}:{lineno}: expected {d + 2} fields, got {len(row)}"
                )
            try:
                y = int(row[0])
                x = np.array([float(v) for v in row[2:]], dtype=np.float64)
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
            role = row[1]
            if role not in ROLES:
                raise InvalidInputError(f"{path}:{lineno}: unknown role {role!r}")
            points.append(LabeledPoint(x, y))
            roles.append(role)
    if not points:
        raise InvalidInputError(f"{path}: no data rows")
    return Dataset(tuple(points), tuple(roles), d)
