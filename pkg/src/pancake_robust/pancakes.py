"""Pancake membership, density certification, direction nets, and sample sizing.

A pancake around an anchor (z, y) in direction w with half-width tau is
the slab of same-label points x whose projection satisfies
``|<w, x - z>| <= tau``.  A dataset satisfies the (tau, rho, beta)
dense-pancakes condition when, for every unit direction, at most a beta
fraction of anchors have a pancake containing less than a rho fraction of
the reference set.

Certification sweeps a net of directions.  In dimensions 1 to 3 the net
is a deterministic grid with verified covering radius; in higher
dimensions a true net of size (1 + 2/tau')^d is intractable, so seeded
random directions are used instead and flagged non-exhaustive.  The
random sweep is still sound as a falsifier (any bad direction found
disproves the condition) and a Monte Carlo check otherwise.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import Dataset, LabeledPoint
from .errors import EmptySelectionError, InvalidInputError
from .seeds import make_rng

MEMBERSHIP_TOL = 1e-12
DIRECTION_UNIT_TOL = 1e-9

# Fibonacci-lattice sizing for d=3: covering radius is ~2.7/sqrt(N)
# empirically, so N = (4.5/tau')^2 leaves a ~40% safety margin.
_FIB_COVER_CONSTANT = 4.5


@dataclass(frozen=True)
class PancakeParams:
    """Half-width tau, density threshold rho, allowed exceptional mass beta."""

    tau: float
    rho: float
    beta: float

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise InvalidInputError(f"tau must be positive, got {self.tau}")
        if not (0.0 < self.rho <= 1.0):
            raise InvalidInputError(f"rho must lie in (0, 1], got {self.rho}")
        if not (0.0 <= self.beta < 1.0):
            raise InvalidInputError(f"beta must lie in [0, 1), got {self.beta}")

    def to_dict(self) -> dict:
        return {"tau": self.tau, "rho": self.rho, "beta": self.beta}

    @classmethod
    def from_dict(cls, data: dict) -> "PancakeParams":
        return cls(float(data["tau"]), float(data["rho"]), float(data["beta"]))


@dataclass(frozen=True)
class TransferParams:
    """Net resolution tau' and extra failure mass beta' for empirical transfer."""

    tau_prime: float
    beta_prime: float

    def __post_init__(self) -> None:
        if not self.tau_prime > 0:
            raise InvalidInputError(f"tau_prime must be positive, got {self.tau_prime}")
        if not (0.0 < self.beta_prime < 1.0):
            raise InvalidInputError(
                f"beta_prime must lie in (0, 1), got {self.beta_prime}"
            )

    def to_dict(self) -> dict:
        return {"tau_prime": self.tau_prime, "beta_prime": self.beta_prime}

    @classmethod
    def from_dict(cls, data: dict) -> "TransferParams":
        return cls(float(data["tau_prime"]), float(data["beta_prime"]))


@dataclass(frozen=True, eq=False)
class DirectionNet:
    """Unit directions to sweep, with a flag for grid vs random construction."""

    directions: np.ndarray
    exhaustive: bool
    tau_prime: float

    def __post_init__(self) -> None:
        directions = np.atleast_2d(np.asarray(self.directions, dtype=np.float64))
        norms = np.linalg.norm(directions, axis=1)
        if np.any(np.abs(norms - 1.0) > DIRECTION_UNIT_TOL):
            raise InvalidInputError("net directions must be unit vectors")
        directions = directions.copy()
        directions.setflags(write=False)
        object.__setattr__(self, "directions", directions)

    @property
    def net_size(self) -> int:
        return self.directions.shape[0]


@dataclass(frozen=True, eq=False)
class CertificationReport:
    """Worst-case non-dense anchor fraction over the net, with witnesses.

    ``bad_anchors`` lists ``(anchor_index, direction_index, density)`` for
    the direction achieving ``beta_hat``; every listed density is < rho.
    """

    beta_hat: float
    worst_direction: np.ndarray
    bad_anchors: tuple[tuple[int, int, float], ...]
    net_size: int

    def passes(self, beta: float) -> bool:
        return self.beta_hat <= beta

    def to_dict(self) -> dict:
        return {
            "beta_hat": self.beta_hat,
            "worst_direction": self.worst_direction.tolist(),
            "bad_anchors": [list(b) for b in self.bad_anchors],
            "net_size": self.net_size,
        }


def _check_direction(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise InvalidInputError("direction must be a vector")
    if abs(float(np.linalg.norm(w)) - 1.0) > DIRECTION_UNIT_TOL:
        raise InvalidInputError("direction must have unit norm")
    return w


def pancake_membership(
    w, tau: float, anchor: LabeledPoint, candidate: LabeledPoint
) -> bool:
    """True iff the candidate shares the anchor's label and projection slab.

    Membership requires ``candidate.y == anchor.y`` and
    ``|<w, candidate.x - anchor.x>| <= tau`` (up to round-off).
    """
    w = _check_direction(w)
    if anchor.d != candidate.d or anchor.d != w.shape[0]:
        raise InvalidInputError(
            f"dimension mismatch: w has d={w.shape[0]}, anchor d={anchor.d}, "
            f"candidate d={candidate.d}"
        )
    if candidate.y != anchor.y:
        return False
    gap = abs(float(w @ (candidate.x - anchor.x)))
    return gap <= tau + MEMBERSHIP_TOL


def pancake_density(
    reference: Dataset, w, tau: float, anchor: LabeledPoint
) -> float:
    """Fraction of the reference set inside the anchor's pancake.

    The denominator is the full reference size; when the anchor is a
    member of the reference set it counts itself.
    """
    if reference.n == 0:
        raise EmptySelectionError("reference dataset is empty")
    w = _check_direction(w)
    if reference.d != anchor.d:
        raise InvalidInputError(
            f"anchor dimension {anchor.d} != reference dimension {reference.d}"
        )
    proj = reference.X @ w
    gap = np.abs(proj - float(anchor.x @ w))
    members = (reference.y == anchor.y) & (gap <= tau + MEMBERSHIP_TOL)
    return float(members.sum()) / reference.n


def _net_1d() -> np.ndarray:
    return np.array([[1.0], [-1.0]])


def _net_2d(tau_prime: float) -> np.ndarray:
    # adjacent grid points are at chord distance <= tau', which over-covers:
    # the worst probe sits mid-arc at half that chord.
    half = min(tau_prime, 2.0) / 2.0
    count = max(4, math.ceil(2.0 * math.pi / (2.0 * math.asin(half))))
    angles = 2.0 * math.pi * np.arange(count) / count
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def _net_3d(tau_prime: float) -> np.ndarray:
    count = max(16, math.ceil((_FIB_COVER_CONSTANT / min(tau_prime, 2.0)) ** 2))
    i = np.arange(count, dtype=np.float64)
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    z = 1.0 - (2.0 * i + 1.0) / count
    theta = 2.0 * math.pi * i / golden
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)


def _random_unit(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    g = rng.standard_normal((count, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return g / norms


def direction_net(
    d: int, tau_prime: float, seed: int = 0, max_size: int = 100_000
) -> DirectionNet:
    """Build the direction net for a tau'-resolution sweep.

    For d <= 3 the net is a deterministic grid whose covering radius is
    at most tau' (every unit vector lies within tau' of a net member).
    For d > 3 the ideal net size ``(1 + 2/tau')^d`` is clamped to
    ``max_size`` seeded random unit directions, flagged non-exhaustive.
    """
    if d < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {d}")
    if tau_prime <= 0:
        raise InvalidInputError(f"tau_prime must be positive, got {tau_prime}")
    if max_size < 1:
        raise InvalidInputError(f"max_size must be >= 1, got {max_size}")
    if d == 1:
        return DirectionNet(_net_1d(), True, tau_prime)
    if d == 2:
        return DirectionNet(_net_2d(tau_prime), True, tau_prime)
    if d == 3:
        return DirectionNet(_net_3d(tau_prime), True, tau_prime)
    log_ideal = d * math.log1p(2.0 / tau_prime)
    if log_ideal >= math.log(max_size):
        count = max_size
    else:
        count = min(max_size, max(1, math.ceil(math.exp(log_ideal))))
    return DirectionNet(_random_unit(make_rng(seed), count, d), False, tau_prime)


def _directions_array(directions) -> np.ndarray:
    if isinstance(directions, DirectionNet):
        return directions.directions
    arr = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    if arr.size == 0:
        raise InvalidInputError("need at least one direction")
    norms = np.linalg.norm(arr, axis=1)
    if np.any(np.abs(norms - 1.0) > DIRECTION_UNIT_TOL):
        raise InvalidInputError("directions must be unit vectors")
    return arr


def _densities_along(
    ref_proj: np.ndarray,
    ref_y: np.ndarray,
    anchor_proj: np.ndarray,
    anchor_y: np.ndarray,
    tau: float,
    n_ref: int,
) -> np.ndarray:
    """Per-anchor pancake densities along one direction via sorted windows."""
    densities = np.zeros(anchor_proj.shape[0])
    width = tau + MEMBERSHIP_TOL
    for label in np.unique(anchor_y):
        a_idx = anchor_y == label
        ref_sorted = np.sort(ref_proj[ref_y == label])
        if ref_sorted.size == 0:
            continue
        hi = np.searchsorted(ref_sorted, anchor_proj[a_idx] + width, side="right")
        lo = np.searchsorted(ref_sorted, anchor_proj[a_idx] - width, side="left")
        densities[a_idx] = (hi - lo) / n_ref
    return densities


def certify_empirical(
    reference: Dataset,
    anchors: Dataset,
    directions,
    params: PancakeParams,
    workers: int = 1,
) -> CertificationReport:
    """Worst-direction fraction of anchors whose pancake is not rho-dense.

    For each direction the fraction of anchors with density < rho is
    computed against the reference set; ``beta_hat`` is the maximum over
    directions and the condition holds iff ``beta_hat <= beta``.  The
    direction sweep is read-only and embarrassingly parallel; results
    merge by max-reduction, so worker count never changes the report.
    """
    dirs = _directions_array(directions)
    if dirs.shape[1] != reference.d or anchors.d != reference.d:
        raise InvalidInputError("directions, anchors and reference must share d")
    X_ref, y_ref = reference.X, reference.y
    X_anc, y_anc = anchors.X, anchors.y

    def sweep(index: int) -> tuple[float, np.ndarray]:
        w = dirs[index]
        dens = _densities_along(
            X_ref @ w, y_ref, X_anc @ w, y_anc, params.tau, reference.n
        )
        return float((dens < params.rho).mean()), dens

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(sweep, range(dirs.shape[0])))
    else:
        results = [sweep(i) for i in range(dirs.shape[0])]

    fractions = np.array([r[0] for r in results])
    worst = int(np.argmax(fractions))
    worst_densities = results[worst][1]
    bad = np.flatnonzero(worst_densities < params.rho)
    bad_anchors = tuple(
        (int(i), worst, float(worst_densities[i])) for i in bad
    )
    return CertificationReport(
        beta_hat=float(fractions[worst]),
        worst_direction=dirs[worst].copy(),
        bad_anchors=bad_anchors,
        net_size=dirs.shape[0],
    )


def estimate_density_floor(
    reference: Dataset,
    anchors: Dataset,
    directions,
    tau: float,
    beta: float,
    workers: int = 1,
) -> float:
    """Largest rho the data certifies at mass beta over the given directions.

    For each direction, take the beta-quantile of the anchor densities
    (the floor below which at most a beta fraction of anchors fall); the
    certified rho is the minimum over directions.  By construction
    ``certify_empirical`` at the returned rho yields ``beta_hat <= beta``.
    """
    if not (0.0 <= beta < 1.0):
        raise InvalidInputError(f"beta must lie in [0, 1), got {beta}")
    dirs = _directions_array(directions)
    if dirs.shape[1] != reference.d or anchors.d != reference.d:
        raise InvalidInputError("directions, anchors and reference must share d")
    X_ref, y_ref = reference.X, reference.y
    X_anc, y_anc = anchors.X, anchors.y
    cut = int(beta * anchors.n)

    def floor_along(index: int) -> float:
        w = dirs[index]
        dens = _densities_along(X_ref @ w, y_ref, X_anc @ w, y_anc, tau, reference.n)
        return float(np.partition(dens, cut)[cut])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            floors = list(pool.map(floor_along, range(dirs.shape[0])))
    else:
        floors = [floor_along(i) for i in range(dirs.shape[0])]
    return min(floors)


def required_sample_size(
    rho: float, tau_prime: float, beta_prime: float, d: int
) -> int:
    """Sample size for the distribution-to-empirical transfer.

    ``ceil((8/rho) * (d * ln(1 + 2/tau') + ln(1/beta')))``: with this many
    i.i.d. points, a (tau, rho, beta)-dense source yields a sample
    satisfying (tau + tau', rho/2, beta + beta') with probability at
    least 1 - exp(-d).
    """
    if not (0.0 < rho <= 1.0):
        raise InvalidInputError(f"rho must lie in (0, 1], got {rho}")
    if tau_prime <= 0:
        raise InvalidInputError(f"tau_prime must be positive, got {tau_prime}")
    if not (0.0 < beta_prime < 1.0):
        raise InvalidInputError(f"beta_prime must lie in (0, 1), got {beta_prime}")
    if d < 1:
        raise InvalidInputError(f"dimension must be >= 1, got {d}")
    bound = (8.0 / rho) * (d * math.log1p(2.0 / tau_prime) + math.log(1.0 / beta_prime))
    return max(0, math.ceil(bound))


def chernoff_failure_bound(rho: float, n: int) -> float:
    """Per-anchor failure probability ``exp(-rho * n / 8)`` for an n-point sample."""
    if n < 0:
        raise InvalidInputError(f"n must be non-negative, got {n}")
    return math.exp(-rho * n / 8.0)
