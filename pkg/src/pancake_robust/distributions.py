"""Samplers for isotropic log-concave mixtures and the margin-separable generator.

Two canonical isotropic log-concave component families are provided:
spherical Gaussians and uniform balls.  Class-conditional distributions
are weighted mixtures of mean-shifted components.  The generator places
the classes at ``+/- class_shift`` along a unit direction ``u_star``,
adds mixture noise, and rejection-samples until every accepted point has
functional margin ``y * <x, u_star> >= gamma_star`` and norm at most 1,
so the returned certificate ``w_star = u_star / gamma_star`` is valid by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Dataset, MarginCertificate
from .errors import InfeasibleSpecError, InvalidInputError
from .seeds import make_rng

GAUSSIAN = "gaussian_isotropic"
UNIFORM_BALL = "uniform_ball"
KINDS = (GAUSSIAN, UNIFORM_BALL)

WEIGHT_TOL = 1e-12
UNIT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ComponentSpec:
    """One mixture component: an isotropic log-concave family plus a translation."""

    kind: str
    mean: np.ndarray
    weight: float
    sigma: float | None = None
    radius: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown component kind {self.kind!r}")
        mean = np.array(self.mean, dtype=np.float64)
        if mean.ndim != 1:
            raise InvalidInputError("component mean must be a vector")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "weight", float(self.weight))
        if not (0.0 <= self.weight <= 1.0):
            raise InvalidInputError(f"weight must lie in [0, 1], got {self.weight}")
        if self.kind == GAUSSIAN:
            if self.sigma is None or float(self.sigma) <= 0:
                raise InvalidInputError("gaussian component needs sigma > 0")
            object.__setattr__(self, "sigma", float(self.sigma))
        else:
            if self.radius is None or float(self.radius) <= 0:
                raise InvalidInputError("uniform-ball component needs radius > 0")
            object.__setattr__(self, "radius", float(self.radius))

    def to_dict(self) -> dict:
        data = {"kind": self.kind, "mean": self.mean.tolist(), "weight": self.weight}
        if self.sigma is not None:
            data["sigma"] = self.sigma
        if self.radius is not None:
            data["radius"] = self.radius
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ComponentSpec":
        return cls(
            kind=data["kind"],
            mean=np.asarray(data["mean"], dtype=np.float64),
            weight=float(data["weight"]),
            sigma=data.get("sigma"),
            radius=data.get("radius"),
        )


def _check_weights(components: Sequence[ComponentSpec]) -> np.ndarray:
    if not components:
        raise InvalidInputError("mixture needs at least one component")
    weights = np.array([c.weight for c in components], dtype=np.float64)
    if abs(weights.sum() - 1.0) > WEIGHT_TOL:
        raise InvalidInputError(f"mixture weights sum to {weights.sum()!r}, not 1")
    return weights


def _sample_with_rng(
    spec: ComponentSpec, d: int, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n points from one component, consuming rng in a fixed order.

    Gaussian: one (n, d) block of standard normals.  Uniform ball: an
    (n, d) block of normals for directions, then n uniforms for radii
    (U^(1/d) law).  The fixed order is part of the determinism contract.
    """
    if spec.mean.shape[0] != d:
        raise InvalidInputError(
            f"component mean has dimension {spec.mean.shape[0]}, expected {d}"
        )
    if spec.kind == GAUSSIAN:
        return spec.mean + spec.sigma * rng.standard_normal((n, d))
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = spec.radius * rng.random(n) ** (1.0 / d)
    return spec.mean + radii[:, None] * (g / norms)


def sample_component(spec: ComponentSpec, d: int, n: int, seed: int) -> np.ndarray:
    """n i.i.d. draws from a single mean-shifted component, seeded."""
    if n < 1:
        raise InvalidInputError(f"need n >= 1 draws, got {n}")
    return _sample_with_rng(spec, d, n, make_rng(seed))


def translate(points, mu) -> np.ndarray:
    """Add mu to every point; norms may leave the unit ball."""
    points = np.asarray(points, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if points.shape[-1] != mu.shape[0]:
        raise InvalidInputError(
            f"dimension mismatch: points have d={points.shape[-1]}, mu has d={mu.shape[0]}"
        )
    return points + mu


def mix(components: Sequence[ComponentSpec], d: int, n: int, seed: int) -> np.ndarray:
    """Sample a weighted mixture: select a component per point, then draw it.

    With a single component this reduces to ``sample_component`` bit for
    bit (no selection randomness is consumed).
    """
    weights = _check_weights(components)
    if len(components) == 1:
        return sample_component(components[0], d, n, seed)
    rng = make_rng(seed)
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    choice = np.searchsorted(cum, rng.random(n), side="right")
    out = np.empty((n, d), dtype=np.float64)
    for j, comp in enumerate(components):
        idx = np.flatnonzero(choice == j)
        if idx.size:
            out[idx] = _sample_with_rng(comp, d, idx.size, rng)
    return out


def homogenize(points) -> np.ndarray:
    """Lift x to (x, 1)/sqrt(2); unit-ball inputs stay in the unit ball."""
    points = np.asarray(points, dtype=np.float64)
    ones = np.ones(points.shape[:-1] + (1,), dtype=np.float64)
    return np.concatenate([points, ones], axis=-1) / math.sqrt(2.0)


def clip_to_ball(points, radius: float = 1.0) -> np.ndarray:
    """Rescale any point outside the radius ball onto its boundary."""
    points = np.asarray(points, dtype=np.float64)
    norms = np.linalg.norm(points, axis=-1, keepdims=True)
    scale = np.where(norms > radius, radius / np.where(norms == 0, 1.0, norms), 1.0)
    return points * scale


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """Margin-separable dataset recipe; serializes to JSON field for field."""

    d: int
    n: int
    gamma_star: float
    positive_mixture: tuple[ComponentSpec, ...]
    negative_mixture: tuple[ComponentSpec, ...]
    class_shift: float
    seed: int
    u_star: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.d < 1 or self.n < 1:
            raise InvalidInputError("d and n must be positive")
        gamma = float(self.gamma_star)
        if not (0.0 < gamma < 1.0):
            raise InvalidInputError(f"gamma_star must lie in (0, 1), got {gamma}")
        object.__setattr__(self, "gamma_star", gamma)
        object.__setattr__(self, "class_shift", float(self.class_shift))
        object.__setattr__(self, "positive_mixture", tuple(self.positive_mixture))
        object.__setattr__(self, "negative_mixture", tuple(self.negative_mixture))
        _check_weights(self.positive_mixture)
        _check_weights(self.negative_mixture)
        if self.u_star is not None:
            u = np.array(self.u_star, dtype=np.float64)
            if u.shape != (self.d,):
                raise InvalidInputError("u_star must be a d-vector")
            if abs(np.linalg.norm(u) - 1.0) > 1e-9:
                raise InvalidInputError("u_star must have unit norm")
            u.setflags(write=False)
            object.__setattr__(self, "u_star", u)

    def direction(self) -> np.ndarray:
        if self.u_star is not None:
            return self.u_star
        u = np.zeros(self.d)
        u[0] = 1.0
        return u

    def warnings(self) -> list[str]:
        """Soft checks: mixture means should have norm at most 2 * gamma_star."""
        notes = []
        for name, mixture in (
            ("positive", self.positive_mixture),
            ("negative", self.negative_mixture),
        ):
            for j, comp in enumerate(mixture):
                norm = float(np.linalg.norm(comp.mean))
                if norm > 2.0 * self.gamma_star + 1e-12:
                    notes.append(
                        f"{name} component {j}: mean norm {norm:.4g} exceeds "
                        f"2*gamma_star = {2.0 * self.gamma_star:.4g}"
                    )
        return notes

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "gamma_star": self.gamma_star,
            "u_star": None if self.u_star is None else self.u_star.tolist(),
            "positive_mixture": [c.to_dict() for c in self.positive_mixture],
            "negative_mixture": [c.to_dict() for c in self.negative_mixture],
            "class_shift": self.class_shift,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorSpec":
        u = data.get("u_star")
        return cls(
            d=int(data["d"]),
            n=int(data["n"]),
            gamma_star=float(data["gamma_star"]),
            positive_mixture=tuple(
                ComponentSpec.from_dict(c) for c in data["positive_mixture"]
            ),
            negative_mixture=tuple(
                ComponentSpec.from_dict(c) for c in data["negative_mixture"]
            ),
            class_shift=float(data["class_shift"]),
            seed=int(data["seed"]),
            u_star=None if u is None else np.asarray(u, dtype=np.float64),
        )


@dataclass(frozen=True)
class RejectionStats:
    draws: int
    accepted: int
    rejected_margin: int
    rejected_norm: int

    def to_dict(self) -> dict:
        return {
            "draws": self.draws,
            "accepted": self.accepted,
            "rejected_margin": self.rejected_margin,
            "rejected_norm": self.rejected_norm,
        }


def generate_margin_separable(
    spec: GeneratorSpec, max_draw_factor: int = 100
) -> tuple[Dataset, MarginCertificate, RejectionStats]:
    """Draw a margin-separable all-inlier dataset plus its certificate.

    Candidates are ``x = class_shift * y * u_star + noise`` with labels
    Rademacher(1/2) and noise from the class mixture; a candidate is
    accepted iff ``y * <x, u_star> >= gamma_star`` and ``||x|| <= 1``.
    Raises ``InfeasibleSpecError`` once ``max_draw_factor * n`` draws fail
    to produce ``n`` acceptances.
    """
    rng = make_rng(spec.seed)
    u = spec.direction()
    chunk = max(256, min(spec.n, 8192))
    budget = max_draw_factor * spec.n

    kept_x: list[np.ndarray] = []
    kept_y: list[np.ndarray] = []
    accepted = draws = rej_margin = rej_norm = 0
    while accepted < spec.n:
        if draws >= budget:
            raise InfeasibleSpecError(
                f"rejection cap hit: {draws} draws yielded {accepted}/{spec.n} "
                f"points (gamma_star={spec.gamma_star}, class_shift={spec.class_shift})"
            )
        y = 2 * rng.integers(0, 2, size=chunk) - 1
        noise = np.empty((chunk, spec.d), dtype=np.float64)
        for label, mixture in ((1, spec.positive_mixture), (-1, spec.negative_mixture)):
            idx = np.flatnonzero(y == label)
            if idx.size == 0:
                continue
            weights = np.array([c.weight for c in mixture])
            cum = np.cumsum(weights)
            cum[-1] = 1.0
            choice = np.searchsorted(cum, rng.random(idx.size), side="right")
            for j, comp in enumerate(mixture):
                jdx = idx[choice == j]
                if jdx.size:
                    noise[jdx] = _sample_with_rng(comp, spec.d, jdx.size, rng)
        x = spec.class_shift * y[:, None] * u + noise
        margin_ok = (y * (x @ u)) >= spec.gamma_star
        norm_ok = np.linalg.norm(x, axis=1) <= 1.0
        keep = margin_ok & norm_ok
        rej_margin += int((~margin_ok).sum())
        rej_norm += int((margin_ok & ~norm_ok).sum())
        draws += chunk
        if keep.any():
            kept_x.append(x[keep])
            kept_y.append(y[keep])
            accepted += int(keep.sum())

    X = np.concatenate(kept_x)[: spec.n]
    Y = np.concatenate(kept_y)[: spec.n]
    dataset = Dataset.from_arrays(X, Y)
    cert = MarginCertificate(u / spec.gamma_star, spec.gamma_star)
    stats = RejectionStats(
        draws=draws,
        accepted=spec.n,
        rejected_margin=rej_margin,
        rejected_norm=rej_norm,
    )
    return dataset, cert, stats
