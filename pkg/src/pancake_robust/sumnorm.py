"""Hereditary and linear sum norms of signed point sets.

For signed vectors ``v_i = y_i * x_i`` the hereditary sum norm is the
maximum over subsets of the norm of the subset sum; the linear sum norm
relaxes the 0/1 subset indicator to a coefficient box.  Both are convex
maximization problems whose optimum sits at a box vertex, so small
instances are solved exactly by enumeration.  Larger instances fall back
to heuristics that return certified lower bounds (the witness always
reproduces the reported value).

The two exact engines deliberately share no code: the hereditary engine
enumerates subset sums by prefix doubling with a meet-in-the-middle
combine, while the linear engine materializes vertex coefficient blocks
and multiplies them out.  Agreement between them is itself a checked
property.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import OUTLIER, Dataset
from .errors import InvalidInputError, SizeGuardError
from .seeds import derive_seed, make_rng

SUBSET_ENUMERATION_LIMIT = 25

BOX_ZERO_ONE = "zero-one"
BOX_SYMMETRIC_ONE = "sym-one"
BOXES = (BOX_ZERO_ONE, BOX_SYMMETRIC_ONE)

METHOD_EXACT = "ExactSubset"
METHOD_ALTERNATING = "AlternatingMax"
METHOD_PROJECTED_GRADIENT = "ProjectedGradient"

_CHUNK_BITS = 16


@dataclass(frozen=True, eq=False)
class SignedPointSet:
    """The vectors y_i * x_i entering a sum norm, with their source roles."""

    vectors: np.ndarray
    roles: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        if vectors.ndim != 2:
            raise InvalidInputError("signed vectors must form an (m, d) array")
        vectors = vectors.copy()
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    @classmethod
    def from_dataset(cls, dataset: Dataset, role: str = OUTLIER) -> "SignedPointSet":
        mask = dataset.outlier_mask if role == OUTLIER else ~dataset.outlier_mask
        vectors = dataset.y[mask, None] * dataset.X[mask]
        roles = tuple(r for r, m in zip(dataset.roles, mask) if m)
        if vectors.shape[0] == 0:
            vectors = np.zeros((0, dataset.d))
        return cls(vectors, roles)

    def __len__(self) -> int:
        return self.vectors.shape[0]


def _as_vectors(V) -> np.ndarray:
    if isinstance(V, SignedPointSet):
        return V.vectors
    arr = np.asarray(V, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, arr.shape[-1] if arr.ndim == 2 else 1)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise InvalidInputError("signed vectors must form an (m, d) array")
    return arr


@dataclass(frozen=True, eq=False)
class SumNormReport:
    """Value plus the coefficient witness that reproduces it.

    ``witness`` holds subset indicators in {0,1} for hereditary results
    and box coefficients for linear results.  ``exact`` marks results
    obtained by full vertex enumeration; heuristic values are certified
    lower bounds on the true norm.
    """

    value: float
    witness: np.ndarray
    method: str
    exact: bool
    restarts: int | None = None
    evaluations: int | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "witness": self.witness.tolist(),
            "method": self.method,
            "exact": self.exact,
            "restarts": self.restarts,
            "evaluations": self.evaluations,
        }


def witness_value(V, witness) -> float:
    """Norm of the witnessed combination; must match the reported value."""
    V = _as_vectors(V)
    witness = np.asarray(witness, dtype=np.float64)
    if len(witness) != len(V):
        raise InvalidInputError("witness length must match the vector count")
    return float(np.linalg.norm(witness @ V))


def _prefix_subset_sums(V: np.ndarray) -> np.ndarray:
    """All 2^m subset sums, indexed by bitmask (bit i = vector i included)."""
    sums = np.zeros((1, V.shape[1]))
    for i in range(V.shape[0]):
        sums = np.concatenate([sums, sums + V[i]])
    return sums


def her_sum_norm_exact(V) -> SumNormReport:
    """Exact hereditary sum norm by enumeration of all 2^m subsets.

    Ties are broken toward the lowest bitmask, i.e. the witness whose
    indicator reads smallest as a binary number with vector 0 at bit 0.
    Guarded at m <= 25; use ``her_sum_norm_heuristic`` beyond that.
    """
    V = _as_vectors(V)
    m = V.shape[0]
    if m > SUBSET_ENUMERATION_LIMIT:
        raise SizeGuardError(
            f"exact enumeration is limited to {SUBSET_ENUMERATION_LIMIT} vectors "
            f"(got {m}); use her_sum_norm_heuristic"
        )
    if m == 0:
        return SumNormReport(0.0, np.zeros(0), METHOD_EXACT, True, evaluations=1)
    half = (m + 1) // 2
    low = _prefix_subset_sums(V[:half])
    high = _prefix_subset_sums(V[half:])
    best_sq = -1.0
    best_mask = 0
    for hi_mask in range(high.shape[0]):
        combined = low + high[hi_mask]
        sq = np.einsum("ij,ij->i", combined, combined)
        lo_mask = int(np.argmax(sq))
        if sq[lo_mask] > best_sq:
            best_sq = float(sq[lo_mask])
            best_mask = (hi_mask << half) | lo_mask
    witness = np.array([(best_mask >> i) & 1 for i in range(m)], dtype=np.float64)
    return SumNormReport(
        value=math.sqrt(max(best_sq, 0.0)),
        witness=witness,
        method=METHOD_EXACT,
        exact=True,
        evaluations=2**m,
    )


def her_sum_norm_heuristic(V, restarts: int = 50, seed: int = 0) -> SumNormReport:
    """Alternating maximization of ``max_u sum_i max(0, <u, v_i>)``.

    From a random unit u, alternate ``S = {i : <u, v_i> > 0}`` and
    ``u = normalize(sum_S v_i)``.  Each step is monotone in the
    objective and terminates at a fixed point; the best subset over all
    restarts is returned.  The value is a lower bound on the exact norm
    since the witness is an actual subset.
    """
    V = _as_vectors(V)
    m, d = V.shape
    if restarts < 1:
        raise InvalidInputError("need at least one restart")
    if m == 0 or not np.any(np.linalg.norm(V, axis=1) > 0):
        return SumNormReport(
            0.0, np.zeros(m), METHOD_ALTERNATING, False, restarts=restarts
        )
    rng = make_rng(seed)
    best_sq = -1.0
    best_witness = np.zeros(m)
    iterations = 0
    for _ in range(restarts):
        u = rng.standard_normal(d)
        norm = np.linalg.norm(u)
        u = u / norm if norm > 0 else np.eye(d)[0]
        selected = None
        for _ in range(10 * m + 100):
            iterations += 1
            members = (V @ u) > 0
            total = V[members].sum(axis=0)
            norm = float(np.linalg.norm(total))
            if norm == 0.0:
                break
            u = total / norm
            key = members.tobytes()
            if key == selected:
                break
            selected = key
        members = (V @ u) > 0
        total = V[members].sum(axis=0)
        sq = float(total @ total)
        if sq > best_sq:
            best_sq = sq
            best_witness = members.astype(np.float64)
    return SumNormReport(
        value=math.sqrt(max(best_sq, 0.0)),
        witness=best_witness,
        method=METHOD_ALTERNATING,
        exact=False,
        restarts=restarts,
        evaluations=iterations,
    )


def _vertex_enumeration(V: np.ndarray, symmetric: bool) -> SumNormReport:
    """Exact box maximum via chunked enumeration of coefficient vertices."""
    m = V.shape[0]
    if m == 0:
        return SumNormReport(0.0, np.zeros(0), METHOD_EXACT, True, evaluations=1)
    bit_index = np.arange(m, dtype=np.int64)
    best_sq = -1.0
    best_mask = 0
    chunk = 1 << min(_CHUNK_BITS, m)
    for start in range(0, 2**m, chunk):
        masks = np.arange(start, min(start + chunk, 2**m), dtype=np.int64)
        bits = ((masks[:, None] >> bit_index) & 1).astype(np.float64)
        if symmetric:
            sums = (2.0 * bits - 1.0) @ V
        else:
            sums = bits @ V
        sq = np.einsum("ij,ij->i", sums, sums)
        i = int(np.argmax(sq))
        if sq[i] > best_sq:
            best_sq = float(sq[i])
            best_mask = int(masks[i])
    bits = np.array([(best_mask >> i) & 1 for i in range(m)], dtype=np.float64)
    witness = 2.0 * bits - 1.0 if symmetric else bits
    return SumNormReport(
        value=math.sqrt(max(best_sq, 0.0)),
        witness=witness,
        method=METHOD_EXACT,
        exact=True,
        evaluations=2**m,
    )


def _projected_gradient(
    V: np.ndarray, symmetric: bool, restarts: int, seed: int
) -> SumNormReport:
    """Heuristic box maximum: projected gradient ascent plus vertex snapping."""
    m, d = V.shape
    lo = -1.0 if symmetric else 0.0
    rng = make_rng(derive_seed(seed, "lin-sum-norm"))
    best_sq = -1.0
    best_witness = np.full(m, lo)
    steps = 0
    for _ in range(max(1, restarts)):
        a = rng.uniform(lo, 1.0, size=m)
        for t in range(200):
            steps += 1
            s = a @ V
            norm = float(np.linalg.norm(s))
            if norm == 0.0:
                grad = V @ rng.standard_normal(d)
            else:
                grad = V @ (s / norm)
            a_next = np.clip(a + grad / math.sqrt(t + 1.0), lo, 1.0)
            if np.allclose(a_next, a, atol=1e-12):
                a = a_next
                break
            a = a_next
        # the objective is convex, so the sign-pattern vertex dominates a
        snapped = np.where(V @ (a @ V) > 0, 1.0, lo)
        for cand in (a, snapped):
            s = cand @ V
            sq = float(s @ s)
            if sq > best_sq:
                best_sq = sq
                best_witness = cand.copy()
    return SumNormReport(
        value=math.sqrt(max(best_sq, 0.0)),
        witness=best_witness,
        method=METHOD_PROJECTED_GRADIENT,
        exact=False,
        restarts=restarts,
        evaluations=steps,
    )


def lin_sum_norm(
    V,
    box: str = BOX_ZERO_ONE,
    method: str = "auto",
    restarts: int = 50,
    seed: int = 0,
) -> SumNormReport:
    """Maximum of ``||sum_i a_i v_i||`` over a coefficient box.

    ``zero-one`` uses ``a_i in [0, 1]`` and agrees with the hereditary
    norm (the maximum of a convex function over a box is attained at a
    vertex).  ``sym-one`` uses ``a_i in [-1, 1]``, the box needed to
    bound sums of loss gradients whose coefficients carry signs.  Exact
    enumeration is guarded at m <= 25; above that (or with
    ``method="projected-gradient"``) a projected-gradient heuristic
    returns a lower bound flagged ``exact=False``.
    """
    if box not in BOXES:
        raise InvalidInputError(f"unknown box {box!r}; expected one of {BOXES}")
    V = _as_vectors(V)
    m = V.shape[0]
    symmetric = box == BOX_SYMMETRIC_ONE
    if method == "auto":
        method = "exact" if m <= SUBSET_ENUMERATION_LIMIT else "projected-gradient"
    if method == "exact":
        if m > SUBSET_ENUMERATION_LIMIT:
            raise SizeGuardError(
                f"exact enumeration is limited to {SUBSET_ENUMERATION_LIMIT} vectors "
                f"(got {m}); use method='projected-gradient'"
            )
        return _vertex_enumeration(V, symmetric)
    if method == "projected-gradient":
        return _projected_gradient(V, symmetric, restarts, seed)
    raise InvalidInputError(f"unknown method {method!r}")


@dataclass(frozen=True)
class RoundingCheck:
    """Monte Carlo check that independent 0/1 rounding does not shrink norms.

    ``lhs`` estimates ``E ||sum_i A_i v_i||^2`` with ``A_i ~ Bernoulli(a_i)``;
    ``rhs`` is the deterministic ``||sum_i a_i v_i||^2``.  Convexity of the
    square forces ``lhs >= rhs`` in expectation, so ``lhs`` should not fall
    more than a few standard errors below ``rhs``.
    """

    lhs: float
    rhs: float
    stderr: float
    trials: int

    @property
    def consistent(self) -> bool:
        return self.lhs >= self.rhs - 3.0 * self.stderr

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "stderr": self.stderr,
            "trials": self.trials,
            "consistent": self.consistent,
        }


def rounding_check(V, a, trials: int, seed: int = 0) -> RoundingCheck:
    """Estimate the rounding inequality for coefficients ``a`` in [0, 1]^m."""
    V = _as_vectors(V)
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (V.shape[0],):
        raise InvalidInputError("coefficients must be parallel to the vectors")
    if np.any((a < 0.0) | (a > 1.0)):
        raise InvalidInputError("coefficients must lie in [0, 1]")
    if trials < 100:
        raise InvalidInputError(f"need at least 100 trials, got {trials}")
    rng = make_rng(seed)
    draws = (rng.random((trials, len(a))) < a).astype(np.float64)
    sums = draws @ V
    sq = np.einsum("ij,ij->i", sums, sums)
    rhs_vec = a @ V
    return RoundingCheck(
        lhs=float(sq.mean()),
        rhs=float(rhs_vec @ rhs_vec),
        stderr=float(sq.std(ddof=1) / math.sqrt(trials)),
        trials=trials,
    )
